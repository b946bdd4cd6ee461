//! Per-segment roughness/metalness tables and their bake into UV maps.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::mask::SemanticMask3D;
use crate::mesh::TriMesh;
use crate::raster::EMPTY;
use crate::texture::TextureMap;
use crate::uvraster::{nearest_covered, rasterize_uv};

pub const MIN_BAKE_RESOLUTION: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialValues {
    pub roughness: f64,
    pub metalness: f64,
}

impl Default for MaterialValues {
    fn default() -> Self {
        MaterialValues { roughness: 0.8, metalness: 0.0 }
    }
}

impl MaterialValues {
    fn check(&self) -> std::result::Result<(), (&'static str, f64)> {
        for (what, v) in [("roughness", self.roughness), ("metalness", self.metalness)] {
            if !(0.0..=1.0).contains(&v) {
                return Err((what, v));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEntry {
    pub name: String,
    pub values: MaterialValues,
}

/// Material values for every segment of a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentTable {
    pub default: MaterialValues,
    pub entries: BTreeMap<u32, SegmentEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSegment {
    id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    roughness: f64,
    metalness: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecommendationFile {
    #[serde(default)]
    default: MaterialValues,
    #[serde(default)]
    segments: Vec<FileSegment>,
}

fn default_name(id: u32) -> String {
    format!("segment {id}")
}

impl SegmentTable {
    /// Every segment of `mask` at `default`.
    pub fn for_mask(mask: &SemanticMask3D, default: MaterialValues) -> Self {
        SegmentTable {
            default,
            entries: (0..mask.segment_count)
                .map(|id| (id, SegmentEntry { name: default_name(id), values: default }))
                .collect(),
        }
    }

    pub fn values(&self, id: u32) -> MaterialValues {
        self.entries.get(&id).map_or(self.default, |e| e.values)
    }

    /// Parses recommendation JSON against `mask`. Segments missing from the
    /// file take the file's default.
    pub fn from_json(text: &str, mask: &SemanticMask3D) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: RecommendationFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        file.default.check().map_err(|(what, v)| Error::Schema {
            path: format!("default.{what}"),
            message: format!("{v} is outside [0, 1]"),
        })?;
        let mut table = Self::for_mask(mask, file.default);
        let mut seen = std::collections::HashSet::new();
        for (i, s) in file.segments.iter().enumerate() {
            let values = MaterialValues { roughness: s.roughness, metalness: s.metalness };
            values.check().map_err(|(what, v)| Error::Schema {
                path: format!("segments[{i}].{what}"),
                message: format!("{v} is outside [0, 1]"),
            })?;
            if !seen.insert(s.id) {
                return Err(Error::Schema {
                    path: format!("segments[{i}].id"),
                    message: format!("duplicate segment id {}", s.id),
                });
            }
            let entry = table.entries.get_mut(&s.id).ok_or(Error::UnknownSegment(s.id))?;
            entry.values = values;
            if let Some(name) = &s.name {
                entry.name = name.clone();
            }
        }
        Ok(table)
    }

    pub fn to_json(&self) -> String {
        let file = RecommendationFile {
            default: self.default,
            segments: self
                .entries
                .iter()
                .map(|(&id, e)| FileSegment {
                    id,
                    name: Some(e.name.clone()),
                    roughness: e.values.roughness,
                    metalness: e.values.metalness,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("table serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Returns a copy with segment `id` set to the given values.
    pub fn set_segment_values(&self, id: u32, roughness: f64, metalness: f64) -> Result<Self> {
        for (what, value) in [("roughness", roughness), ("metalness", metalness)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Range { what, value });
            }
        }
        let mut next = self.clone();
        let entry = next.entries.get_mut(&id).ok_or(Error::UnknownSegment(id))?;
        entry.values = MaterialValues { roughness, metalness };
        Ok(next)
    }
}

pub fn load_recommendations(path: impl AsRef<Path>, mask: &SemanticMask3D) -> Result<SegmentTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SegmentTable::from_json(&text, mask)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialBake {
    pub roughness: TextureMap,
    pub metalness: TextureMap,
    /// Texels claimed by triangles of different segments (lower triangle
    /// index kept).
    pub overlapping_texels: usize,
}

/// Per-texel segment id after the gutter fill, plus the number of texels
/// claimed by triangles of different segments.
pub fn texel_segments(mesh: &TriMesh, mask: &SemanticMask3D, resolution: u32, exec: Exec) -> Result<(Vec<u32>, usize)> {
    if mask.segments.len() != mesh.triangles.len() {
        return Err(Error::invalid(format!(
            "mask has {} entries but mesh has {} triangles",
            mask.segments.len(),
            mesh.triangles.len()
        )));
    }
    let cov = rasterize_uv(mesh, resolution, resolution, exec);
    let covered: Vec<bool> = cov.owner.iter().map(|&o| o != EMPTY).collect();
    let nearest = nearest_covered(&covered, resolution, resolution)
        .ok_or_else(|| Error::invalid("mesh UVs cover no texel"))?;
    let seg = |o: u32| mask.segments[o as usize];
    let mut overlaps: Vec<u32> = cov
        .contested
        .iter()
        .filter(|&&(t, f)| seg(cov.owner[t as usize]) != seg(f))
        .map(|&(t, _)| t)
        .collect();
    overlaps.sort_unstable();
    overlaps.dedup();
    let ids = nearest.iter().map(|&src| seg(cov.owner[src as usize])).collect();
    Ok((ids, overlaps.len()))
}

/// Rasterizes triangles into UV space and writes each covered texel's
/// segment values; uncovered texels copy their nearest covered texel.
pub fn bake_material_uvs(
    mesh: &TriMesh,
    mask: &SemanticMask3D,
    table: &SegmentTable,
    resolution: u32,
    exec: Exec,
) -> Result<MaterialBake> {
    if resolution < MIN_BAKE_RESOLUTION {
        return Err(Error::Range { what: "material map resolution", value: resolution as f64 });
    }
    let (ids, overlapping_texels) = texel_segments(mesh, mask, resolution, exec)?;
    let (roughness, metalness) = maps_from_texel_segments(&ids, table, resolution);
    Ok(MaterialBake { roughness, metalness, overlapping_texels })
}

/// Roughness and metalness maps from per-texel segment ids as returned by
/// [`texel_segments`]. Lets callers rebake after a table edit without
/// rasterizing again.
pub fn maps_from_texel_segments(ids: &[u32], table: &SegmentTable, resolution: u32) -> (TextureMap, TextureMap) {
    assert_eq!(ids.len(), (resolution as usize).pow(2));
    let mut rough = Vec::with_capacity(ids.len());
    let mut metal = Vec::with_capacity(ids.len());
    for &id in ids {
        let v = table.values(id);
        rough.push(v.roughness);
        metal.push(v.metalness);
    }
    let map = |data| TextureMap { width: resolution, height: resolution, channels: 1, data };
    (map(rough), map(metal))
}
