//! Bakes a bump field into a tangent-space normal texture.

use super::bump::{bump_from_raw, BumpField, Workspace};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::mesh::TriMesh;
use crate::raster::EMPTY;
use crate::texture::{encode_component, TextureMap};
use crate::uvraster::{fill_from_nearest, nearest_covered, rasterize_uv};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalBake {
    pub map: TextureMap,
    /// Texels claimed by more than one triangle (lower index kept).
    pub overlapping_texels: usize,
}

/// Tangent-space normal of the refined surface at barycentric `bary` of
/// face `f`.
///
/// The texel frame is the one `n_f` was integrated in, so expressing `n_f`
/// in it gives back the bump vector. It is returned directly, which keeps
/// components that are exactly zero from drifting across a rounding
/// boundary of the 8-bit encoding.
pub fn tangent_space_normal(mesh: &TriMesh, field: &BumpField, f: usize, bary: [f64; 3], ws: &mut Workspace) -> Vec3 {
    let ps = mesh.corners(f);
    let p = ps[0] * bary[0] + ps[1] * bary[1] + ps[2] * bary[2];
    bump_from_raw(&field.raw(&p, ws))
}

pub fn bake_normal_uv(mesh: &TriMesh, field: &BumpField, resolution: u32, exec: Exec) -> Result<NormalBake> {
    if resolution < 16 {
        return Err(Error::Range { what: "normal map resolution", value: resolution as f64 });
    }
    let cov = rasterize_uv(mesh, resolution, resolution, exec);
    let nearest = nearest_covered(&cov.owner.iter().map(|&o| o != EMPTY).collect::<Vec<_>>(), resolution, resolution)
        .ok_or_else(|| Error::invalid("mesh UVs cover no texel"))?;
    let w = resolution as usize;
    let rows = exec.map(resolution as usize, |y| {
        let mut ws = Workspace::default();
        let mut row = vec![0.0; w * 3];
        for x in 0..w {
            let i = y * w + x;
            let n = if cov.owner[i] == EMPTY {
                Vec3::z()
            } else {
                tangent_space_normal(mesh, field, cov.owner[i] as usize, cov.bary[i], &mut ws)
            };
            for c in 0..3 {
                row[x * 3 + c] = encode_component(n[c]);
            }
        }
        row
    });
    let mut data: Vec<f64> = rows.into_iter().flatten().collect();
    fill_from_nearest(&mut data, 3, &nearest);
    let overlapping_texels = {
        let mut t: Vec<u32> = cov.contested.iter().map(|&(t, _)| t).collect();
        t.sort_unstable();
        t.dedup();
        t.len()
    };
    Ok(NormalBake {
        map: TextureMap { width: resolution, height: resolution, channels: 3, data },
        overlapping_texels,
    })
}
