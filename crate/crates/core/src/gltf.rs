//! glTF 2.0 export with the metallic-roughness material model, and a
//! structural self-check for the files it writes.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::material::SegmentTable;
use crate::mesh::{tangent_frame, TriMesh};
use crate::texture::{to_byte, TextureMap};
use crate::Vec3;

const ARRAY_BUFFER: u32 = 34962;
const ELEMENT_ARRAY_BUFFER: u32 = 34963;
const FLOAT: u32 = 5126;
const UNSIGNED_INT: u32 = 5125;

pub struct ExportInputs<'a> {
    pub mesh: &'a TriMesh,
    pub albedo: &'a TextureMap,
    pub roughness: &'a TextureMap,
    pub metalness: &'a TextureMap,
    pub normal: Option<&'a TextureMap>,
    pub table: &'a SegmentTable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportPaths {
    pub gltf: PathBuf,
    pub buffer: PathBuf,
    pub albedo: PathBuf,
    pub metallic_roughness: PathBuf,
    pub normal: Option<PathBuf>,
    pub materials: PathBuf,
}

impl ExportPaths {
    pub fn all(&self) -> Vec<&PathBuf> {
        let mut v = vec![&self.gltf, &self.buffer, &self.albedo, &self.metallic_roughness];
        v.extend(self.normal.as_ref());
        v.push(&self.materials);
        v
    }
}

/// Packs roughness into G and metalness into B, R = 0.
pub fn pack_metallic_roughness(roughness: &TextureMap, metalness: &TextureMap) -> Result<image::RgbImage> {
    if roughness.channels != 1 || metalness.channels != 1 {
        return Err(Error::invalid("roughness and metalness maps must be single-channel"));
    }
    if (roughness.width, roughness.height) != (metalness.width, metalness.height) {
        return Err(Error::invalid(format!(
            "roughness is {}x{} but metalness is {}x{}",
            roughness.width, roughness.height, metalness.width, metalness.height
        )));
    }
    let mut img = image::RgbImage::new(roughness.width, roughness.height);
    for (i, px) in img.pixels_mut().enumerate() {
        *px = image::Rgb([0, to_byte(roughness.data[i]), to_byte(metalness.data[i])]);
    }
    Ok(img)
}

struct Vertices {
    positions: Vec<[f32; 3]>,
    normals: Vec<[f32; 3]>,
    uvs: Vec<[f32; 2]>,
    tangents: Vec<[f32; 4]>,
    indices: Vec<u32>,
}

/// One glTF vertex per distinct (position, uv, normal) corner.
fn deindex(mesh: &TriMesh) -> Vertices {
    let mut map: HashMap<(u32, u32, u32), u32> = HashMap::new();
    let mut v = Vertices { positions: vec![], normals: vec![], uvs: vec![], tangents: vec![], indices: vec![] };
    for (f, tri) in mesh.triangles.iter().enumerate() {
        let face_t = mesh.face_tangent(f);
        for k in 0..3 {
            let key = (tri.p[k], tri.t[k], tri.n[k]);
            let idx = *map.entry(key).or_insert_with(|| {
                let p = mesh.positions[key.0 as usize];
                let uv = mesh.uvs[key.1 as usize];
                let n = mesh.normals[key.2 as usize];
                let (t, _) = tangent_frame(&n, face_t.as_ref());
                v.positions.push([p.x as f32, p.y as f32, p.z as f32]);
                v.normals.push([n.x as f32, n.y as f32, n.z as f32]);
                v.uvs.push([uv.x as f32, (1.0 - uv.y) as f32]);
                v.tangents.push([t.x as f32, t.y as f32, t.z as f32, 1.0]);
                v.positions.len() as u32 - 1
            });
            v.indices.push(idx);
        }
    }
    v
}

fn write_err(path: &Path) -> impl Fn(image::ImageError) -> Error + '_ {
    move |e| Error::Image { path: path.into(), message: e.to_string() }
}

pub fn export_gltf(dir: &Path, inputs: &ExportInputs<'_>) -> Result<ExportPaths> {
    inputs.mesh.validate()?;
    let mr = pack_metallic_roughness(inputs.roughness, inputs.metalness)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = ExportPaths {
        gltf: dir.join("model.gltf"),
        buffer: dir.join("model.bin"),
        albedo: dir.join("albedo.png"),
        metallic_roughness: dir.join("metallicRoughness.png"),
        normal: inputs.normal.map(|_| dir.join("normal.png")),
        materials: dir.join("materials.json"),
    };

    let v = deindex(inputs.mesh);
    let mut bin: Vec<u8> = Vec::new();
    let mut views = Vec::new();
    let mut push_view = |bin: &mut Vec<u8>, bytes: Vec<u8>, target: u32| {
        while !bin.len().is_multiple_of(4) {
            bin.push(0);
        }
        views.push(json!({"buffer": 0, "byteOffset": bin.len(), "byteLength": bytes.len(), "target": target}));
        bin.extend(bytes);
        views.len() - 1
    };
    let f32s = |it: &mut dyn Iterator<Item = f32>| it.flat_map(f32::to_le_bytes).collect::<Vec<u8>>();
    let pos_view = push_view(&mut bin, f32s(&mut v.positions.iter().flatten().copied()), ARRAY_BUFFER);
    let nrm_view = push_view(&mut bin, f32s(&mut v.normals.iter().flatten().copied()), ARRAY_BUFFER);
    let uv_view = push_view(&mut bin, f32s(&mut v.uvs.iter().flatten().copied()), ARRAY_BUFFER);
    let tan_view = push_view(&mut bin, f32s(&mut v.tangents.iter().flatten().copied()), ARRAY_BUFFER);
    let idx_view = push_view(
        &mut bin,
        v.indices.iter().flat_map(|i| i.to_le_bytes()).collect(),
        ELEMENT_ARRAY_BUFFER,
    );

    let mut min = [f32::INFINITY; 3];
    let mut max = [f32::NEG_INFINITY; 3];
    for p in &v.positions {
        for a in 0..3 {
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a]);
        }
    }
    let n = v.positions.len();
    let accessors = json!([
        {"bufferView": pos_view, "componentType": FLOAT, "count": n, "type": "VEC3", "min": min, "max": max},
        {"bufferView": nrm_view, "componentType": FLOAT, "count": n, "type": "VEC3"},
        {"bufferView": uv_view, "componentType": FLOAT, "count": n, "type": "VEC2"},
        {"bufferView": tan_view, "componentType": FLOAT, "count": n, "type": "VEC4"},
        {"bufferView": idx_view, "componentType": UNSIGNED_INT, "count": v.indices.len(), "type": "SCALAR"},
    ]);

    let mut images = vec![json!({"uri": "albedo.png"}), json!({"uri": "metallicRoughness.png"})];
    let mut material = json!({
        "name": "boosted",
        "pbrMetallicRoughness": {
            "baseColorTexture": {"index": 0},
            "metallicRoughnessTexture": {"index": 1},
            "metallicFactor": 1.0,
            "roughnessFactor": 1.0
        }
    });
    if inputs.normal.is_some() {
        images.push(json!({"uri": "normal.png"}));
        material["normalTexture"] = json!({"index": 2});
    }
    let textures: Vec<Value> = (0..images.len()).map(|i| json!({"sampler": 0, "source": i})).collect();
    let doc = json!({
        "asset": {"version": "2.0", "generator": "pbrboost"},
        "scene": 0,
        "scenes": [{"nodes": [0]}],
        "nodes": [{"mesh": 0}],
        "meshes": [{"primitives": [{
            "attributes": {"POSITION": 0, "NORMAL": 1, "TEXCOORD_0": 2, "TANGENT": 3},
            "indices": 4,
            "material": 0
        }]}],
        "materials": [material],
        "textures": textures,
        "images": images,
        "samplers": [{"magFilter": 9729, "minFilter": 9729, "wrapS": 10497, "wrapT": 10497}],
        "buffers": [{"uri": "model.bin", "byteLength": bin.len()}],
        "bufferViews": views,
        "accessors": accessors,
    });

    fs::write(&paths.buffer, &bin).map_err(|e| Error::io(&paths.buffer, e))?;
    let text = serde_json::to_string_pretty(&doc).expect("gltf serializes");
    fs::write(&paths.gltf, text).map_err(|e| Error::io(&paths.gltf, e))?;
    inputs.albedo.save_png(&paths.albedo)?;
    mr.save(&paths.metallic_roughness).map_err(write_err(&paths.metallic_roughness))?;
    if let (Some(map), Some(path)) = (inputs.normal, &paths.normal) {
        map.save_png(path)?;
    }
    inputs.table.save(&paths.materials)?;
    Ok(paths)
}

/// Geometry read back from an exported file.
#[derive(Debug, Clone, PartialEq)]
pub struct GltfSummary {
    pub positions: Vec<Vec3>,
    pub indices: Vec<u32>,
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), message: message.into() }
}

fn read_accessor(doc: &Value, bin: &[u8], i: usize, comps: usize) -> Result<Vec<[u8; 4]>> {
    let at = format!("accessors[{i}]");
    let acc = &doc["accessors"][i];
    let count = acc["count"].as_u64().ok_or_else(|| schema(&at, "missing count"))? as usize;
    let view_i = acc["bufferView"].as_u64().ok_or_else(|| schema(&at, "missing bufferView"))? as usize;
    let view = &doc["bufferViews"][view_i];
    let offset = view["byteOffset"].as_u64().unwrap_or(0) as usize + acc["byteOffset"].as_u64().unwrap_or(0) as usize;
    let len = view["byteLength"].as_u64().ok_or_else(|| schema(&at, "bufferView has no byteLength"))? as usize;
    let need = count * comps * 4;
    if need > len || offset + need > bin.len() {
        return Err(schema(&at, format!("needs {need} bytes at {offset}, view has {len}, buffer {}", bin.len())));
    }
    Ok(bin[offset..offset + need].chunks(4).map(|c| [c[0], c[1], c[2], c[3]]).collect())
}

/// Checks buffer sizes, accessor ranges, index bounds and position bounds.
pub fn validate_gltf(path: &Path) -> Result<GltfSummary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| schema("", e.to_string()))?;
    if doc["asset"]["version"] != "2.0" {
        return Err(schema("asset.version", "expected \"2.0\""));
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let uri = doc["buffers"][0]["uri"].as_str().ok_or_else(|| schema("buffers[0].uri", "missing"))?;
    let bin_path = dir.join(uri);
    let bin = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    if doc["buffers"][0]["byteLength"].as_u64() != Some(bin.len() as u64) {
        return Err(schema("buffers[0].byteLength", "does not match file size"));
    }
    let prim = &doc["meshes"][0]["primitives"][0];
    let attr = |name: &str| prim["attributes"][name].as_u64().map(|v| v as usize);
    let pos_i = attr("POSITION").ok_or_else(|| schema("meshes[0].primitives[0].attributes", "no POSITION"))?;
    let raw = read_accessor(&doc, &bin, pos_i, 3)?;
    let floats: Vec<f32> = raw.iter().map(|b| f32::from_le_bytes(*b)).collect();
    let positions: Vec<Vec3> = floats.chunks(3).map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64)).collect();
    let acc = &doc["accessors"][pos_i];
    for a in 0..3 {
        let lo = floats.chunks(3).map(|c| c[a]).fold(f32::INFINITY, f32::min);
        let hi = floats.chunks(3).map(|c| c[a]).fold(f32::NEG_INFINITY, f32::max);
        if acc["min"][a].as_f64() != Some(lo as f64) || acc["max"][a].as_f64() != Some(hi as f64) {
            return Err(schema(&format!("accessors[{pos_i}]"), "min/max do not match data"));
        }
    }
    for (name, comps) in [("NORMAL", 3), ("TEXCOORD_0", 2), ("TANGENT", 4)] {
        if let Some(i) = attr(name) {
            let data = read_accessor(&doc, &bin, i, comps)?;
            if data.len() != positions.len() * comps {
                return Err(schema(&format!("accessors[{i}]"), format!("{name} count differs from POSITION")));
            }
        }
    }
    let idx_i = prim["indices"].as_u64().ok_or_else(|| schema("meshes[0].primitives[0].indices", "missing"))? as usize;
    let indices: Vec<u32> = read_accessor(&doc, &bin, idx_i, 1)?.into_iter().map(u32::from_le_bytes).collect();
    if !indices.len().is_multiple_of(3) {
        return Err(schema(&format!("accessors[{idx_i}]"), "index count is not a multiple of 3"));
    }
    if let Some(bad) = indices.iter().find(|&&i| i as usize >= positions.len()) {
        return Err(schema(&format!("accessors[{idx_i}]"), format!("index {bad} out of range")));
    }
    for (i, img) in doc["images"].as_array().into_iter().flatten().enumerate() {
        let uri = img["uri"].as_str().ok_or_else(|| schema(&format!("images[{i}].uri"), "missing"))?;
        if !dir.join(uri).exists() {
            return Err(schema(&format!("images[{i}].uri"), format!("{uri} does not exist")));
        }
    }
    Ok(GltfSummary { positions, indices })
}
