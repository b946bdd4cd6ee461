//! Wavefront OBJ reading and writing (`v`, `vt`, `vn`, `f` records only).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{TriMesh, Triangle};
use crate::{Vec2, Vec3};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text)
}

pub fn save_mesh(path: impl AsRef<Path>, mesh: &TriMesh) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_obj(mesh)).map_err(|e| Error::io(path, e))
}

fn wrap_unit(x: f64) -> f64 {
    if (0.0..=1.0).contains(&x) {
        x
    } else {
        x - x.floor()
    }
}

fn parse_floats<const N: usize>(line: usize, fields: &[&str]) -> Result<[f64; N]> {
    if fields.len() < N {
        return Err(Error::Parse {
            line,
            message: format!("expected {N} numbers, found {}", fields.len()),
        });
    }
    let mut out = [0.0; N];
    for (o, f) in out.iter_mut().zip(fields) {
        *o = f.parse::<f64>().map_err(|_| Error::Parse {
            line,
            message: format!("invalid number {f:?}"),
        })?;
        if !o.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite number {f:?}"),
            });
        }
    }
    Ok(out)
}

/// Resolves a 1-based (or negative, relative) OBJ index against `count`
/// records seen so far.
fn resolve_index(line: usize, raw: &str, count: usize) -> Result<u32> {
    let v: i64 = raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid index {raw:?}"),
    })?;
    let idx = match v {
        0 => {
            return Err(Error::Parse {
                line,
                message: "index 0 is invalid (OBJ indices are 1-based)".into(),
            })
        }
        v if v > 0 => v - 1,
        v => count as i64 + v,
    };
    if idx < 0 || idx as usize >= count {
        return Err(Error::Parse {
            line,
            message: format!("index {raw} out of range ({count} records)"),
        });
    }
    Ok(idx as u32)
}

/// Position, uv and normal index of one face corner.
type Corner = (u32, Option<u32>, Option<u32>);

pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut positions = Vec::new();
    let mut uvs = Vec::new();
    let mut normals = Vec::new();
    let mut faces: Vec<[Corner; 3]> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut fields = content.split_whitespace();
        let Some(tag) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        match tag {
            "v" => {
                let [x, y, z] = parse_floats::<3>(line, &rest)?;
                positions.push(Vec3::new(x, y, z));
            }
            "vt" => {
                let [u, v] = parse_floats::<2>(line, &rest)?;
                uvs.push(Vec2::new(wrap_unit(u), wrap_unit(v)));
            }
            "vn" => {
                let [x, y, z] = parse_floats::<3>(line, &rest)?;
                let n = Vec3::new(x, y, z);
                let len = n.norm();
                if len < 1e-12 {
                    return Err(Error::Parse {
                        line,
                        message: "zero-length normal".into(),
                    });
                }
                normals.push(n / len);
            }
            "f" => {
                if rest.len() != 3 {
                    return Err(Error::Parse {
                        line,
                        message: format!("only triangles are supported, face has {} corners", rest.len()),
                    });
                }
                let mut corners = [(0u32, None, None); 3];
                for (c, spec) in corners.iter_mut().zip(&rest) {
                    let mut parts = spec.split('/');
                    let p = resolve_index(line, parts.next().unwrap_or(""), positions.len())?;
                    let t = match parts.next() {
                        Some(s) if !s.is_empty() => Some(resolve_index(line, s, uvs.len())?),
                        _ => None,
                    };
                    let n = match parts.next() {
                        Some(s) if !s.is_empty() => Some(resolve_index(line, s, normals.len())?),
                        _ => None,
                    };
                    *c = (p, t, n);
                }
                faces.push(corners);
            }
            // Groups, objects, materials and smoothing groups carry no geometry.
            "g" | "o" | "s" | "mtllib" | "usemtl" | "l" | "vp" => {}
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unsupported record {other:?}"),
                })
            }
        }
    }

    if uvs.is_empty() || faces.iter().flatten().any(|c| c.1.is_none()) {
        return Err(Error::MissingUVs);
    }
    let has_normals = !normals.is_empty() && faces.iter().flatten().all(|c| c.2.is_some());
    let triangles = faces
        .iter()
        .map(|c| Triangle {
            p: c.map(|x| x.0),
            t: c.map(|x| x.1.unwrap_or(0)),
            n: c.map(|x| x.2.unwrap_or(0)),
        })
        .collect();
    let mut mesh = TriMesh {
        positions,
        uvs,
        normals,
        triangles,
        face_segments: None,
    };
    if !has_normals {
        mesh.recompute_normals();
    }
    Ok(mesh)
}

/// Serializes with round-trip float formatting so a reload is lossless.
pub fn write_obj(mesh: &TriMesh) -> String {
    let mut s = String::new();
    for p in &mesh.positions {
        let _ = writeln!(s, "v {:?} {:?} {:?}", p.x, p.y, p.z);
    }
    for t in &mesh.uvs {
        let _ = writeln!(s, "vt {:?} {:?}", t.x, t.y);
    }
    for n in &mesh.normals {
        let _ = writeln!(s, "vn {:?} {:?} {:?}", n.x, n.y, n.z);
    }
    for tri in &mesh.triangles {
        s.push('f');
        for k in 0..3 {
            let _ = write!(s, " {}/{}/{}", tri.p[k] + 1, tri.t[k] + 1, tri.n[k] + 1);
        }
        s.push('\n');
    }
    s
}
