//! Sources of target normals for refinement.
//!
//! A file-backed oracle reads per-view normal images written by an external
//! estimator. A synthetic-reference oracle renders a detailed reference mesh
//! from the same cameras. Either way the target is blended with the current
//! render by a strength `t0` (0 keeps the render, 1 takes the oracle).

use std::path::{Path, PathBuf};

use image::GenericImageView;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::mask::{load_cameras, save_cameras};
use crate::mesh::TriMesh;
use crate::raster::{render_normal_view, RasterOptions};
use crate::texture::{decode_normal, encode_component, to_byte};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleSource {
    /// `view_{i}.png` normal images plus `cameras.json` in `dir`.
    Files { dir: PathBuf, cameras: Vec<Camera> },
    Reference(Box<TriMesh>),
    /// Synthetic-reference oracle whose mesh was not supplied.
    MissingReference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalOracle {
    pub source: OracleSource,
    /// Blend strength `t0` in `[0, 1]`.
    pub strength: f64,
}

impl NormalOracle {
    pub fn file_backed(dir: impl Into<PathBuf>, strength: f64) -> Result<Self> {
        let dir = dir.into();
        let cameras = load_cameras(&dir.join("cameras.json"))?;
        Self::checked(OracleSource::Files { dir, cameras }, strength)
    }

    pub fn synthetic_reference(reference: Option<TriMesh>, strength: f64) -> Result<Self> {
        let source = match reference {
            Some(m) => {
                m.validate()?;
                OracleSource::Reference(Box::new(m))
            }
            None => OracleSource::MissingReference,
        };
        Self::checked(source, strength)
    }

    fn checked(source: OracleSource, strength: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(Error::Range { what: "t0", value: strength });
        }
        Ok(NormalOracle { source, strength })
    }

    /// Cameras stored alongside a file-backed oracle.
    pub fn cameras(&self) -> Option<&[Camera]> {
        match &self.source {
            OracleSource::Files { cameras, .. } => Some(cameras),
            _ => None,
        }
    }

    /// Raw oracle normals for view `index` seen from `cam`. `None` where the
    /// oracle has no data.
    pub fn oracle_normals(&self, index: usize, cam: &Camera, exec: Exec) -> Result<Vec<Option<Vec3>>> {
        match &self.source {
            OracleSource::Reference(mesh) => {
                Ok(render_normal_view(mesh, cam, None, &RasterOptions { cull_backfaces: true, exec }))
            }
            OracleSource::MissingReference => Err(Error::ReferenceMeshAbsent),
            OracleSource::Files { dir, cameras } => {
                let expected = cameras.get(index).ok_or(Error::MissingTargetView(index))?;
                if (expected.width, expected.height) != (cam.width, cam.height) {
                    return Err(Error::invalid(format!(
                        "oracle view {index} is {}x{}, render is {}x{}",
                        expected.width, expected.height, cam.width, cam.height
                    )));
                }
                load_normal_image(&dir.join(format!("view_{index}.png")), index, cam.width, cam.height)
            }
        }
    }
}

/// Reads a normal image; transparent pixels (when an alpha channel is
/// present) are treated as missing.
fn load_normal_image(path: &Path, index: usize, width: u32, height: u32) -> Result<Vec<Option<Vec3>>> {
    if !path.exists() {
        return Err(Error::MissingTargetView(index));
    }
    let img = image::open(path).map_err(|e| Error::Image { path: path.into(), message: e.to_string() })?;
    if img.dimensions() != (width, height) {
        return Err(Error::invalid(format!("{}: expected {width}x{height}", path.display())));
    }
    let has_alpha = img.color().has_alpha();
    let rgba = img.to_rgba8();
    Ok(rgba
        .pixels()
        .map(|px| {
            if has_alpha && px[3] == 0 {
                return None;
            }
            let n = decode_normal(&[px[0] as f64 / 255.0, px[1] as f64 / 255.0, px[2] as f64 / 255.0]);
            let len = n.norm();
            (len > 1e-6).then(|| n / len)
        })
        .collect())
}

/// Writes normals as an RGBA image with zero alpha where `None`.
pub fn save_normal_image(path: &Path, normals: &[Option<Vec3>], width: u32, height: u32) -> Result<()> {
    let mut img = image::RgbaImage::new(width, height);
    for (px, n) in img.pixels_mut().zip(normals) {
        *px = match n {
            Some(n) => image::Rgba([
                to_byte(encode_component(n.x)),
                to_byte(encode_component(n.y)),
                to_byte(encode_component(n.z)),
                255,
            ]),
            None => image::Rgba([128, 128, 255, 0]),
        };
    }
    img.save(path).map_err(|e| Error::Image { path: path.into(), message: e.to_string() })
}

/// Writes a file-backed oracle directory from per-view normals.
pub fn save_oracle_dir(dir: &Path, cameras: &[Camera], views: &[Vec<Option<Vec3>>]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_cameras(&dir.join("cameras.json"), cameras)?;
    for (i, (cam, normals)) in cameras.iter().zip(views).enumerate() {
        save_normal_image(&dir.join(format!("view_{i}.png")), normals, cam.width, cam.height)?;
    }
    Ok(())
}

/// Spherical interpolation between unit vectors.
pub fn slerp(a: &Vec3, b: &Vec3, t: f64) -> Vec3 {
    if t <= 0.0 {
        return *a;
    }
    if t >= 1.0 {
        return *b;
    }
    let d = a.dot(b).clamp(-1.0, 1.0);
    let theta = d.acos();
    if theta < 1e-6 {
        return (a * (1.0 - t) + b * t).normalize();
    }
    if std::f64::consts::PI - theta < 1e-6 {
        // Antipodal: no unique arc, take the nearer endpoint.
        return if t < 0.5 { *a } else { *b };
    }
    let s = theta.sin();
    a * (((1.0 - t) * theta).sin() / s) + b * ((t * theta).sin() / s)
}

/// Per-pixel targets `slerp(current, oracle, t0)`. Pixels where either
/// side is missing have no target. The albedo render is accepted for
/// interface parity with learned oracles and is unused here.
pub fn oracle_targets(
    oracle: &NormalOracle,
    index: usize,
    cam: &Camera,
    current: &[Option<Vec3>],
    _albedo: &[[f64; 3]],
    exec: Exec,
) -> Result<Vec<Option<Vec3>>> {
    let raw = oracle.oracle_normals(index, cam, exec)?;
    Ok(blend_targets(current, &raw, oracle.strength))
}

pub fn blend_targets(current: &[Option<Vec3>], oracle: &[Option<Vec3>], t0: f64) -> Vec<Option<Vec3>> {
    current
        .iter()
        .zip(oracle)
        .map(|(c, o)| match (c, o) {
            (Some(c), Some(o)) => Some(slerp(c, o, t0)),
            _ => None,
        })
        .collect()
}
