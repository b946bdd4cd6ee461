//! Pieces shared by the command-line tool and the preview service, so both
//! produce identical images for identical inputs.

use std::str::FromStr;

use image::RgbImage;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::mask::SemanticMask3D;
use crate::mesh::TriMesh;
use crate::raster::{render_gbuffer, GBuffer, RasterOptions};
use crate::shading::{shade, shading_normal, LightRig, MaterialMaps, ShadeOptions};
use crate::texture::{encode_component, rgb_image, TextureMap};

/// Rendering works on a copy of the mesh centered on its bounding box, so
/// orbit cameras aimed at the origin frame it.
pub fn prepare_mesh(mesh: &TriMesh) -> TriMesh {
    mesh.centered()
}

/// Orthographic half-height that frames a centered mesh with a margin.
pub fn fit_ortho_scale(mesh: &TriMesh) -> f64 {
    (mesh.radius() * 1.1).max(1e-3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    Relight,
    Albedo,
    Normal,
    Segments,
}

impl FromStr for RenderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relight" => Ok(RenderMode::Relight),
            "albedo" => Ok(RenderMode::Albedo),
            "normal" => Ok(RenderMode::Normal),
            "segments" => Ok(RenderMode::Segments),
            _ => Err(Error::invalid(format!(
                "unknown mode {s:?} (expected relight, albedo, normal or segments)"
            ))),
        }
    }
}

/// Everything needed to render a material preview. Maps are used exactly as
/// given; callers that want file parity pass 8-bit quantized maps.
#[derive(Debug, Clone, Copy)]
pub struct Scene<'a> {
    pub mesh: &'a TriMesh,
    pub albedo: &'a TextureMap,
    pub roughness: &'a TextureMap,
    pub metalness: &'a TextureMap,
    pub normal: Option<&'a TextureMap>,
    pub mask: Option<&'a SemanticMask3D>,
}

impl Scene<'_> {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, map: &TextureMap, channels: u32| {
            if map.channels != channels {
                Err(Error::invalid(format!(
                    "{name} map has {} channel(s), expected {channels}",
                    map.channels
                )))
            } else {
                Ok(())
            }
        };
        check("albedo", self.albedo, 3)?;
        check("roughness", self.roughness, 1)?;
        check("metalness", self.metalness, 1)?;
        if let Some(n) = self.normal {
            check("normal", n, 3)?;
        }
        if (self.roughness.width, self.roughness.height) != (self.metalness.width, self.metalness.height) {
            return Err(Error::invalid("roughness and metalness maps differ in size"));
        }
        if let Some(mask) = self.mask {
            if mask.segments.len() != self.mesh.triangles.len() {
                return Err(Error::invalid("mask does not match mesh triangle count"));
            }
        }
        Ok(())
    }
}

/// Sixteen distinct colors for segment previews, indexed by `id % 16`.
pub const PALETTE: [[u8; 3]; 16] = [
    [230, 25, 75], [60, 180, 75], [255, 225, 25], [0, 130, 200],
    [245, 130, 48], [145, 30, 180], [70, 240, 240], [240, 50, 230],
    [210, 245, 60], [250, 190, 212], [0, 128, 128], [220, 190, 255],
    [170, 110, 40], [255, 250, 200], [128, 0, 0], [170, 255, 195],
];

pub fn palette_color(id: u32) -> [u8; 3] {
    PALETTE[(id % 16) as usize]
}

fn gbuffer(scene: &Scene<'_>, cam: &Camera, exec: Exec) -> GBuffer {
    render_gbuffer(scene.mesh, cam, scene.albedo, &RasterOptions { cull_backfaces: true, exec })
}

/// Renders one preview image. Background pixels are black.
pub fn render_image(scene: &Scene<'_>, mode: RenderMode, cam: &Camera, rig: &LightRig, exec: Exec) -> Result<RgbImage> {
    cam.validate()?;
    scene.validate()?;
    let g = gbuffer(scene, cam, exec);
    let (w, h) = (cam.width, cam.height);
    Ok(match mode {
        RenderMode::Relight => {
            rig.validate()?;
            let maps = MaterialMaps { roughness: scene.roughness, metalness: scene.metalness, normal: scene.normal };
            let px = shade(&g, maps, rig, &ShadeOptions { exec, ..Default::default() });
            rgb_image(w, h, &px)
        }
        RenderMode::Albedo => {
            let px: Vec<[f64; 3]> =
                (0..g.len()).map(|i| if g.covered(i) { g.albedo[i] } else { [0.0; 3] }).collect();
            rgb_image(w, h, &px)
        }
        RenderMode::Normal => {
            let px: Vec<[f64; 3]> = exec.map(g.len(), |i| {
                if g.covered(i) {
                    let n = shading_normal(&g, i, scene.normal);
                    [encode_component(n.x), encode_component(n.y), encode_component(n.z)]
                } else {
                    [0.0; 3]
                }
            });
            rgb_image(w, h, &px)
        }
        RenderMode::Segments => {
            let mask = scene.mask.ok_or_else(|| Error::invalid("segments mode needs a mask"))?;
            let mut img = RgbImage::new(w, h);
            for (i, px) in img.pixels_mut().enumerate() {
                if g.covered(i) {
                    px.0 = palette_color(mask.segments[g.face_id[i] as usize]);
                }
            }
            img
        }
    })
}

pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png).expect("in-memory PNG encoding");
    buf.into_inner()
}

/// Relit PNG bytes; the single code path behind both `relight` and the
/// service's relight mode.
pub fn relight_png(scene: &Scene<'_>, cam: &Camera, rig: &LightRig, exec: Exec) -> Result<Vec<u8>> {
    render_image(scene, RenderMode::Relight, cam, rig, exec).map(|img| encode_png(&img))
}
