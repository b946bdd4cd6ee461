//! Cook-Torrance GGX metallic-roughness relighting of G-buffers.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::raster::GBuffer;
use crate::texture::{decode_normal, TextureMap};
use crate::Vec3;

/// Reflectance of dielectrics at normal incidence.
pub const DIELECTRIC_F0: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalLight {
    /// Unit direction from the surface toward the light.
    #[serde(rename = "dir")]
    pub direction: [f64; 3],
    #[serde(rename = "rgb")]
    pub radiance: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightRig {
    #[serde(default)]
    pub directionals: Vec<DirectionalLight>,
    #[serde(default)]
    pub ambient: [f64; 3],
}

impl LightRig {
    pub fn validate(&self) -> Result<()> {
        let non_neg = |c: &[f64; 3]| c.iter().all(|v| *v >= 0.0 && v.is_finite());
        if !non_neg(&self.ambient) {
            return Err(Error::invalid("ambient radiance must be finite and non-negative"));
        }
        for (i, l) in self.directionals.iter().enumerate() {
            let d = Vec3::from(l.direction);
            if (d.norm() - 1.0).abs() > 1e-4 {
                return Err(Error::invalid(format!("light {i} direction is not unit length")));
            }
            if !non_neg(&l.radiance) {
                return Err(Error::invalid(format!("light {i} radiance must be non-negative")));
            }
        }
        let lit = self.ambient.iter().any(|&v| v > 0.0)
            || self.directionals.iter().any(|l| l.radiance.iter().any(|&v| v > 0.0));
        if !lit {
            return Err(Error::invalid("light rig has no positive radiance"));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let rig: LightRig = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        rig.validate()?;
        Ok(rig)
    }

    /// Key light from the upper front-right plus soft ambient fill.
    pub fn studio() -> Self {
        LightRig {
            directionals: vec![
                DirectionalLight {
                    direction: Vec3::new(0.5, 0.6, 0.8).normalize().into(),
                    radiance: [2.5, 2.45, 2.4],
                },
                DirectionalLight {
                    direction: Vec3::new(-0.7, 0.2, -0.4).normalize().into(),
                    radiance: [0.6, 0.65, 0.8],
                },
            ],
            ambient: [0.08, 0.08, 0.09],
        }
    }

    /// Names accepted by [`LightRig::preset`].
    pub const PRESETS: [&'static str; 4] = ["studio", "sun", "rim", "ambient"];

    /// Built-in rigs for quick previews.
    pub fn preset(name: &str) -> Option<Self> {
        let light = |d: Vec3, rgb: [f64; 3]| DirectionalLight { direction: d.normalize().into(), radiance: rgb };
        Some(match name {
            "studio" => Self::studio(),
            "sun" => LightRig {
                directionals: vec![light(Vec3::new(0.3, 0.9, 0.3), [3.0, 2.9, 2.7])],
                ambient: [0.05, 0.06, 0.08],
            },
            "rim" => LightRig {
                directionals: vec![
                    light(Vec3::new(-0.6, 0.3, -0.75), [3.0, 3.0, 3.0]),
                    light(Vec3::new(0.6, 0.3, -0.75), [3.0, 3.0, 3.0]),
                ],
                ambient: [0.03, 0.03, 0.03],
            },
            "ambient" => LightRig { directionals: vec![], ambient: [1.0, 1.0, 1.0] },
            _ => return None,
        })
    }
}

/// GGX normal distribution with `alpha = roughness²`.
#[inline]
pub fn ggx_d(n_dot_h: f64, alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    let c = n_dot_h * n_dot_h * (a2 - 1.0) + 1.0;
    a2 / (PI * c * c)
}

/// Height-correlated Smith visibility `G / (4 (n·l)(n·v))`.
#[inline]
pub fn smith_visibility(n_dot_l: f64, n_dot_v: f64, alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    let gv = n_dot_l * (n_dot_v * n_dot_v * (1.0 - a2) + a2).sqrt();
    let gl = n_dot_v * (n_dot_l * n_dot_l * (1.0 - a2) + a2).sqrt();
    let denom = gv + gl;
    if denom > 0.0 {
        0.5 / denom
    } else {
        0.0
    }
}

/// Height-correlated Smith masking-shadowing term `G`.
#[inline]
pub fn smith_g(n_dot_l: f64, n_dot_v: f64, alpha: f64) -> f64 {
    smith_visibility(n_dot_l, n_dot_v, alpha) * 4.0 * n_dot_l * n_dot_v
}

#[inline]
pub fn schlick_fresnel(f0: [f64; 3], v_dot_h: f64) -> [f64; 3] {
    let k = (1.0 - v_dot_h.clamp(0.0, 1.0)).powi(5);
    f0.map(|f| f + (1.0 - f) * k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrdfTerms {
    pub diffuse: [f64; 3],
    pub specular: [f64; 3],
}

/// BRDF value (without the cosine factor) for one light direction.
pub fn brdf(albedo: [f64; 3], roughness: f64, metalness: f64, n: &Vec3, v: &Vec3, l: &Vec3) -> BrdfTerms {
    let m = metalness.clamp(0.0, 1.0);
    let alpha = roughness.clamp(0.0, 1.0).powi(2).max(1e-4);
    let diffuse = albedo.map(|a| a / PI * (1.0 - m));
    let n_dot_l = n.dot(l);
    let n_dot_v = n.dot(v);
    if n_dot_l <= 0.0 || n_dot_v <= 0.0 {
        return BrdfTerms { diffuse, specular: [0.0; 3] };
    }
    let h = (v + l).normalize();
    let f0 = albedo.map(|a| DIELECTRIC_F0 * (1.0 - m) + a * m);
    let d = ggx_d(n.dot(&h).max(0.0), alpha);
    let vis = smith_visibility(n_dot_l, n_dot_v, alpha);
    let f = schlick_fresnel(f0, v.dot(&h));
    BrdfTerms {
        diffuse,
        specular: f.map(|fi| d * vis * fi),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadeOptions {
    pub specular: bool,
    pub background: [f64; 3],
    pub exec: Exec,
}

impl Default for ShadeOptions {
    fn default() -> Self {
        ShadeOptions {
            specular: true,
            background: [0.0; 3],
            exec: Exec::default(),
        }
    }
}

/// Material inputs for [`shade`]. `normal_uv` is an optional tangent-space
/// normal map applied on top of the G-buffer normals.
#[derive(Debug, Clone, Copy)]
pub struct MaterialMaps<'a> {
    pub roughness: &'a TextureMap,
    pub metalness: &'a TextureMap,
    pub normal: Option<&'a TextureMap>,
}

/// Shading normal at pixel `i`, perturbed by the tangent-space map if given.
pub fn shading_normal(g: &GBuffer, i: usize, normal_uv: Option<&TextureMap>) -> Vec3 {
    match normal_uv {
        None => g.normal[i],
        Some(map) => {
            let s = map.sample_bilinear(&g.uv[i]);
            let nb = decode_normal(&s);
            let (t, b, n) = g.frame(i);
            let w = t * nb.x + b * nb.y + n * nb.z;
            let len = w.norm();
            if len > 1e-12 {
                w / len
            } else {
                n
            }
        }
    }
}

/// Relights every covered pixel; uncovered pixels get the background color.
/// Output is clamped to [0, 1].
pub fn shade(g: &GBuffer, maps: MaterialMaps<'_>, rig: &LightRig, opts: &ShadeOptions) -> Vec<[f64; 3]> {
    let vp = g.camera.matrices();
    // Canonical light order makes the sum independent of rig order.
    let mut lights = rig.directionals.clone();
    lights.sort_by(|a, b| {
        let key = |l: &DirectionalLight| [l.direction, l.radiance].concat();
        key(a)
            .iter()
            .zip(key(b).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    opts.exec.map(g.len(), |i| {
        if !g.covered(i) {
            return opts.background;
        }
        let n = shading_normal(g, i, maps.normal);
        let v = vp.to_viewer(&g.position[i]);
        let uv = &g.uv[i];
        let roughness = maps.roughness.sample_bilinear(uv)[0];
        let metalness = maps.metalness.sample_bilinear(uv)[0];
        let albedo = g.albedo[i];
        let mut out = [0.0; 3];
        for (o, (a, amb)) in out.iter_mut().zip(albedo.iter().zip(&rig.ambient)) {
            *o = a * amb;
        }
        for light in &lights {
            let l = Vec3::from(light.direction);
            let cos = n.dot(&l);
            if cos <= 0.0 {
                continue;
            }
            let t = brdf(albedo, roughness, metalness, &n, &v, &l);
            for k in 0..3 {
                let spec = if opts.specular { t.specular[k] } else { 0.0 };
                out[k] += (t.diffuse[k] + spec) * light.radiance[k] * cos;
            }
        }
        out.map(|c| c.clamp(0.0, 1.0))
    })
}

/// Integral of `D(h) (n·h)` over the hemisphere by midpoint quadrature on a
/// 256 x 1024 (polar x azimuth) grid. The polar samples are graded
/// quadratically toward the pole so sharp lobes stay resolved. Equals 1 for a
/// correctly normalized distribution.
pub fn validate_brdf_normalization(roughness: f64) -> Result<f64> {
    const N_THETA: usize = 256;
    const N_PHI: usize = 1024;
    let alpha = roughness.powi(2);
    let d_phi = 2.0 * PI / N_PHI as f64;
    let mut total = 0.0;
    for i in 0..N_THETA {
        // theta = (pi/2) s², ds uniform.
        let s = (i as f64 + 0.5) / N_THETA as f64;
        let theta = PI / 2.0 * s * s;
        let d_theta = PI * s / N_THETA as f64;
        let (sin_t, cos_t) = theta.sin_cos();
        let ring = ggx_d(cos_t, alpha) * cos_t * sin_t * d_theta;
        // D is isotropic, but the azimuthal sum is kept explicit.
        total += (0..N_PHI).map(|_| ring * d_phi).sum::<f64>();
    }
    if !total.is_finite() {
        return Err(Error::QuadratureDiverged { roughness });
    }
    Ok(total)
}
