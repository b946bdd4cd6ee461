//! Iterative normal refinement.
//!
//! A bump field `n_b(θ)` perturbs the interpolated mesh normal `n_o` in its
//! tangent frame, giving `n_f = n_o ⊕ n_b`. Each round renders `n_f` in
//! every view, asks the oracle for targets, then runs Adam on the mean
//! squared distance between `n_f` and the targets over covered pixels.

pub mod adam;
pub mod bake;
pub mod bump;
pub mod hashgrid;
pub mod mlp;
pub mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::mesh::TriMesh;
use crate::raster::{normals_from_gbuffer, render_gbuffer, GBuffer, RasterOptions};
use crate::texture::TextureMap;
use crate::Vec3;

use adam::Adam;
use bump::{BumpConfig, BumpField, Workspace};
use oracle::{blend_targets, NormalOracle};

pub use bake::{bake_normal_uv, NormalBake};

/// `normalize(bump.x * t + bump.y * b + bump.z * n_o)`.
pub fn integrate_normal(n_o: &Vec3, bump: &Vec3, t: &Vec3, b: &Vec3) -> Vec3 {
    (t * bump.x + b * bump.y + n_o * bump.z).normalize()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    pub bump: BumpConfig,
    pub lr_tables: f64,
    pub lr_network: f64,
    pub rounds: usize,
    pub steps_per_round: usize,
    /// Pixels sampled per step; 0 uses every pixel.
    pub batch_size: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            bump: BumpConfig::default(),
            lr_tables: 1e-2,
            lr_network: 1e-3,
            rounds: 3,
            steps_per_round: 400,
            batch_size: 4096,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

/// Eight views at 45° azimuth steps, elevations alternating 0° and 30°.
pub fn default_views(size: u32, ortho_scale: f64) -> Vec<Camera> {
    (0..8)
        .map(|i| Camera::orthographic(45.0 * i as f64, if i % 2 == 0 { 0.0 } else { 30.0 }, ortho_scale, size))
        .collect()
}

/// Four views between the default ones, for evaluation.
pub fn held_out_views(size: u32, ortho_scale: f64) -> Vec<Camera> {
    (0..4)
        .map(|i| Camera::orthographic(22.5 + 90.0 * i as f64, 15.0, ortho_scale, size))
        .collect()
}

/// One supervised pixel: surface point, shading frame and target normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainPixel {
    pub position: Vec3,
    pub tangent: Vec3,
    pub bitangent: Vec3,
    pub normal: Vec3,
    pub target: Vec3,
}

/// Collects covered pixels of `g` that have a target.
pub fn train_pixels(g: &GBuffer, targets: &[Option<Vec3>]) -> Vec<TrainPixel> {
    g.covered_indices()
        .filter_map(|i| {
            let target = targets[i]?;
            let (t, b, n) = g.frame(i);
            Some(TrainPixel { position: g.position[i], tangent: t, bitangent: b, normal: n, target })
        })
        .collect()
}

/// Gradient of the loss, split by parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub tables: Vec<f64>,
    pub network: Vec<f64>,
}

impl Gradient {
    /// Flattened in [`BumpField::params`] order.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.tables.clone();
        v.extend_from_slice(&self.network);
        v
    }
}

const CHUNK: usize = 256;

fn forward_pixel(field: &BumpField, px: &TrainPixel, ws: &mut Workspace) -> (Vec3, Vec3, f64, Vec3, f64) {
    let raw = field.raw(&px.position, ws);
    let q = raw + Vec3::z();
    let ql = q.norm();
    let bump = q / ql;
    let m = px.tangent * bump.x + px.bitangent * bump.y + px.normal * bump.z;
    let ml = m.norm();
    (bump, m / ml, ql, m, ml)
}

/// Mean over `pixels` of `|n_f - target|²`.
pub fn loss(field: &BumpField, pixels: &[TrainPixel], exec: Exec) -> f64 {
    if pixels.is_empty() {
        return 0.0;
    }
    let sums = exec.map(pixels.len().div_ceil(CHUNK), |c| {
        let mut ws = Workspace::default();
        pixels[c * CHUNK..((c + 1) * CHUNK).min(pixels.len())]
            .iter()
            .map(|px| (forward_pixel(field, px, &mut ws).1 - px.target).norm_squared())
            .sum::<f64>()
    });
    sums.iter().sum::<f64>() * (1.0 / pixels.len() as f64)
}

/// Loss and its analytic gradient with respect to every parameter.
/// Chunks are reduced in a fixed order, so the result does not depend on
/// `exec`.
pub fn loss_and_gradient(field: &BumpField, pixels: &[TrainPixel], exec: Exec) -> (f64, Gradient) {
    let mut grad = Gradient {
        tables: vec![0.0; field.encoder.tables.len()],
        network: vec![0.0; field.network.param_count()],
    };
    if pixels.is_empty() {
        return (0.0, grad);
    }
    let scale = 1.0 / pixels.len() as f64;
    let parts = exec.map(pixels.len().div_ceil(CHUNK), |c| {
        let mut ws = Workspace::default();
        let mut net = vec![0.0; field.network.param_count()];
        let mut tables = Vec::new();
        let mut sum = 0.0;
        for px in &pixels[c * CHUNK..((c + 1) * CHUNK).min(pixels.len())] {
            let (bump, nf, ql, _, ml) = forward_pixel(field, px, &mut ws);
            let diff = nf - px.target;
            sum += diff.norm_squared();
            let g_nf = diff * (2.0 * scale);
            let g_m = (g_nf - nf * nf.dot(&g_nf)) / ml;
            let g_bump = Vec3::new(g_m.dot(&px.tangent), g_m.dot(&px.bitangent), g_m.dot(&px.normal));
            let g_q = (g_bump - bump * bump.dot(&g_bump)) / ql;
            field.backward(&mut ws, &g_q, &mut net, &mut tables);
        }
        (sum, net, tables)
    });
    let mut total = 0.0;
    for (sum, net, tables) in parts {
        total += sum;
        for (g, v) in grad.network.iter_mut().zip(net) {
            *g += v;
        }
        for (off, v) in tables {
            grad.tables[off as usize] += v;
        }
    }
    (total * scale, grad)
}

/// Mean angle in degrees between two normal images over pixels where both
/// are present.
pub fn mean_angular_error_deg(a: &[Option<Vec3>], b: &[Option<Vec3>]) -> Option<f64> {
    let (sum, n) = a
        .iter()
        .zip(b)
        .filter_map(|(a, b)| Some(a.as_ref()?.angle(b.as_ref()?)))
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum.to_degrees() / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineReport {
    /// Full-set loss at the end of each round.
    pub round_losses: Vec<f64>,
    /// Per view, mean angle between the refined render and the raw oracle.
    pub view_errors_deg: Vec<Option<f64>>,
    /// Same, before refinement.
    pub initial_view_errors_deg: Vec<Option<f64>>,
}

fn render_views(mesh: &TriMesh, views: &[Camera], exec: Exec) -> Vec<GBuffer> {
    let white = TextureMap::constant(1, 1, &[1.0, 1.0, 1.0]);
    views
        .iter()
        .map(|cam| render_gbuffer(mesh, cam, &white, &RasterOptions { cull_backfaces: true, exec }))
        .collect()
}

/// Optimizes a fresh bump field for `mesh` against `oracle` seen through
/// `views`. The mesh itself is never modified.
pub fn refine(
    mesh: &TriMesh,
    oracle: &NormalOracle,
    views: &[Camera],
    cfg: &RefineConfig,
) -> Result<(BumpField, RefineReport)> {
    if cfg.rounds == 0 {
        return Err(Error::invalid("refinement needs at least one round"));
    }
    if views.len() < 4 {
        return Err(Error::invalid(format!("refinement needs at least 4 views, got {}", views.len())));
    }
    mesh.validate()?;
    let exec = cfg.exec;
    let mut field = BumpField::for_mesh(mesh, cfg.bump, cfg.seed)?;
    let gbuffers = render_views(mesh, views, exec);
    // The oracle does not depend on the field, so query it once.
    let raw: Vec<Vec<Option<Vec3>>> = views
        .iter()
        .enumerate()
        .map(|(i, cam)| oracle.oracle_normals(i, cam, exec))
        .collect::<Result<_>>()?;
    let initial_view_errors_deg = gbuffers
        .iter()
        .zip(&raw)
        .map(|(g, r)| mean_angular_error_deg(&normals_from_gbuffer(g, None, exec), r))
        .collect();

    let mut adam_tables = Adam::new(field.encoder.tables.len(), cfg.lr_tables);
    let mut adam_network = Adam::new(field.network.param_count(), cfg.lr_network);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut round_losses = Vec::with_capacity(cfg.rounds);
    let mut batch = Vec::new();

    for round in 0..cfg.rounds {
        let mut pixels = Vec::new();
        for (g, r) in gbuffers.iter().zip(&raw) {
            let current = normals_from_gbuffer(g, Some(&field), exec);
            pixels.extend(train_pixels(g, &blend_targets(&current, r, oracle.strength)));
        }
        if pixels.is_empty() {
            return Err(Error::invalid("no rendered pixel has an oracle target"));
        }
        for step in 0..cfg.steps_per_round {
            let sample: &[TrainPixel] = if cfg.batch_size == 0 || cfg.batch_size >= pixels.len() {
                &pixels
            } else {
                batch.clear();
                batch.extend((0..cfg.batch_size).map(|_| pixels[rng.random_range(0..pixels.len())]));
                &batch
            };
            let (l, grad) = loss_and_gradient(&field, sample, exec);
            if !l.is_finite() || grad.network.iter().any(|g| !g.is_finite()) {
                return Err(Error::DivergedLoss { round, step, loss: l });
            }
            adam_tables.step(&mut field.encoder.tables, &grad.tables);
            adam_network.step(&mut field.network.params, &grad.network);
        }
        let l = loss(&field, &pixels, exec);
        if !l.is_finite() {
            return Err(Error::DivergedLoss { round, step: cfg.steps_per_round, loss: l });
        }
        round_losses.push(l);
    }

    let view_errors_deg = gbuffers
        .iter()
        .zip(&raw)
        .map(|(g, r)| mean_angular_error_deg(&normals_from_gbuffer(g, Some(&field), exec), r))
        .collect();
    Ok((field, RefineReport { round_losses, view_errors_deg, initial_view_errors_deg }))
}

/// Held-out angular error of `mesh` (optionally refined) against a
/// reference, one value per camera.
pub fn evaluate_views(
    mesh: &TriMesh,
    field: Option<&BumpField>,
    reference: &TriMesh,
    cams: &[Camera],
    exec: Exec,
) -> Vec<Option<f64>> {
    let opts = RasterOptions { cull_backfaces: true, exec };
    cams.iter()
        .map(|cam| {
            let ours = crate::raster::render_normal_view(mesh, cam, field, &opts);
            let theirs = crate::raster::render_normal_view(reference, cam, None, &opts);
            mean_angular_error_deg(&ours, &theirs)
        })
        .collect()
}
