//! The optimizable bump field: hash-grid features decoded by an MLP into a
//! tangent-space unit normal.

use super::hashgrid::{HashGridConfig, HashGridEncoder};
use super::mlp::{Activations, Mlp};
use crate::error::Result;
use crate::mesh::{Aabb, TriMesh};
use crate::Vec3;

/// Fraction of the mesh bounding box added on each side of the encoder
/// domain.
pub const DOMAIN_PADDING: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpConfig {
    pub grid: HashGridConfig,
    pub hidden_width: usize,
}

impl Default for BumpConfig {
    fn default() -> Self {
        BumpConfig { grid: HashGridConfig::default(), hidden_width: 64 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BumpField {
    pub encoder: HashGridEncoder,
    pub network: Mlp,
}

/// Scratch buffers for one evaluation.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    index: Vec<u32>,
    weight: Vec<f64>,
    features: Vec<f64>,
    acts: Activations,
    dfeatures: Vec<f64>,
}

impl BumpField {
    pub fn new(bounds: Aabb, config: BumpConfig, seed: u64) -> Result<Self> {
        let encoder = HashGridEncoder::new(config.grid, bounds, seed)?;
        let network = Mlp::new(encoder.output_dim(), config.hidden_width, 3, seed.wrapping_add(1));
        Ok(BumpField { encoder, network })
    }

    /// Field whose domain is the mesh bounding box padded by
    /// [`DOMAIN_PADDING`].
    pub fn for_mesh(mesh: &TriMesh, config: BumpConfig, seed: u64) -> Result<Self> {
        Self::new(mesh.bounds().padded(DOMAIN_PADDING), config, seed)
    }

    pub fn param_count(&self) -> usize {
        self.encoder.tables.len() + self.network.param_count()
    }

    /// All parameters, tables first.
    pub fn params(&self) -> Vec<f64> {
        let mut v = self.encoder.tables.clone();
        v.extend_from_slice(&self.network.params);
        v
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let n = self.encoder.tables.len();
        assert_eq!(p.len(), self.param_count());
        self.encoder.tables.copy_from_slice(&p[..n]);
        self.network.params.copy_from_slice(&p[n..]);
    }

    /// Raw network output at `p`; positions outside the domain are clamped
    /// onto it.
    pub fn raw(&self, p: &Vec3, ws: &mut Workspace) -> Vec3 {
        let levels = self.encoder.config.levels;
        ws.index.resize(levels * 8, 0);
        ws.weight.resize(levels * 8, 0.0);
        ws.features.resize(self.encoder.output_dim(), 0.0);
        self.encoder.lookup_into(p, &mut ws.index, &mut ws.weight);
        self.encoder.gather(&ws.index, &ws.weight, &mut ws.features);
        let mut out = [0.0; 3];
        self.network.forward(&ws.features, &mut ws.acts, &mut out);
        Vec3::new(out[0], out[1], out[2])
    }

    /// `normalize(raw + (0, 0, 1))`.
    pub fn eval_bump(&self, p: &Vec3) -> Vec3 {
        bump_from_raw(&self.raw(p, &mut Workspace::default()))
    }

    /// Backpropagates `draw` (gradient w.r.t. the raw output of the last
    /// [`Self::raw`] call on `ws`). Network gradients are added to
    /// `network_grad`; table gradients are appended as `(offset, value)`.
    pub fn backward(
        &self,
        ws: &mut Workspace,
        draw: &Vec3,
        network_grad: &mut [f64],
        table_grad: &mut Vec<(u32, f64)>,
    ) {
        ws.dfeatures.resize(self.encoder.output_dim(), 0.0);
        self.network.backward(
            &ws.features,
            &ws.acts,
            &[draw.x, draw.y, draw.z],
            network_grad,
            &mut ws.dfeatures,
        );
        let f = self.encoder.config.features;
        for l in 0..self.encoder.config.levels {
            for k in 0..8 {
                let w = ws.weight[l * 8 + k];
                if w == 0.0 {
                    continue;
                }
                for j in 0..f {
                    let g = w * ws.dfeatures[l * f + j];
                    if g != 0.0 {
                        let off = self.encoder.table_offset(l, ws.index[l * 8 + k], j);
                        table_grad.push((off as u32, g));
                    }
                }
            }
        }
    }
}

pub fn bump_from_raw(raw: &Vec3) -> Vec3 {
    let q = raw + Vec3::z();
    let len = q.norm();
    if len > 1e-12 {
        q / len
    } else {
        Vec3::z()
    }
}
