//! Multiresolution hash-grid positional encoding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::Aabb;
use crate::Vec3;

const PRIMES: [u32; 3] = [1, 2_654_435_761, 805_459_861];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HashGridConfig {
    pub levels: usize,
    pub features: usize,
    pub table_size: usize,
    pub base_resolution: u32,
    pub finest_resolution: u32,
}

impl Default for HashGridConfig {
    fn default() -> Self {
        HashGridConfig {
            levels: 8,
            features: 2,
            table_size: 1 << 16,
            base_resolution: 16,
            finest_resolution: 256,
        }
    }
}

impl HashGridConfig {
    /// Cells per axis at each level.
    pub fn resolutions(&self) -> Result<Vec<u32>> {
        if self.levels == 0 || self.features == 0 || self.table_size == 0 {
            return Err(Error::invalid("hash grid needs at least one level, feature and table entry"));
        }
        if self.base_resolution == 0 || self.finest_resolution < self.base_resolution {
            return Err(Error::invalid("hash grid resolutions must satisfy 0 < N_min <= N_max"));
        }
        if self.levels == 1 {
            return Ok(vec![self.base_resolution]);
        }
        let nmin = self.base_resolution as f64;
        let b = ((self.finest_resolution as f64 / nmin).ln() / (self.levels - 1) as f64).exp();
        let res: Vec<u32> = (0..self.levels)
            .map(|l| {
                // Guard against exp/ln round-off at exact integers.
                let r = nmin * b.powi(l as i32);
                (r + 1e-9).floor() as u32
            })
            .collect();
        if res.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "level resolutions {res:?} are not strictly increasing; use fewer levels or a wider range"
            )));
        }
        Ok(res)
    }
}

/// Corner table indices and trilinear weights for every level at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Lookup {
    /// `levels * 8` entries, each an index into the level's table.
    pub index: Vec<u32>,
    pub weight: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashGridEncoder {
    pub config: HashGridConfig,
    pub resolutions: Vec<u32>,
    pub bounds: Aabb,
    /// `levels * table_size * features`, level-major.
    pub tables: Vec<f64>,
}

impl HashGridEncoder {
    /// Tables start uniform in `[-1e-4, 1e-4]`.
    pub fn new(config: HashGridConfig, bounds: Aabb, seed: u64) -> Result<Self> {
        let resolutions = config.resolutions()?;
        let e = bounds.extent();
        if !(e.x > 0.0 && e.y > 0.0 && e.z > 0.0) {
            return Err(Error::invalid("encoder bounds must have positive extent on every axis"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tables = (0..config.levels * config.table_size * config.features)
            .map(|_| rng.random_range(-1e-4..1e-4))
            .collect();
        Ok(HashGridEncoder { config, resolutions, bounds, tables })
    }

    pub fn output_dim(&self) -> usize {
        self.config.levels * self.config.features
    }

    /// Whether level `l` stores every vertex of its grid without hashing.
    pub fn is_dense(&self, l: usize) -> bool {
        let r = self.resolutions[l] as u64 + 1;
        r * r * r <= self.config.table_size as u64
    }

    /// Table slot for integer vertex `c` at level `l`.
    pub fn corner_index(&self, l: usize, c: [u32; 3]) -> u32 {
        let t = self.config.table_size as u64;
        if self.is_dense(l) {
            let r = self.resolutions[l] as u64 + 1;
            ((c[0] as u64 + c[1] as u64 * r + c[2] as u64 * r * r) % t) as u32
        } else {
            spatial_hash(c, self.config.table_size)
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.bounds.contains(p)
    }

    /// Corner indices and weights for `p`.
    pub fn lookup(&self, p: &Vec3) -> Result<Lookup> {
        if !self.contains(p) {
            return Err(Error::OutOfBounds { x: p.x, y: p.y, z: p.z });
        }
        let mut out = Lookup {
            index: vec![0; self.config.levels * 8],
            weight: vec![0.0; self.config.levels * 8],
        };
        self.lookup_into(p, &mut out.index, &mut out.weight);
        Ok(out)
    }

    /// Unchecked lookup; `p` is clamped into the domain.
    pub(crate) fn lookup_into(&self, p: &Vec3, index: &mut [u32], weight: &mut [f64]) {
        let lo = self.bounds.min;
        let e = self.bounds.extent();
        let unit = [
            ((p.x - lo.x) / e.x).clamp(0.0, 1.0),
            ((p.y - lo.y) / e.y).clamp(0.0, 1.0),
            ((p.z - lo.z) / e.z).clamp(0.0, 1.0),
        ];
        for (l, &res) in self.resolutions.iter().enumerate() {
            let mut cell = [0u32; 3];
            let mut frac = [0.0; 3];
            for a in 0..3 {
                let s = unit[a] * res as f64;
                // The far boundary belongs to the last cell.
                let c = (s.floor() as u32).min(res - 1);
                cell[a] = c;
                frac[a] = s - c as f64;
            }
            for k in 0..8 {
                let bit = [k & 1, (k >> 1) & 1, (k >> 2) & 1];
                let corner = [cell[0] + bit[0] as u32, cell[1] + bit[1] as u32, cell[2] + bit[2] as u32];
                let mut w = 1.0;
                for a in 0..3 {
                    w *= if bit[a] == 1 { frac[a] } else { 1.0 - frac[a] };
                }
                index[l * 8 + k] = self.corner_index(l, corner);
                weight[l * 8 + k] = w;
            }
        }
    }

    /// Interpolated features from a precomputed lookup.
    pub(crate) fn gather(&self, index: &[u32], weight: &[f64], out: &mut [f64]) {
        let (f, t) = (self.config.features, self.config.table_size);
        out.fill(0.0);
        for l in 0..self.config.levels {
            let base = l * t * f;
            for k in 0..8 {
                let w = weight[l * 8 + k];
                let row = base + index[l * 8 + k] as usize * f;
                for j in 0..f {
                    out[l * f + j] += w * self.tables[row + j];
                }
            }
        }
    }

    /// Feature vector of length `levels * features`.
    pub fn encode(&self, p: &Vec3) -> Result<Vec<f64>> {
        let lk = self.lookup(p)?;
        let mut out = vec![0.0; self.output_dim()];
        self.gather(&lk.index, &lk.weight, &mut out);
        Ok(out)
    }

    /// Position of table entry `(level, slot, feature)` in [`Self::tables`].
    #[inline]
    pub fn table_offset(&self, level: usize, slot: u32, feature: usize) -> usize {
        (level * self.config.table_size + slot as usize) * self.config.features + feature
    }
}

/// `(x * 1 ^ y * 2654435761 ^ z * 805459861) mod T` with 32-bit wrapping
/// products.
pub fn spatial_hash(c: [u32; 3], table_size: usize) -> u32 {
    let h = c[0].wrapping_mul(PRIMES[0]) ^ c[1].wrapping_mul(PRIMES[1]) ^ c[2].wrapping_mul(PRIMES[2]);
    (h as u64 % table_size as u64) as u32
}
