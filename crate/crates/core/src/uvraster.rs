//! UV-space rasterization for texture bakes, plus nearest-covered-texel
//! fill for the gutter.

use crate::exec::Exec;
use crate::mesh::TriMesh;
use crate::raster::{Tri2, EMPTY};

/// Which triangle owns each texel of a `width x height` atlas.
#[derive(Debug, Clone, PartialEq)]
pub struct UvCoverage {
    pub width: u32,
    pub height: u32,
    /// Owning triangle per texel, or [`EMPTY`]. Lower triangle index wins
    /// when UVs overlap.
    pub owner: Vec<u32>,
    /// Barycentrics of the texel center within its owner.
    pub bary: Vec<[f64; 3]>,
    /// `(texel, face)` pairs for faces that also covered an owned texel.
    pub contested: Vec<(u32, u32)>,
}

impl UvCoverage {
    pub fn covered_count(&self) -> usize {
        self.owner.iter().filter(|&&o| o != EMPTY).count()
    }
}

/// Maps UV to continuous texel coordinates (row 0 at `v = 1`).
#[inline]
pub fn uv_to_texel(uv: &crate::Vec2, width: u32, height: u32) -> [f64; 2] {
    [uv.x * width as f64, (1.0 - uv.y) * height as f64]
}

pub fn rasterize_uv(mesh: &TriMesh, width: u32, height: u32, exec: Exec) -> UvCoverage {
    let tris: Vec<Option<Tri2>> = (0..mesh.triangles.len())
        .map(|f| Tri2::new(mesh.corner_uvs(f).map(|uv| uv_to_texel(&uv, width, height))))
        .collect();
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); height as usize];
    for (f, t) in tris.iter().enumerate() {
        if let Some((y0, y1)) = t.as_ref().and_then(|t| t.pixel_span(1, height)) {
            for y in y0..=y1 {
                bins[y as usize].push(f as u32);
            }
        }
    }
    let rows = exec.map(height as usize, |y| {
        let mut owner = vec![EMPTY; width as usize];
        let mut bary = vec![[0.0; 3]; width as usize];
        let mut contested = Vec::new();
        let py = y as f64 + 0.5;
        for &f in &bins[y] {
            let t = tris[f as usize].as_ref().expect("binned triangles are valid");
            let Some((x0, x1)) = t.pixel_span(0, width) else { continue };
            for x in x0..=x1 {
                if let Some(b) = t.barycentric([x as f64 + 0.5, py]) {
                    let texel = y as u32 * width + x;
                    if owner[x as usize] == EMPTY {
                        owner[x as usize] = f;
                        bary[x as usize] = b;
                    } else {
                        contested.push((texel, f));
                    }
                }
            }
        }
        (owner, bary, contested)
    });
    let mut cov = UvCoverage {
        width,
        height,
        owner: Vec::with_capacity((width * height) as usize),
        bary: Vec::with_capacity((width * height) as usize),
        contested: Vec::new(),
    };
    for (o, b, c) in rows {
        cov.owner.extend(o);
        cov.bary.extend(b);
        cov.contested.extend(c);
    }
    cov
}

const FAR: f64 = 1e12;

/// One-dimensional squared-distance transform with argmin
/// (Felzenszwalb & Huttenlocher lower envelope of parabolas).
fn dt_1d(f: &[f64], d: &mut [f64], arg: &mut [usize], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                // z[0] is -inf, so this never underflows.
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        d[q] = dq * dq + f[p];
        arg[q] = p;
    }
}

/// For every texel, the index of the nearest (Euclidean) texel in `mask`.
/// Returns `None` if the mask is empty.
pub fn nearest_covered(mask: &[bool], width: u32, height: u32) -> Option<Vec<u32>> {
    if !mask.iter().any(|&m| m) {
        return None;
    }
    let (w, h) = (width as usize, height as usize);
    let mut col_d = vec![0.0; w * h];
    let mut col_arg = vec![0usize; w * h];
    let n = w.max(h);
    let (mut f, mut d, mut arg, mut v, mut z) =
        (vec![0.0; n], vec![0.0; n], vec![0usize; n], vec![0usize; n], vec![0.0; n + 1]);
    for x in 0..w {
        for y in 0..h {
            f[y] = if mask[y * w + x] { 0.0 } else { FAR };
        }
        dt_1d(&f[..h], &mut d[..h], &mut arg[..h], &mut v[..h], &mut z[..h + 1]);
        for y in 0..h {
            col_d[y * w + x] = d[y];
            col_arg[y * w + x] = arg[y];
        }
    }
    let mut out = vec![0u32; w * h];
    for y in 0..h {
        f[..w].copy_from_slice(&col_d[y * w..(y + 1) * w]);
        dt_1d(&f[..w], &mut d[..w], &mut arg[..w], &mut v[..w], &mut z[..w + 1]);
        for x in 0..w {
            let sx = arg[x];
            let sy = col_arg[y * w + sx];
            out[y * w + x] = (sy * w + sx) as u32;
        }
    }
    Some(out)
}

/// Copies every uncovered texel's channels from its nearest covered texel.
pub fn fill_from_nearest(data: &mut [f64], channels: usize, nearest: &[u32]) {
    for (i, &src) in nearest.iter().enumerate() {
        let src = src as usize;
        if src != i {
            for c in 0..channels {
                data[i * channels + c] = data[src * channels + c];
            }
        }
    }
}
