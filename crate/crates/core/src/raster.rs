//! CPU triangle rasterizer producing per-view G-buffers.
//!
//! Visibility is resolved per pixel with a z-test whose ties go to the lower
//! triangle index, so the result does not depend on the order triangles are
//! drawn in. Rows are independent and may be processed in parallel.

use crate::camera::{Camera, CameraKind, ViewProjection, NEAR_PLANE};
use crate::exec::Exec;
use crate::mesh::{tangent_frame, TriMesh};
use crate::refine::bump::BumpField;
use crate::texture::TextureMap;
use crate::{Vec2, Vec3};

/// Face id of an uncovered pixel.
pub const EMPTY: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterOptions {
    pub cull_backfaces: bool,
    pub exec: Exec,
}

impl Default for RasterOptions {
    fn default() -> Self {
        RasterOptions {
            cull_backfaces: true,
            exec: Exec::default(),
        }
    }
}

/// Per-pixel visibility and surface attributes for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    pub camera: Camera,
    pub width: u32,
    pub height: u32,
    pub face_id: Vec<u32>,
    pub depth: Vec<f64>,
    pub albedo: Vec<[f64; 3]>,
    pub position: Vec<Vec3>,
    /// Interpolated, renormalized vertex normal.
    pub normal: Vec<Vec3>,
    /// Unit tangent orthogonal to `normal`; with `normal.cross(tangent)` it
    /// forms the per-pixel shading frame.
    pub tangent: Vec<Vec3>,
    pub uv: Vec<Vec2>,
}

impl GBuffer {
    pub fn len(&self) -> usize {
        self.face_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.face_id.is_empty()
    }

    #[inline]
    pub fn covered(&self, i: usize) -> bool {
        self.face_id[i] != EMPTY
    }

    pub fn covered_count(&self) -> usize {
        self.face_id.iter().filter(|&&f| f != EMPTY).count()
    }

    pub fn covered_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.covered(i))
    }

    /// Orthonormal `(t, b, n)` frame at pixel `i`.
    pub fn frame(&self, i: usize) -> (Vec3, Vec3, Vec3) {
        let n = self.normal[i];
        let t = self.tangent[i];
        (t, n.cross(&t), n)
    }
}

/// Signed edge function of `p` against the directed edge `a -> b`, evaluated
/// with a canonical endpoint order so that the two triangles sharing an edge
/// get exactly negated values.
#[inline]
pub(crate) fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let raw = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    if (a[0], a[1]) <= (b[0], b[1]) {
        raw(a, b)
    } else {
        -raw(b, a)
    }
}

/// Top-left fill rule for an edge of a positively oriented triangle in a
/// y-down raster.
#[inline]
pub(crate) fn is_top_left(a: [f64; 2], b: [f64; 2]) -> bool {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    (dy == 0.0 && dx > 0.0) || dy < 0.0
}

/// 2D triangle prepared for coverage tests.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tri2 {
    pub v: [[f64; 2]; 3],
    sign: f64,
    top_left: [bool; 3],
}

impl Tri2 {
    /// Returns `None` for zero-area triangles.
    pub fn new(v: [[f64; 2]; 3]) -> Option<Self> {
        let area = edge(v[0], v[1], v[2]);
        if area == 0.0 || !area.is_finite() {
            return None;
        }
        let sign = area.signum();
        // Edge k is opposite vertex k: (v1,v2), (v2,v0), (v0,v1).
        let e = [(1, 2), (2, 0), (0, 1)];
        let top_left = e.map(|(i, j)| {
            if sign > 0.0 {
                is_top_left(v[i], v[j])
            } else {
                is_top_left(v[j], v[i])
            }
        });
        Some(Tri2 { v, sign, top_left })
    }

    /// Normalized screen-space barycentrics of `p`, or `None` if outside.
    #[inline]
    pub fn barycentric(&self, p: [f64; 2]) -> Option<[f64; 3]> {
        let v = &self.v;
        let w = [
            edge(v[1], v[2], p) * self.sign,
            edge(v[2], v[0], p) * self.sign,
            edge(v[0], v[1], p) * self.sign,
        ];
        for k in 0..3 {
            if w[k] < 0.0 || (w[k] == 0.0 && !self.top_left[k]) {
                return None;
            }
        }
        let s = w[0] + w[1] + w[2];
        Some([w[0] / s, w[1] / s, w[2] / s])
    }

    /// Inclusive range of pixel rows/cols whose centers may be covered,
    /// clipped to `[0, n)`.
    pub fn pixel_span(&self, axis: usize, n: u32) -> Option<(u32, u32)> {
        let lo = self.v.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
        let hi = self.v.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
        let a = (lo - 0.5).ceil().max(0.0);
        let b = (hi - 0.5).floor().min(n as f64 - 1.0);
        (a <= b).then_some((a as u32, b as u32))
    }
}

struct ScreenTri {
    face: u32,
    tri: Tri2,
    depth: [f64; 3],
}

#[derive(Clone, Copy)]
struct Hit {
    face: u32,
    depth: f64,
    bary: [f64; 3],
}

fn setup_triangles(mesh: &TriMesh, vp: &ViewProjection, cull: bool) -> Vec<ScreenTri> {
    let projected: Vec<Vec3> = mesh.positions.iter().map(|p| vp.project(p)).collect();
    let mut out = Vec::with_capacity(mesh.triangles.len());
    for (f, t) in mesh.triangles.iter().enumerate() {
        let s = t.p.map(|i| projected[i as usize]);
        if vp.kind == CameraKind::Perspective && s.iter().any(|v| v.z < NEAR_PLANE) {
            continue;
        }
        if cull {
            let p0 = mesh.positions[t.p[0] as usize];
            if mesh.face_cross(f).dot(&vp.to_viewer(&p0)) <= 0.0 {
                continue;
            }
        }
        if let Some(tri) = Tri2::new(s.map(|v| [v.x, v.y])) {
            out.push(ScreenTri {
                face: f as u32,
                tri,
                depth: s.map(|v| v.z),
            });
        }
    }
    out
}

/// Screen-space visibility: winning face and screen barycentrics per pixel.
fn resolve_visibility(
    mesh: &TriMesh,
    vp: &ViewProjection,
    opts: &RasterOptions,
    order: Option<&[u32]>,
) -> Vec<Option<Hit>> {
    let mut tris = setup_triangles(mesh, vp, opts.cull_backfaces);
    if let Some(order) = order {
        let rank: std::collections::HashMap<u32, usize> =
            order.iter().enumerate().map(|(i, &f)| (f, i)).collect();
        tris.sort_by_key(|t| rank.get(&t.face).copied().unwrap_or(usize::MAX));
    }
    let (w, h) = (vp.width, vp.height);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); h as usize];
    for (i, t) in tris.iter().enumerate() {
        if let Some((y0, y1)) = t.tri.pixel_span(1, h) {
            for y in y0..=y1 {
                bins[y as usize].push(i as u32);
            }
        }
    }
    let perspective = vp.kind == CameraKind::Perspective;
    let rows = opts.exec.map(h as usize, |y| {
        let mut row: Vec<Option<Hit>> = vec![None; w as usize];
        let py = y as f64 + 0.5;
        for &ti in &bins[y] {
            let t = &tris[ti as usize];
            let Some((x0, x1)) = t.tri.pixel_span(0, w) else { continue };
            for x in x0..=x1 {
                let Some(b) = t.tri.barycentric([x as f64 + 0.5, py]) else { continue };
                let depth = if perspective {
                    1.0 / (b[0] / t.depth[0] + b[1] / t.depth[1] + b[2] / t.depth[2])
                } else {
                    b[0] * t.depth[0] + b[1] * t.depth[1] + b[2] * t.depth[2]
                };
                let slot = &mut row[x as usize];
                let wins = match slot {
                    None => true,
                    Some(cur) => depth < cur.depth || (depth == cur.depth && t.face < cur.face),
                };
                if wins {
                    *slot = Some(Hit { face: t.face, depth, bary: b });
                }
            }
        }
        row
    });
    rows.into_iter().flatten().collect()
}

/// Perspective-correct attribute weights from screen barycentrics.
#[inline]
fn attribute_weights(b: [f64; 3], depth: [f64; 3], perspective: bool) -> [f64; 3] {
    if !perspective {
        return b;
    }
    let w = [b[0] / depth[0], b[1] / depth[1], b[2] / depth[2]];
    let s = w[0] + w[1] + w[2];
    [w[0] / s, w[1] / s, w[2] / s]
}

/// Rasterizes `mesh` from `cam`, fetching albedo from `albedo_uv` by bilinear
/// lookup at the interpolated UV. Zero-area (screen-space) triangles are
/// skipped.
pub fn render_gbuffer(
    mesh: &TriMesh,
    cam: &Camera,
    albedo_uv: &TextureMap,
    opts: &RasterOptions,
) -> GBuffer {
    render_gbuffer_with_order(mesh, cam, albedo_uv, opts, None)
}

/// Like [`render_gbuffer`] but draws triangles in the given face order.
pub fn render_gbuffer_with_order(
    mesh: &TriMesh,
    cam: &Camera,
    albedo_uv: &TextureMap,
    opts: &RasterOptions,
    order: Option<&[u32]>,
) -> GBuffer {
    let vp = cam.matrices();
    let hits = resolve_visibility(mesh, &vp, opts, order);
    let perspective = vp.kind == CameraKind::Perspective;
    let tangents: Vec<Option<Vec3>> = (0..mesh.triangles.len()).map(|f| mesh.face_tangent(f)).collect();

    let n = hits.len();
    let mut g = GBuffer {
        camera: *cam,
        width: cam.width,
        height: cam.height,
        face_id: vec![EMPTY; n],
        depth: vec![f64::INFINITY; n],
        albedo: vec![[0.0; 3]; n],
        position: vec![Vec3::zeros(); n],
        normal: vec![Vec3::zeros(); n],
        tangent: vec![Vec3::zeros(); n],
        uv: vec![Vec2::zeros(); n],
    };
    for (i, hit) in hits.into_iter().enumerate() {
        let Some(hit) = hit else { continue };
        let f = hit.face as usize;
        let ps = mesh.corners(f);
        let depths = ps.map(|p| (p - vp.eye).dot(&vp.forward));
        let l = attribute_weights(hit.bary, depths, perspective);
        let ns = mesh.corner_normals(f);
        let uvs = mesh.corner_uvs(f);
        let mut nrm = ns[0] * l[0] + ns[1] * l[1] + ns[2] * l[2];
        let len = nrm.norm();
        nrm = if len > 1e-12 { nrm / len } else { mesh.face_normal(f) };
        let uv = uvs[0] * l[0] + uvs[1] * l[1] + uvs[2] * l[2];
        let (t, _) = tangent_frame(&nrm, tangents[f].as_ref());
        let a = albedo_uv.sample_bilinear(&uv);
        g.face_id[i] = hit.face;
        g.depth[i] = hit.depth;
        g.position[i] = ps[0] * l[0] + ps[1] * l[1] + ps[2] * l[2];
        g.normal[i] = nrm;
        g.tangent[i] = t;
        g.uv[i] = uv;
        g.albedo[i] = if albedo_uv.channels == 1 { [a[0]; 3] } else { a };
    }
    g
}

/// Per-pixel world-space normals: the interpolated mesh normal `n_o`, or the
/// refined normal `n_o ⊕ n_b(θ)` when a bump field is given. Uncovered pixels
/// are `None`.
pub fn render_normal_view(
    mesh: &TriMesh,
    cam: &Camera,
    bump: Option<&BumpField>,
    opts: &RasterOptions,
) -> Vec<Option<Vec3>> {
    let flat = TextureMap::constant(1, 1, &[1.0, 1.0, 1.0]);
    let g = render_gbuffer(mesh, cam, &flat, opts);
    normals_from_gbuffer(&g, bump, opts.exec)
}

pub fn normals_from_gbuffer(g: &GBuffer, bump: Option<&BumpField>, exec: Exec) -> Vec<Option<Vec3>> {
    exec.map(g.len(), |i| {
        if !g.covered(i) {
            return None;
        }
        Some(match bump {
            None => g.normal[i],
            Some(field) => {
                let (t, b, n) = g.frame(i);
                let nb = field.eval_bump(&g.position[i]);
                crate::refine::integrate_normal(&n, &nb, &t, &b)
            }
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mesh::Triangle;
    use crate::Vec2;
    use proptest::prelude::*;

    fn red() -> TextureMap {
        TextureMap::constant(4, 4, &[1.0, 0.0, 0.0])
    }

    fn tri_mesh(ps: &[[f64; 3]], tris: &[[u32; 3]]) -> TriMesh {
        let mut m = TriMesh {
            positions: ps.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect(),
            uvs: vec![Vec2::new(0.1, 0.1), Vec2::new(0.9, 0.1), Vec2::new(0.1, 0.9)],
            normals: vec![],
            triangles: tris
                .iter()
                .map(|t| Triangle { p: *t, t: [0, 1, 2], n: [0, 0, 0] })
                .collect(),
            face_segments: None,
        };
        m.recompute_normals();
        m
    }

    #[test]
    fn screen_filling_triangle_is_constant_red() {
        let m = tri_mesh(&[[-10.0, -10.0, 0.0], [10.0, -10.0, 0.0], [0.0, 10.0, 0.0]], &[[0, 1, 2]]);
        let cam = Camera::orthographic(0.0, 0.0, 1.0, 32);
        let g = render_gbuffer(&m, &cam, &red(), &RasterOptions::default());
        assert_eq!(g.covered_count(), 32 * 32);
        for i in 0..g.len() {
            assert_eq!(g.face_id[i], 0);
            assert_eq!(g.albedo[i], [1.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn nearer_triangle_wins() {
        // Camera on +Z: z = 1 is nearer than z = -1.
        let m = tri_mesh(
            &[
                [-5.0, -5.0, -1.0], [5.0, -5.0, -1.0], [0.0, 5.0, -1.0],
                [-5.0, -5.0, 1.0], [5.0, -5.0, 1.0], [0.0, 5.0, 1.0],
            ],
            &[[0, 1, 2], [3, 4, 5]],
        );
        let cam = Camera::orthographic(0.0, 0.0, 1.0, 32);
        let g = render_gbuffer(&m, &cam, &red(), &RasterOptions::default());
        assert!(g.covered_indices().all(|i| g.face_id[i] == 1));
    }

    #[test]
    fn back_faces_are_culled_unless_disabled() {
        let m = tri_mesh(&[[-5.0, -5.0, 0.0], [0.0, 5.0, 0.0], [5.0, -5.0, 0.0]], &[[0, 1, 2]]);
        let cam = Camera::orthographic(0.0, 0.0, 1.0, 16);
        let g = render_gbuffer(&m, &cam, &red(), &RasterOptions::default());
        assert_eq!(g.covered_count(), 0);
        let opts = RasterOptions { cull_backfaces: false, ..Default::default() };
        assert!(render_gbuffer(&m, &cam, &red(), &opts).covered_count() > 0);
    }

    #[test]
    fn shared_edge_pixels_are_covered_exactly_once() {
        // Two triangles splitting a square along a diagonal through pixel centers.
        for flip in [false, true] {
            let quad = fixtures::quad(1.0);
            let mut m = quad.clone();
            if flip {
                m.triangles = vec![
                    Triangle { p: [0, 1, 3], t: [0, 1, 3], n: [0, 0, 0] },
                    Triangle { p: [1, 2, 3], t: [1, 2, 3], n: [0, 0, 0] },
                ];
            }
            let cam = Camera::orthographic(0.0, 0.0, 1.0, 32);
            let opts = RasterOptions { cull_backfaces: false, ..Default::default() };
            let vp = cam.matrices();
            let tris = setup_triangles(&m, &vp, false);
            for y in 0..32 {
                for x in 0..32 {
                    let p = [x as f64 + 0.5, y as f64 + 0.5];
                    let hits = tris.iter().filter(|t| t.tri.barycentric(p).is_some()).count();
                    assert_eq!(hits, 1, "pixel {x},{y}");
                }
            }
            assert_eq!(render_gbuffer(&m, &cam, &red(), &opts).covered_count(), 32 * 32);
        }
    }

    #[test]
    fn sphere_coverage_matches_disc_area() {
        let m = fixtures::icosphere(3);
        assert_eq!(m.triangles.len(), 1280);
        let cam = Camera::orthographic(0.0, 0.0, 1.25, 256);
        let g = render_gbuffer(&m, &cam, &red(), &RasterOptions::default());
        let frac = g.covered_count() as f64 / g.len() as f64;
        // Disc of diameter 2 in a frame of width 2.5.
        let expect = std::f64::consts::PI / 4.0 * (2.0f64 / 2.5).powi(2);
        assert!((frac / expect - 1.0).abs() < 0.02, "{frac} vs {expect}");
    }

    #[test]
    fn flat_quad_normals_point_at_camera() {
        let m = fixtures::quad(1.0);
        let cam = Camera::orthographic(0.0, 0.0, 1.5, 32);
        let ns = render_normal_view(&m, &cam, None, &RasterOptions::default());
        let covered: Vec<_> = ns.iter().flatten().collect();
        assert!(!covered.is_empty());
        assert!(covered.iter().all(|n| (*n - Vec3::z()).norm() < 1e-12));
    }

    #[test]
    fn sphere_silhouette_normals_are_perpendicular_to_view() {
        let mut m = fixtures::uv_sphere(48, 32, 1.0);
        // Analytic normals.
        m.normals = m.positions.iter().map(|p| p.normalize()).collect();
        for t in &mut m.triangles {
            t.n = t.p;
        }
        let cam = Camera::orthographic(0.0, 0.0, 1.2, 128);
        let ns = render_normal_view(&m, &cam, None, &RasterOptions::default());
        let w = 128usize;
        let mut checked = 0;
        for y in 0..w {
            for x in 0..w {
                let i = y * w + x;
                let Some(n) = ns[i] else { continue };
                let edge = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)].iter().any(|(dx, dy)| {
                    let (xx, yy) = (x as i64 + dx, y as i64 + dy);
                    xx < 0 || yy < 0 || xx >= w as i64 || yy >= w as i64 || ns[(yy as usize) * w + xx as usize].is_none()
                });
                if edge {
                    checked += 1;
                    assert!(n.dot(&Vec3::z()) < 0.3, "{n:?}");
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn positions_reproject_to_their_pixel() {
        let m = fixtures::icosphere(2);
        for cam in [Camera::orthographic(30.0, 20.0, 1.2, 64), Camera::perspective(-50.0, 10.0, 3.5, 64)] {
            let g = render_gbuffer(&m, &cam, &red(), &RasterOptions::default());
            let vp = cam.matrices();
            for i in g.covered_indices() {
                let q = vp.project(&g.position[i]);
                let (x, y) = ((i % 64) as f64 + 0.5, (i / 64) as f64 + 0.5);
                assert!((q.x - x).abs() <= 0.5 && (q.y - y).abs() <= 0.5);
                assert!((g.normal[i].norm() - 1.0).abs() < 1e-4);
                assert!(g.depth[i].is_finite());
            }
            for i in 0..g.len() {
                assert_eq!(g.covered(i), g.depth[i].is_finite());
            }
        }
    }

    #[test]
    fn sequential_and_parallel_are_bit_identical() {
        let m = fixtures::bumpy_sphere(24, 16, 0.05, 5.0);
        let cam = Camera::perspective(10.0, 25.0, 3.0, 96);
        let a = render_gbuffer(&m, &cam, &red(), &RasterOptions { exec: Exec::Sequential, ..Default::default() });
        let b = render_gbuffer(&m, &cam, &red(), &RasterOptions { exec: Exec::Parallel, ..Default::default() });
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn draw_order_does_not_matter(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let m = fixtures::icosphere(2);
            let cam = Camera::orthographic(seed as f64 % 360.0, 15.0, 1.2, 48);
            let mut order: Vec<u32> = (0..m.triangles.len() as u32).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let opts = RasterOptions { cull_backfaces: false, ..Default::default() };
            let a = render_gbuffer(&m, &cam, &red(), &opts);
            let b = render_gbuffer_with_order(&m, &cam, &red(), &opts, Some(&order));
            prop_assert_eq!(a, b);
        }
    }
}
