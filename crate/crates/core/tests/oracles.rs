//! Checks against values computed independently of the library code paths
//! under test: closed forms, brute-force geometry and finite differences.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pbrboost_core::camera::Camera;
use pbrboost_core::fixtures;
use pbrboost_core::mask::{align_labels, fuse_mask, render_face_labels, SemanticMask3D, ViewLabels};
use pbrboost_core::material::{bake_material_uvs, MaterialValues, SegmentTable};
use pbrboost_core::raster::{render_gbuffer, render_normal_view, RasterOptions, EMPTY};
use pbrboost_core::refine::bump::{BumpConfig, BumpField};
use pbrboost_core::refine::hashgrid::HashGridConfig;
use pbrboost_core::refine::oracle::NormalOracle;
use pbrboost_core::refine::{bake_normal_uv, loss, loss_and_gradient, refine, train_pixels, RefineConfig, TrainPixel};
use pbrboost_core::shading::{shade, shading_normal, DirectionalLight, LightRig, MaterialMaps, ShadeOptions};
use pbrboost_core::texture::{rgb_image, TextureMap};
use pbrboost_core::{Exec, TriMesh, Vec2, Vec3};

fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

#[test]
fn lambert_pixel_matches_closed_form() {
    let m = fixtures::quad(1.0);
    let white = TextureMap::constant(4, 4, &[1.0, 1.0, 1.0]);
    let rough = TextureMap::constant(4, 4, &[0.5]);
    let zero = TextureMap::constant(4, 4, &[0.0]);
    let s = (0.5f64).sqrt();
    let rig = LightRig {
        directionals: vec![DirectionalLight { direction: [s, 0.0, s], radiance: [1.0; 3] }],
        ambient: [0.0; 3],
    };
    let cam = Camera::orthographic(0.0, 0.0, 1.2, 33);
    let g = render_gbuffer(&m, &cam, &white, &RasterOptions::default());
    let maps = MaterialMaps { roughness: &rough, metalness: &zero, normal: None };
    let px = shade(&g, maps, &rig, &ShadeOptions { specular: false, ..Default::default() });
    let expected = (1.0 / PI) * (PI / 4.0).cos() * 255.0;
    let img = rgb_image(33, 33, &px);
    for c in img.get_pixel(16, 16).0 {
        assert!((c as f64 - expected).abs() <= 2.0, "{c} vs {expected}");
    }
}

/// Point-in-triangle test in UV space written out from scratch.
fn uv_contains(tri: [Vec2; 3], p: Vec2) -> bool {
    let cross = |a: Vec2, b: Vec2, c: Vec2| (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    let d = [cross(tri[0], tri[1], p), cross(tri[1], tri[2], p), cross(tri[2], tri[0], p)];
    d.iter().all(|&v| v >= 0.0) || d.iter().all(|&v| v <= 0.0)
}

#[test]
fn material_bake_agrees_with_brute_force_coverage() {
    let m = fixtures::uv_sphere(24, 12, 1.0);
    let mask = SemanticMask3D::from_labels(&fixtures::height_bands(&m, 2));
    let table = SegmentTable::for_mask(&mask, MaterialValues::default())
        .set_segment_values(0, 0.42, 1.0)
        .unwrap()
        .set_segment_values(1, 0.17, 0.0)
        .unwrap();
    let res = 128u32;
    let bake = bake_material_uvs(&m, &mask, &table, res, Exec::default()).unwrap();
    // Every texel whose center lies strictly inside exactly one triangle
    // carries that triangle's segment values.
    let tris: Vec<[Vec2; 3]> = (0..m.triangles.len()).map(|f| m.corner_uvs(f)).collect();
    let mut checked = 0;
    for y in 0..res {
        for x in 0..res {
            let p = Vec2::new((x as f64 + 0.5) / res as f64, 1.0 - (y as f64 + 0.5) / res as f64);
            let owners: Vec<usize> = (0..tris.len()).filter(|&f| uv_contains(tris[f], p)).collect();
            if owners.len() != 1 {
                continue;
            }
            let want = table.values(mask.segments[owners[0]]);
            let i = (y * res + x) as usize;
            assert_eq!(bake.roughness.data[i], want.roughness, "texel ({x}, {y})");
            assert_eq!(bake.metalness.data[i], want.metalness, "texel ({x}, {y})");
            checked += 1;
        }
    }
    assert!(checked > 10_000);
}

fn micro_field() -> BumpField {
    let m = fixtures::micro_mesh();
    let cfg = BumpConfig {
        grid: HashGridConfig { levels: 2, features: 2, table_size: 16, base_resolution: 2, finest_resolution: 4 },
        hidden_width: 8,
    };
    let mut field = BumpField::for_mesh(&m, cfg, 3).unwrap();
    // Random weights everywhere, including the zero-initialized output layer,
    // so every parameter has a non-trivial gradient.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p: Vec<f64> = (0..field.param_count()).map(|_| rng.random_range(-0.5..0.5)).collect();
    field.set_params(&p);
    field
}

fn micro_pixels() -> Vec<TrainPixel> {
    let m = fixtures::micro_mesh();
    let white = TextureMap::constant(1, 1, &[1.0, 1.0, 1.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pixels = Vec::new();
    for (az, el) in [(0.0, 0.0), (25.0, 10.0), (-30.0, -15.0)] {
        let cam = Camera::orthographic(az, el, 1.0, 24);
        let g = render_gbuffer(&m, &cam, &white, &RasterOptions::default());
        let targets: Vec<Option<Vec3>> = (0..g.len())
            .map(|_| {
                let v = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 1.0);
                Some(v.normalize())
            })
            .collect();
        pixels.extend(train_pixels(&g, &targets));
    }
    pixels
}

#[test]
fn loss_gradient_matches_central_differences() {
    let field = micro_field();
    let pixels = micro_pixels();
    assert!(pixels.len() > 200);
    let (_, grad) = loss_and_gradient(&field, &pixels, Exec::Sequential);
    let analytic = grad.flat();
    let base = field.params();
    let h = 1e-4;
    let mut probe = field.clone();
    let mut checked = 0;
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] = base[k] + h;
        probe.set_params(&p);
        let up = loss(&probe, &pixels, Exec::Sequential);
        p[k] = base[k] - h;
        probe.set_params(&p);
        let down = loss(&probe, &pixels, Exec::Sequential);
        let fd = (up - down) / (2.0 * h);
        let a = analytic[k];
        if a.abs().max(fd.abs()) > 1e-6 {
            let rel = (a - fd).abs() / a.abs().max(fd.abs());
            assert!(rel < 1e-3, "param {k}: analytic {a:e}, fd {fd:e}");
            checked += 1;
        }
    }
    assert!(checked > base.len() / 2, "only {checked} parameters checked");
}

/// Quad whose reference normals are tilted 10° about the x axis.
fn tilted_reference() -> (TriMesh, Vec3) {
    let mut m = fixtures::quad(1.0);
    let a = 10f64.to_radians();
    let n = Vec3::new(0.0, -a.sin(), a.cos());
    m.normals = vec![n];
    (m, n)
}

/// Training views must be dense enough that the finest grid level sees
/// samples in most cells it is asked about later.
fn quad_views() -> Vec<Camera> {
    [(-20.0, -15.0), (20.0, -15.0), (-20.0, 15.0), (20.0, 15.0), (0.0, 0.0)]
        .into_iter()
        .map(|(az, el)| Camera::orthographic(az, el, 1.1, 128))
        .collect()
}

fn refined_quad() -> BumpField {
    let (reference, _) = tilted_reference();
    let oracle = NormalOracle::synthetic_reference(Some(reference), 1.0).unwrap();
    let cfg = RefineConfig { rounds: 2, steps_per_round: 150, ..Default::default() };
    refine(&fixtures::quad(1.0), &oracle, &quad_views(), &cfg).unwrap().0
}

#[test]
fn tilted_quad_is_recovered_and_bakes_consistently() {
    let m = fixtures::quad(1.0);
    let (_, target) = tilted_reference();
    let field = refined_quad();
    let opts = RasterOptions::default();
    let cam = Camera::orthographic(10.0, 5.0, 1.1, 96);
    let direct = render_normal_view(&m, &cam, Some(&field), &opts);
    let covered: Vec<Vec3> = direct.iter().flatten().copied().collect();
    let close = covered.iter().filter(|n| angle_deg(n, &target) < 1.0).count();
    assert!(close as f64 >= 0.99 * covered.len() as f64, "{close}/{}", covered.len());

    // Baking, then shading through the map, reproduces the field.
    let bake = bake_normal_uv(&m, &field, 256, Exec::default()).unwrap();
    let white = TextureMap::constant(1, 1, &[1.0, 1.0, 1.0]);
    let g = render_gbuffer(&m, &cam, &white, &opts);
    let mut agree = 0;
    for i in g.covered_indices() {
        let baked = shading_normal(&g, i, Some(&bake.map));
        if angle_deg(&baked, &direct[i].unwrap()) < 1.0 {
            agree += 1;
        }
    }
    assert!(agree as f64 >= 0.99 * g.covered_count() as f64);
}

#[test]
fn mask_fusion_survives_pixel_noise_and_renamed_ids() {
    let m = fixtures::icosphere(3);
    let truth = fixtures::height_bands(&m, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let views: Vec<ViewLabels> = pbrboost_core::mask::default_view_set(96, 1.1)
        .iter()
        .enumerate()
        .map(|(vi, cam)| {
            let mut v = render_face_labels(&m, &truth, cam, Exec::default());
            let rename = [[0, 1, 2], [2, 0, 1], [1, 2, 0]][vi % 3];
            for l in v.labels.iter_mut().filter(|l| **l != pbrboost_core::mask::UNLABELED) {
                *l = if rng.random_bool(0.1) { (*l + rng.random_range(1..3)) % 3 } else { *l };
                *l = rename[*l as usize];
            }
            v
        })
        .collect();
    let aligned = align_labels(&m, &views, Exec::default()).unwrap();
    let mask = fuse_mask(&m, &aligned, Exec::default()).unwrap();
    assert_eq!(mask.segment_count, 3);
    // Match each fused id to the truth label it overlaps most.
    let mut overlap: HashMap<(u32, u32), usize> = HashMap::new();
    for (&s, &t) in mask.segments.iter().zip(&truth) {
        *overlap.entry((s, t)).or_default() += 1;
    }
    let mapping: HashMap<u32, u32> = (0..3)
        .map(|s| (s, (0..3).max_by_key(|&t| overlap.get(&(s, t)).copied().unwrap_or(0)).unwrap()))
        .collect();
    let right = mask.segments.iter().zip(&truth).filter(|(s, t)| mapping[s] == **t).count();
    assert!(right as f64 >= 0.95 * truth.len() as f64, "{right}/{}", truth.len());
}

#[test]
fn unrefined_render_has_no_face_left_uncovered_on_a_front_quad() {
    // Sanity for the fixtures above: a front-facing quad fills the expected
    // square of pixels and nothing else.
    let m = fixtures::quad(1.0);
    let g = render_gbuffer(
        &m,
        &Camera::orthographic(0.0, 0.0, 2.0, 32),
        &TextureMap::constant(1, 1, &[1.0, 1.0, 1.0]),
        &RasterOptions::default(),
    );
    assert_eq!(g.face_id.iter().filter(|&&f| f != EMPTY).count(), 16 * 16);
}
