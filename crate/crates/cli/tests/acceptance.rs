//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test --release -p pbrboost-cli --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use pbrboost_core::camera::Camera;
use pbrboost_core::fixtures;
use pbrboost_core::mask::{align_labels, default_view_set, fuse_mask, render_face_labels, SemanticMask3D, UNLABELED};
use pbrboost_core::material::{bake_material_uvs, texel_segments, MaterialValues, SegmentTable};
use pbrboost_core::raster::{render_gbuffer, render_normal_view, RasterOptions};
use pbrboost_core::refine::bump::{BumpConfig, BumpField};
use pbrboost_core::refine::hashgrid::HashGridConfig;
use pbrboost_core::refine::oracle::NormalOracle;
use pbrboost_core::refine::{
    bake_normal_uv, default_views, evaluate_views, held_out_views, loss, loss_and_gradient, refine, train_pixels,
    RefineConfig,
};
use pbrboost_core::shading::{shade, shading_normal, validate_brdf_normalization, DirectionalLight, LightRig, MaterialMaps, ShadeOptions};
use pbrboost_core::texture::{rgb_image, TextureMap};
use pbrboost_core::{Exec, TriMesh, Vec2, Vec3};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

fn zero_init_identity() -> Outcome {
    let meshes = [
        ("quad", fixtures::quad(1.0)),
        ("sphere", fixtures::uv_sphere(32, 16, 1.0)),
        ("bumpy sphere", fixtures::bumpy_sphere(16, 16, 0.06, 6.0)),
    ];
    let opts = RasterOptions::default();
    let (mut worst, mut pixels, mut bad) = (0.0f64, 0usize, 0usize);
    for (seed, (_, mesh)) in meshes.iter().enumerate() {
        let field = BumpField::for_mesh(mesh, BumpConfig::default(), seed as u64).unwrap();
        for (az, el) in [(0.0, 0.0), (35.0, 20.0), (200.0, -30.0)] {
            let cam = Camera::orthographic(az, el, 1.3, 128);
            let plain = render_normal_view(mesh, &cam, None, &opts);
            let bumped = render_normal_view(mesh, &cam, Some(&field), &opts);
            for (a, b) in plain.iter().zip(&bumped) {
                match (a, b) {
                    (Some(a), Some(b)) => {
                        let d = (a - b).amax();
                        worst = worst.max(d);
                        pixels += 1;
                        bad += usize::from(d > 1e-5);
                    }
                    (None, None) => {}
                    _ => bad += 1,
                }
            }
        }
    }
    outcome(pixels > 0 && bad == 0, format!("{pixels} covered pixels, {bad} over 1e-5, max component diff {worst:.1e}"))
}

fn gradient_oracle() -> Outcome {
    let mesh = fixtures::micro_mesh();
    let cfg = BumpConfig {
        grid: HashGridConfig { levels: 2, features: 2, table_size: 16, base_resolution: 2, finest_resolution: 4 },
        hidden_width: 8,
    };
    let mut field = BumpField::for_mesh(&mesh, cfg, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params: Vec<f64> = (0..field.param_count()).map(|_| rng.random_range(-0.5..0.5)).collect();
    field.set_params(&params);

    let white = TextureMap::constant(1, 1, &[1.0, 1.0, 1.0]);
    let mut pixels = Vec::new();
    for (az, el) in [(0.0, 0.0), (25.0, 10.0), (-30.0, -15.0)] {
        let g = render_gbuffer(&mesh, &Camera::orthographic(az, el, 1.0, 24), &white, &RasterOptions::default());
        let targets: Vec<_> = (0..g.len())
            .map(|_| Some(Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 1.0).normalize()))
            .collect();
        pixels.extend(train_pixels(&g, &targets));
    }

    let analytic = loss_and_gradient(&field, &pixels, Exec::Sequential).1.flat();
    let h = 1e-4;
    let mut probe = field.clone();
    let (mut checked, mut worst) = (0usize, 0.0f64);
    for k in 0..params.len() {
        let mut p = params.clone();
        p[k] = params[k] + h;
        probe.set_params(&p);
        let up = loss(&probe, &pixels, Exec::Sequential);
        p[k] = params[k] - h;
        probe.set_params(&p);
        let down = loss(&probe, &pixels, Exec::Sequential);
        let fd = (up - down) / (2.0 * h);
        let scale = analytic[k].abs().max(fd.abs());
        if scale > 1e-6 {
            worst = worst.max((analytic[k] - fd).abs() / scale);
            checked += 1;
        }
    }
    outcome(
        checked > 0 && worst < 1e-3,
        format!("{checked}/{} parameters checked, max relative error {worst:.2e}", params.len()),
    )
}

struct Recovery {
    coarse: TriMesh,
    field: BumpField,
    scale: f64,
}

fn normal_recovery() -> (Outcome, Recovery) {
    let (amp, freq) = (0.06, 6.0);
    let coarse = fixtures::bumpy_sphere(16, 16, amp, freq);
    let reference = fixtures::bumpy_sphere(100, 100, amp, freq);
    let scale = 1.1 * (1.0 + amp);
    let oracle = NormalOracle::synthetic_reference(Some(reference.clone()), 1.0).unwrap();
    let views = default_views(192, scale);
    let cfg = RefineConfig::default();
    let (field, report) = refine(&coarse, &oracle, &views, &cfg).unwrap();
    let held = held_out_views(192, scale);
    let mean = |v: Vec<Option<f64>>| {
        let vals: Vec<f64> = v.into_iter().flatten().collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let before = mean(evaluate_views(&coarse, None, &reference, &held, Exec::default()));
    let after = mean(evaluate_views(&coarse, Some(&field), &reference, &held, Exec::default()));
    let reduction = 1.0 - after / before;
    let l = &report.round_losses;
    let monotone = l.windows(2).all(|w| w[1] <= 1.05 * w[0]);
    let o = outcome(
        reduction >= 0.5 && monotone && l.len() == 3,
        format!(
            "{} vs {} triangles, {} views, held-out {before:.3}° -> {after:.3}° ({:.1}% reduction), round losses {:?}",
            coarse.triangles.len(),
            reference.triangles.len(),
            views.len(),
            100.0 * reduction,
            l.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
        ),
    );
    (o, Recovery { coarse, field, scale })
}

/// Fraction of faces whose fused id maps to their true id, under the best
/// relabeling of fused ids.
fn best_accuracy(mask: &SemanticMask3D, truth: &[u32]) -> f64 {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    perms
        .iter()
        .map(|p| mask.segments.iter().zip(truth).filter(|(s, t)| (**s as usize) < 3 && p[**s as usize] == **t).count())
        .max()
        .unwrap() as f64
        / truth.len() as f64
}

fn mask_fusion() -> Outcome {
    let mesh = fixtures::icosphere(3);
    let truth = fixtures::height_bands(&mesh, 3);
    let cams = default_view_set(128, 1.1);
    let run = |corruption: f64, seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let views: Vec<_> = cams
            .iter()
            .enumerate()
            .map(|(vi, cam)| {
                let mut v = render_face_labels(&mesh, &truth, cam, Exec::default());
                // Each view names the parts differently.
                let rename = [[0, 1, 2], [2, 0, 1], [1, 2, 0]][vi % 3];
                for l in v.labels.iter_mut().filter(|l| **l != UNLABELED) {
                    if rng.random_bool(corruption) {
                        *l = (*l + rng.random_range(1..3)) % 3;
                    }
                    *l = rename[*l as usize];
                }
                v
            })
            .collect();
        let aligned = align_labels(&mesh, &views, Exec::default()).unwrap();
        let mask = fuse_mask(&mesh, &aligned, Exec::default()).unwrap();
        (mask.segment_count, best_accuracy(&mask, &truth))
    };
    let (n_noisy, noisy) = run(0.1, 9);
    let (n_clean, clean) = run(0.0, 9);
    outcome(
        noisy >= 0.95 && clean == 1.0 && n_noisy == 3 && n_clean == 3,
        format!(
            "{} triangles, {} views: 10% corruption {:.2}% correct, clean {:.2}% correct",
            truth.len(),
            cams.len(),
            100.0 * noisy,
            100.0 * clean
        ),
    )
}

fn brdf_normalization() -> Outcome {
    let integrals: Vec<(f64, f64)> =
        [0.3, 0.5, 1.0].iter().map(|&r| (r, validate_brdf_normalization(r).unwrap())).collect();
    let quad_ok = integrals.iter().all(|(_, v)| (v - 1.0).abs() <= 0.02);

    let mesh = fixtures::quad(1.0);
    let white = TextureMap::constant(4, 4, &[1.0, 1.0, 1.0]);
    let rough = TextureMap::constant(4, 4, &[0.5]);
    let zero = TextureMap::constant(4, 4, &[0.0]);
    let s = 0.5f64.sqrt();
    let rig = LightRig {
        directionals: vec![DirectionalLight { direction: [s, 0.0, s], radiance: [1.0; 3] }],
        ambient: [0.0; 3],
    };
    let g = render_gbuffer(&mesh, &Camera::orthographic(0.0, 0.0, 1.2, 33), &white, &RasterOptions::default());
    let maps = MaterialMaps { roughness: &rough, metalness: &zero, normal: None };
    let px = shade(&g, maps, &rig, &ShadeOptions { specular: false, ..Default::default() });
    let center = rgb_image(33, 33, &px).get_pixel(16, 16).0;
    let expected = (1.0 / PI) * (PI / 4.0).cos() * 255.0;
    let lambert = center.iter().map(|&c| (c as f64 - expected).abs()).fold(0.0, f64::max);
    outcome(
        quad_ok && lambert <= 2.0,
        format!(
            "integrals {}; Lambert center {:?} vs {expected:.2} (off by {lambert:.2}/255)",
            integrals.iter().map(|(r, v)| format!("r={r}: {v:.5}")).collect::<Vec<_>>().join(", "),
            center
        ),
    )
}

fn material_bake() -> Outcome {
    let mesh = fixtures::uv_sphere(32, 16, 1.0);
    let mask = SemanticMask3D::from_labels(&fixtures::height_bands(&mesh, 2));
    let table = SegmentTable::for_mask(&mask, MaterialValues::default())
        .set_segment_values(0, 0.3, 1.0)
        .unwrap()
        .set_segment_values(1, 0.65, 0.0)
        .unwrap();
    let res = 1024;
    let bake = bake_material_uvs(&mesh, &mask, &table, res, Exec::default()).unwrap();
    let exact = (0..mesh.triangles.len())
        .filter(|&f| {
            let uv = mesh.corner_uvs(f);
            let centroid = Vec2::new((uv[0].x + uv[1].x + uv[2].x) / 3.0, (uv[0].y + uv[1].y + uv[2].y) / 3.0);
            let want = table.values(mask.segments[f]);
            bake.roughness.sample_nearest(&centroid)[0] == want.roughness
                && bake.metalness.sample_nearest(&centroid)[0] == want.metalness
        })
        .count();

    // Editing segment 1 touches exactly the texels owned by segment 1,
    // counting gutter texels by their nearest covered owner.
    let edited = table.set_segment_values(1, 0.1, 0.5).unwrap();
    let after = bake_material_uvs(&mesh, &mask, &edited, res, Exec::default()).unwrap();
    let (owners, _) = texel_segments(&mesh, &mask, res, Exec::default()).unwrap();
    let changed: Vec<bool> = (0..owners.len())
        .map(|i| bake.roughness.data[i] != after.roughness.data[i] || bake.metalness.data[i] != after.metalness.data[i])
        .collect();
    let outside = changed.iter().zip(&owners).filter(|(c, o)| **c && **o != 1).count();
    let missed = changed.iter().zip(&owners).filter(|(c, o)| !**c && **o == 1).count();
    let n = mesh.triangles.len();
    outcome(
        exact == n && outside == 0 && missed == 0,
        format!(
            "{exact}/{n} centroids exact at {res}²; edit changed {} texels, {outside} outside the segment, {missed} segment texels unchanged",
            changed.iter().filter(|c| **c).count()
        ),
    )
}

fn bake_render_consistency(r: &Recovery) -> Outcome {
    // Texels must be well below the finest grid cell (about 0.008 here) for
    // bilinear lookup to follow the field; 4096² gives about 0.0016.
    // Bakes are 8-bit encoded already.
    let res = 4096;
    let map = bake_normal_uv(&r.coarse, &r.field, res, Exec::default()).unwrap().map;
    let white = TextureMap::constant(1, 1, &[1.0, 1.0, 1.0]);
    let opts = RasterOptions { cull_backfaces: true, exec: Exec::default() };
    let (mut total, mut close, mut worst) = (0usize, 0usize, 0.0f64);
    for cam in held_out_views(192, r.scale) {
        let direct = render_normal_view(&r.coarse, &cam, Some(&r.field), &opts);
        let g = render_gbuffer(&r.coarse, &cam, &white, &opts);
        for i in g.covered_indices() {
            let e = angle_deg(&shading_normal(&g, i, Some(&map)), &direct[i].unwrap());
            worst = worst.max(e);
            total += 1;
            close += usize::from(e < 1.0);
        }
    }
    let frac = close as f64 / total as f64;
    outcome(
        frac >= 0.99,
        format!("{res}² bake, {close}/{total} covered pixels within 1° ({:.2}%), max {worst:.2}°", 100.0 * frac),
    )
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_owned()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Every command, run twice into separate directories with one seed.
fn cli_run(a: &Assets, out: &Path, seed: &str) -> Result<Vec<u8>, String> {
    let check = |o: std::process::Output, what: &str| {
        if o.status.success() {
            Ok(())
        } else {
            Err(format!("{what} failed: {}", stderr(&o).trim()))
        }
    };
    for (o, what) in run_pipeline(a, out, seed).into_iter().zip(["mask", "assign", "refine"]) {
        check(o, what)?;
    }
    check(
        run([
            "mask", "--mesh", p(&a.mesh), "--fallback-k", "3", "--albedo", p(&a.albedo), "--size", "64",
            "--out", p(&out.join("fallback_mask.txt")), "--seed", seed,
        ]),
        "mask fallback",
    )?;
    let maps = out.join("maps");
    check(
        run([
            "relight", "--mesh", p(&a.mesh), "--albedo", p(&a.albedo), "--roughness", p(&maps.join("roughness.png")),
            "--metalness", p(&maps.join("metalness.png")), "--normal", p(&out.join("refine/normal_uv.png")),
            "--rig", p(&a.rig), "--camera", p(&a.camera), "--out", p(&out.join("relit.png")), "--seed", seed,
        ]),
        "relight",
    )?;
    check(
        run([
            "export", "--mesh", p(&a.mesh), "--mask", p(&out.join("mask.txt")), "--albedo", p(&a.albedo),
            "--roughness", p(&maps.join("roughness.png")), "--metalness", p(&maps.join("metalness.png")),
            "--normal", p(&out.join("refine/normal_uv.png")), "--table", p(&a.recommendations),
            "--out", p(&out.join("gltf")), "--seed", seed,
        ]),
        "export",
    )?;

    let server = Server::start(&[
        "--mesh", p(&a.mesh), "--mask", p(&out.join("mask.txt")), "--albedo", p(&a.albedo),
        "--recommendations", p(&a.recommendations), "--res", "128", "--size", "64",
        "--export-dir", p(&out.join("served")), "--seed", seed,
    ]);
    let (s, _, _) = server.request("PUT", "/api/segments/1", Some(r#"{"roughness":0.4,"metalness":0.9}"#));
    let (s2, _, png) = server.request("GET", "/api/render?azimuth=60&elevation=10", None);
    let (s3, _, _) = server.request("POST", "/api/export", None);
    if (s, s2, s3) != (200, 200, 200) {
        return Err(format!("service answered {s}, {s2}, {s3}"));
    }
    Ok(png)
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_assets(tmp.path());
    let (out_a, out_b) = (tmp.path().join("run_a"), tmp.path().join("run_b"));
    let (png_a, png_b) = match (cli_run(&a, &out_a, "17"), cli_run(&a, &out_b, "17")) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => return outcome(false, e),
    };
    let (fa, fb) = (files(&out_a), files(&out_b));
    let differing: Vec<&String> = fa.keys().filter(|k| fb.get(*k) != fa.get(*k)).collect();
    let same_names = fa.keys().eq(fb.keys());
    outcome(
        same_names && differing.is_empty() && png_a == png_b,
        format!(
            "{} output files compared, {} differ{}; service render {}",
            fa.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(" ({differing:?})") },
            if png_a == png_b { "identical" } else { "differs" }
        ),
    )
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored.
    let mut failed = 0;
    let mut report = |name: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let mut o = f();
        let took = start.elapsed();
        if let Some(limit) = limit {
            if took > limit {
                o.pass = false;
                o.detail.push_str(&format!("; over the {}s budget", limit.as_secs()));
            }
        }
        println!("{} {name}: {} [{:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail, took.as_secs_f64());
        failed += usize::from(!o.pass);
    };
    report("zero-init identity", Some(Duration::from_secs(10)), &mut zero_init_identity);
    report("gradient oracle", Some(Duration::from_secs(60)), &mut gradient_oracle);
    let mut recovery = None;
    report("normal recovery", Some(Duration::from_secs(300)), &mut || {
        let (o, r) = normal_recovery();
        recovery = Some(r);
        o
    });
    report("mask fusion", Some(Duration::from_secs(30)), &mut mask_fusion);
    report("BRDF normalization", None, &mut brdf_normalization);
    report("material bake", None, &mut material_bake);
    report("bake/render consistency", None, &mut || bake_render_consistency(recovery.as_ref().unwrap()));
    report("CLI determinism", None, &mut cli_determinism);
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
