use std::fs;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde_json::json;

use pbrboost_core::camera::Camera;
use pbrboost_core::gltf::{export_gltf, validate_gltf, ExportInputs};
use pbrboost_core::mask::{align_labels, default_view_set, fallback_segment, fuse_mask, load_view_labels, SemanticMask3D};
use pbrboost_core::material::{bake_material_uvs, load_recommendations, MaterialValues, SegmentTable};
use pbrboost_core::obj::load_mesh;
use pbrboost_core::pipeline::{fit_ortho_scale, prepare_mesh, relight_png, Scene};
use pbrboost_core::raster::{render_gbuffer, RasterOptions};
use pbrboost_core::refine::oracle::NormalOracle;
use pbrboost_core::refine::{bake_normal_uv, default_views, evaluate_views, held_out_views, RefineConfig};
use pbrboost_core::shading::LightRig;
use pbrboost_core::{Exec, TextureMap, TriMesh};
use pbrboost_service::{AppState, Session, SessionInputs};

use crate::{AssignArgs, ExportArgs, MaskArgs, RefineArgs, RelightArgs, ServeArgs};

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(parent) => create_dir(parent),
        None => Ok(()),
    }
}

fn load_png(path: &Path) -> Result<TextureMap> {
    Ok(TextureMap::load_png(path)?)
}

pub fn mask(a: &MaskArgs, seed: u64) -> Result<()> {
    let exec = Exec::default();
    let mesh = prepare_mesh(&load_mesh(&a.mesh)?);
    let views = match (&a.labels, a.fallback_k) {
        (Some(dir), _) => {
            if !dir.is_dir() {
                bail!("labels directory {} does not exist", dir.display());
            }
            load_view_labels(dir)?
        }
        (None, Some(k)) => {
            let albedo = match &a.albedo {
                Some(p) => load_png(p)?,
                None => TextureMap::constant(1, 1, &[1.0, 1.0, 1.0]),
            };
            let opts = RasterOptions { cull_backfaces: true, exec };
            default_view_set(a.size, fit_ortho_scale(&mesh))
                .iter()
                .enumerate()
                .map(|(i, cam)| {
                    let g = render_gbuffer(&mesh, cam, &albedo, &opts);
                    fallback_segment(&g, k as usize, seed.wrapping_add(i as u64))
                })
                .collect::<pbrboost_core::Result<Vec<_>>>()?
        }
        (None, None) => bail!("either --labels or --fallback-k is required"),
    };
    if views.is_empty() {
        bail!("no label views found");
    }
    let aligned = if views.len() >= 2 { align_labels(&mesh, &views, exec)? } else { views };
    let mask = fuse_mask(&mesh, &aligned, exec)?;
    create_parent(&a.out)?;
    mask.save(&a.out)?;
    println!("segments: {}", mask.segment_count);
    Ok(())
}

pub fn assign(a: &AssignArgs) -> Result<()> {
    let mesh = load_mesh(&a.mesh)?;
    let mask = SemanticMask3D::load(&a.mask, &mesh)?;
    let table = match &a.recommendations {
        Some(p) => load_recommendations(p, &mask)?,
        None => SegmentTable::for_mask(&mask, MaterialValues::default()),
    };
    let bake = bake_material_uvs(&mesh, &mask, &table, a.res, Exec::default())?;
    if bake.overlapping_texels > 0 {
        eprintln!("warning: {} texels are shared by different segments", bake.overlapping_texels);
    }
    create_dir(&a.out)?;
    bake.roughness.save_png(a.out.join("roughness.png"))?;
    bake.metalness.save_png(a.out.join("metalness.png"))?;
    println!("wrote {} and {}", a.out.join("roughness.png").display(), a.out.join("metalness.png").display());
    Ok(())
}

fn max_extent(mesh: &TriMesh) -> f64 {
    mesh.positions.iter().map(|p| p.norm()).fold(0.0, f64::max)
}

pub fn refine(a: &RefineArgs, seed: u64) -> Result<()> {
    let exec = Exec::default();
    let source = load_mesh(&a.mesh)?;
    let center = source.bounds().center();
    let mesh = prepare_mesh(&source);
    let cfg = RefineConfig {
        rounds: a.rounds as usize,
        steps_per_round: a.steps,
        batch_size: a.batch,
        seed,
        exec,
        ..Default::default()
    };
    let (oracle, views, reference) = match (&a.oracle_dir, &a.reference_mesh) {
        (Some(dir), _) => {
            let oracle = NormalOracle::file_backed(dir, a.t0)?;
            let cams = oracle.cameras().unwrap_or_default().to_vec();
            (oracle, cams, None)
        }
        (None, Some(path)) => {
            // The reference is moved with the coarse mesh so both share a frame.
            let mut reference = load_mesh(path)?;
            for p in &mut reference.positions {
                *p -= center;
            }
            let oracle = NormalOracle::synthetic_reference(Some(reference.clone()), a.t0)?;
            let scale = 1.1 * max_extent(&mesh).max(max_extent(&reference));
            (oracle, default_views(a.view_size, scale), Some((reference, scale)))
        }
        (None, None) => bail!("either --oracle-dir or --reference-mesh is required"),
    };
    let (field, report) = pbrboost_core::refine::refine(&mesh, &oracle, &views, &cfg)?;
    let bake = bake_normal_uv(&mesh, &field, a.res, exec)?;
    create_dir(&a.out)?;
    bake.map.save_png(a.out.join("normal_uv.png"))?;

    let mut metrics = json!({
        "t0": a.t0,
        "rounds": a.rounds,
        "steps_per_round": a.steps,
        "round_losses": report.round_losses,
        "view_errors_deg": report.view_errors_deg,
        "initial_view_errors_deg": report.initial_view_errors_deg,
    });
    if let Some((reference, scale)) = reference {
        let held = held_out_views(a.view_size, scale);
        let before = evaluate_views(&mesh, None, &reference, &held, exec);
        let after = evaluate_views(&mesh, Some(&field), &reference, &held, exec);
        let mean = |v: &[Option<f64>]| {
            let vals: Vec<f64> = v.iter().flatten().copied().collect();
            vals.iter().sum::<f64>() / vals.len().max(1) as f64
        };
        let (mb, ma) = (mean(&before), mean(&after));
        metrics["held_out"] = json!({
            "before_deg": before,
            "after_deg": after,
            "mean_before_deg": mb,
            "mean_after_deg": ma,
            "reduction": if mb > 0.0 { 1.0 - ma / mb } else { 0.0 },
        });
        println!("held-out angular error: {mb:.3} -> {ma:.3} deg");
    }
    fs::write(a.out.join("metrics.json"), serde_json::to_string_pretty(&metrics)? + "\n")?;
    println!("round losses: {:?}", report.round_losses);
    Ok(())
}

fn load_rig(arg: &str) -> Result<LightRig> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(LightRig::load(path)?);
    }
    LightRig::preset(arg).with_context(|| {
        format!("rig {arg:?} is neither a file nor a preset ({})", LightRig::PRESETS.join(", "))
    })
}

fn load_camera(path: &Path) -> Result<Camera> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let value = match value {
        serde_json::Value::Array(mut list) if !list.is_empty() => list.swap_remove(0),
        serde_json::Value::Array(_) => bail!("{}: camera list is empty", path.display()),
        v => v,
    };
    let cam: Camera = serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))?;
    cam.validate()?;
    Ok(cam)
}

pub fn relight(a: &RelightArgs) -> Result<()> {
    let mesh = prepare_mesh(&load_mesh(&a.mesh)?);
    let albedo = load_png(&a.albedo)?;
    let roughness = load_png(&a.roughness)?;
    let metalness = load_png(&a.metalness)?;
    let normal = a.normal.as_deref().map(load_png).transpose()?;
    let rig = load_rig(&a.rig)?;
    let cam = load_camera(&a.camera)?;
    let scene = Scene {
        mesh: &mesh,
        albedo: &albedo,
        roughness: &roughness,
        metalness: &metalness,
        normal: normal.as_ref(),
        mask: None,
    };
    let png = relight_png(&scene, &cam, &rig, Exec::default())?;
    create_parent(&a.out)?;
    fs::write(&a.out, png).with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

pub fn export(a: &ExportArgs) -> Result<()> {
    let mesh = load_mesh(&a.mesh)?;
    let mask = SemanticMask3D::load(&a.mask, &mesh)?;
    let table = load_recommendations(&a.table, &mask)?;
    let albedo = load_png(&a.albedo)?;
    let roughness = load_png(&a.roughness)?;
    let metalness = load_png(&a.metalness)?;
    let normal = a.normal.as_deref().map(load_png).transpose()?;
    let paths = export_gltf(
        &a.out,
        &ExportInputs {
            mesh: &mesh,
            albedo: &albedo,
            roughness: &roughness,
            metalness: &metalness,
            normal: normal.as_ref(),
            table: &table,
        },
    )?;
    let summary = validate_gltf(&paths.gltf)?;
    for p in paths.all() {
        println!("wrote {}", p.display());
    }
    println!("validated: {} vertices, {} indices", summary.positions.len(), summary.indices.len());
    Ok(())
}

pub fn serve(a: &ServeArgs) -> Result<()> {
    let session = match (&a.mesh, &a.mask, &a.albedo) {
        (Some(mesh_path), Some(mask_path), Some(albedo_path)) => {
            let mesh = load_mesh(mesh_path)?;
            let mask = SemanticMask3D::load(mask_path, &mesh)?;
            let table = match &a.recommendations {
                Some(p) => load_recommendations(p, &mask)?,
                None => SegmentTable::for_mask(&mask, MaterialValues::default()),
            };
            let inputs = SessionInputs {
                mesh,
                mask,
                albedo: load_png(albedo_path)?,
                normal: a.normal.as_deref().map(load_png).transpose()?,
                table,
                resolution: a.res,
                render_size: a.size,
                export_dir: a.export_dir.clone(),
            };
            Some(Arc::new(Session::new(inputs, Exec::default())?))
        }
        _ => None,
    };
    let addr = SocketAddr::from(([127, 0, 0, 1], a.port));
    let runtime = tokio::runtime::Runtime::new()?;
    eprintln!("listening on http://{addr}");
    runtime
        .block_on(pbrboost_service::serve(addr, AppState { session, static_dir: a.static_dir.clone() }))
        .with_context(|| format!("serving on {addr}"))
}
