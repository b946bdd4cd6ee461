//! One loaded asset plus its editable material table.
//!
//! Mesh, mask and albedo never change after construction. The table lives in
//! an immutable [`Snapshot`] that edits replace wholesale, so a render holds
//! on to the snapshot it started with while later edits proceed.

use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use pbrboost_core::camera::Camera;
use pbrboost_core::gltf::{export_gltf, ExportInputs, ExportPaths};
use pbrboost_core::mask::SemanticMask3D;
use pbrboost_core::material::{maps_from_texel_segments, texel_segments, SegmentTable, MIN_BAKE_RESOLUTION};
use pbrboost_core::pipeline::{encode_png, fit_ortho_scale, prepare_mesh, render_image, RenderMode, Scene};
use pbrboost_core::shading::LightRig;
use pbrboost_core::{Error, Exec, Result, TextureMap, TriMesh};

pub struct SessionInputs {
    pub mesh: TriMesh,
    pub mask: SemanticMask3D,
    pub albedo: TextureMap,
    pub normal: Option<TextureMap>,
    pub table: SegmentTable,
    /// Edge length of the baked roughness/metalness maps.
    pub resolution: u32,
    /// Edge length of rendered previews.
    pub render_size: u32,
    pub export_dir: PathBuf,
}

/// Table state at one revision, with its maps baked and quantized to 8 bits
/// exactly as the command-line tool writes them.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub revision: u64,
    pub table: SegmentTable,
    pub roughness: TextureMap,
    pub metalness: TextureMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentInfo {
    pub id: u32,
    pub name: String,
    pub roughness: f64,
    pub metalness: f64,
    pub face_count: usize,
}

fn bake(texel_ids: &[u32], resolution: u32, revision: u64, table: SegmentTable) -> Snapshot {
    let (r, m) = maps_from_texel_segments(texel_ids, &table, resolution);
    Snapshot { revision, table, roughness: r.quantized(), metalness: m.quantized() }
}

pub struct Session {
    mesh: TriMesh,
    render_mesh: TriMesh,
    mask: SemanticMask3D,
    albedo: TextureMap,
    normal: Option<TextureMap>,
    texel_ids: Vec<u32>,
    resolution: u32,
    render_size: u32,
    ortho_scale: f64,
    export_dir: PathBuf,
    exec: Exec,
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
}

impl Session {
    pub fn new(inputs: SessionInputs, exec: Exec) -> Result<Self> {
        inputs.mesh.validate()?;
        if inputs.resolution < MIN_BAKE_RESOLUTION {
            return Err(Error::Range { what: "material map resolution", value: inputs.resolution as f64 });
        }
        if inputs.render_size < Camera::MIN_SIZE {
            return Err(Error::Invalid(format!("render size must be at least {}", Camera::MIN_SIZE)));
        }
        let (texel_ids, _) = texel_segments(&inputs.mesh, &inputs.mask, inputs.resolution, exec)?;
        let render_mesh = prepare_mesh(&inputs.mesh);
        let ortho_scale = fit_ortho_scale(&render_mesh);
        let first = bake(&texel_ids, inputs.resolution, 0, inputs.table);
        let session = Session {
            mesh: inputs.mesh,
            render_mesh,
            mask: inputs.mask,
            albedo: inputs.albedo,
            normal: inputs.normal,
            texel_ids,
            resolution: inputs.resolution,
            render_size: inputs.render_size,
            ortho_scale,
            export_dir: inputs.export_dir,
            exec,
            current: RwLock::new(Arc::new(first)),
            writer: Mutex::new(()),
        };
        // Channel counts are checked once here rather than on every render.
        session.scene(&session.snapshot()).validate()?;
        Ok(session)
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().unwrap().clone()
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn mask(&self) -> &SemanticMask3D {
        &self.mask
    }

    pub fn segments(&self, snap: &Snapshot) -> Vec<SegmentInfo> {
        let counts = self.mask.face_counts();
        (0..self.mask.segment_count)
            .map(|id| {
                let v = snap.table.values(id);
                SegmentInfo {
                    id,
                    name: snap.table.entries.get(&id).map(|e| e.name.clone()).unwrap_or_default(),
                    roughness: v.roughness,
                    metalness: v.metalness,
                    face_count: counts[id as usize],
                }
            })
            .collect()
    }

    /// Applies one edit and returns the new revision. Edits are serialized,
    /// so revisions advance by exactly one per success.
    pub fn update_segment(&self, id: u32, roughness: f64, metalness: f64) -> Result<u64> {
        let _guard = self.writer.lock().unwrap();
        let current = self.snapshot();
        let table = current.table.set_segment_values(id, roughness, metalness)?;
        let next = Arc::new(bake(&self.texel_ids, self.resolution, current.revision + 1, table));
        let revision = next.revision;
        *self.current.write().unwrap() = next;
        Ok(revision)
    }

    /// Preview camera for the given orbit angles.
    pub fn camera(&self, azimuth_deg: f64, elevation_deg: f64) -> Camera {
        Camera::orthographic(azimuth_deg, elevation_deg, self.ortho_scale, self.render_size)
    }

    fn scene<'a>(&'a self, snap: &'a Snapshot) -> Scene<'a> {
        Scene {
            mesh: &self.render_mesh,
            albedo: &self.albedo,
            roughness: &snap.roughness,
            metalness: &snap.metalness,
            normal: self.normal.as_ref(),
            mask: Some(&self.mask),
        }
    }

    pub fn render(&self, snap: &Snapshot, mode: RenderMode, cam: &Camera, rig: &LightRig) -> Result<Vec<u8>> {
        render_image(&self.scene(snap), mode, cam, rig, self.exec).map(|img| encode_png(&img))
    }

    pub fn export(&self, snap: &Snapshot) -> Result<ExportPaths> {
        export_gltf(
            &self.export_dir,
            &ExportInputs {
                mesh: &self.mesh,
                albedo: &self.albedo,
                roughness: &snap.roughness,
                metalness: &snap.metalness,
                normal: self.normal.as_ref(),
                table: &snap.table,
            },
        )
    }
}
