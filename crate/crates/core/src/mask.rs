//! Fusion of per-view 2D segmentations into a per-face semantic mask.
//!
//! Each labeled pixel votes for the triangle visible under it. Triangles take
//! the majority label; ties go to the label first seen in the lowest view
//! index. Triangles seen by no view inherit the label of the nearest labeled
//! triangle over edge adjacency.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::mesh::TriMesh;
use crate::raster::{render_gbuffer, GBuffer, RasterOptions, EMPTY};
use crate::texture::{load_gray16, save_gray16, TextureMap};

pub const UNLABELED: u32 = u32::MAX;

/// Minimum Jaccard overlap for two per-view labels to be unified.
pub const JACCARD_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ViewLabels {
    pub camera: Camera,
    /// Row-major, `UNLABELED` where no segment applies.
    pub labels: Vec<u32>,
}

impl ViewLabels {
    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != (self.camera.width * self.camera.height) as usize {
            return Err(Error::invalid(format!(
                "label map has {} pixels, camera is {}x{}",
                self.labels.len(),
                self.camera.width,
                self.camera.height
            )));
        }
        Ok(())
    }
}

/// Per-triangle segment ids, contiguous in `0..segment_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticMask3D {
    pub segments: Vec<u32>,
    pub segment_count: u32,
}

impl SemanticMask3D {
    /// Builds a mask from arbitrary labels, renumbering them contiguously in
    /// ascending order.
    pub fn from_labels(labels: &[u32]) -> Self {
        let distinct: BTreeSet<u32> = labels.iter().copied().collect();
        let remap: HashMap<u32, u32> = distinct.iter().enumerate().map(|(i, &l)| (l, i as u32)).collect();
        SemanticMask3D {
            segments: labels.iter().map(|l| remap[l]).collect(),
            segment_count: distinct.len() as u32,
        }
    }

    pub fn uniform(triangles: usize) -> Self {
        SemanticMask3D {
            segments: vec![0; triangles],
            segment_count: 1,
        }
    }

    pub fn face_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.segment_count as usize];
        for &s in &self.segments {
            c[s as usize] += 1;
        }
        c
    }

    /// Text format: header `pbrmask v1 <count>`, then one segment id per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("pbrmask v1 {}\n", self.segment_count);
        for id in &self.segments {
            s.push_str(&id.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let parts: Vec<&str> = header.split_whitespace().collect();
        let count = match parts.as_slice() {
            ["pbrmask", "v1", n] => n.parse::<u32>().map_err(|_| Error::Parse {
                line: 1,
                message: format!("invalid segment count {n:?}"),
            })?,
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "expected header 'pbrmask v1 <count>'".into(),
                })
            }
        };
        let mut segments = Vec::new();
        for (i, l) in lines.enumerate() {
            let l = l.trim();
            if l.is_empty() {
                continue;
            }
            let id: u32 = l.parse().map_err(|_| Error::Parse {
                line: i + 2,
                message: format!("invalid segment id {l:?}"),
            })?;
            if id >= count {
                return Err(Error::Parse {
                    line: i + 2,
                    message: format!("segment id {id} >= count {count}"),
                });
            }
            segments.push(id);
        }
        Ok(SemanticMask3D {
            segments,
            segment_count: count,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, mesh: &TriMesh) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mask = Self::from_text(&text)?;
        if mask.segments.len() != mesh.triangles.len() {
            return Err(Error::invalid(format!(
                "mask has {} entries but mesh has {} triangles",
                mask.segments.len(),
                mesh.triangles.len()
            )));
        }
        Ok(mask)
    }
}

/// Six orthographic views: front, right, back, left, top, bottom.
pub fn default_view_set(size: u32, ortho_scale: f64) -> Vec<Camera> {
    [(0.0, 0.0), (90.0, 0.0), (180.0, 0.0), (270.0, 0.0), (0.0, 90.0), (0.0, -90.0)]
        .into_iter()
        .map(|(az, el)| Camera::orthographic(az, el, ortho_scale, size))
        .collect()
}

fn face_buffer(mesh: &TriMesh, cam: &Camera, exec: Exec) -> GBuffer {
    let flat = TextureMap::constant(1, 1, &[1.0, 1.0, 1.0]);
    render_gbuffer(mesh, cam, &flat, &RasterOptions { cull_backfaces: true, exec })
}

/// Faces visible in one view, and the majority label of each labeled face
/// (ties to the lower label).
struct FaceLabels {
    visible: BTreeSet<u32>,
    majority: BTreeMap<u32, u32>,
}

fn per_view_majority(g: &GBuffer, labels: &[u32]) -> FaceLabels {
    let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
    for i in g.covered_indices() {
        if labels[i] != UNLABELED {
            *counts.entry((g.face_id[i], labels[i])).or_default() += 1;
        }
    }
    let mut best: BTreeMap<u32, (u32, u32)> = BTreeMap::new();
    for ((f, l), c) in counts {
        let e = best.entry(f).or_insert((l, c));
        if c > e.1 || (c == e.1 && l < e.0) {
            *e = (l, c);
        }
    }
    FaceLabels {
        visible: g.covered_indices().map(|i| g.face_id[i]).collect(),
        majority: best.into_iter().map(|(f, (l, _))| (f, l)).collect(),
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Keep the smaller node as root so ids follow node order.
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Unifies per-view label ids. Two labels from different views are merged
/// when, over the faces visible in both views, the face sets each view
/// assigns to its label have Jaccard overlap of at least
/// [`JACCARD_THRESHOLD`].
/// Global ids are numbered by first appearance in (view, label) order.
pub fn align_labels(mesh: &TriMesh, views: &[ViewLabels], exec: Exec) -> Result<Vec<ViewLabels>> {
    if views.len() < 2 {
        return Err(Error::invalid("label alignment needs at least two views"));
    }
    for v in views {
        v.validate()?;
    }
    let majorities: Vec<FaceLabels> = exec.map(views.len(), |vi| {
        let g = face_buffer(mesh, &views[vi].camera, Exec::Sequential);
        per_view_majority(&g, &views[vi].labels)
    });

    // Nodes are (view, local label) pairs.
    let mut nodes: Vec<(usize, u32)> = Vec::new();
    for (vi, v) in views.iter().enumerate() {
        let local: BTreeSet<u32> =
            v.labels.iter().copied().filter(|&l| l != UNLABELED).collect();
        nodes.extend(local.into_iter().map(|l| (vi, l)));
    }
    let index: HashMap<(usize, u32), usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut uf = UnionFind((0..nodes.len()).collect());

    for i in 0..views.len() {
        for j in i + 1..views.len() {
            let (mi, mj) = (&majorities[i], &majorities[j]);
            let mut joint: BTreeMap<(u32, u32), usize> = BTreeMap::new();
            let mut size_i: HashMap<u32, usize> = HashMap::new();
            let mut size_j: HashMap<u32, usize> = HashMap::new();
            for f in mi.visible.intersection(&mj.visible) {
                let (a, b) = (mi.majority.get(f), mj.majority.get(f));
                if let Some(&a) = a {
                    *size_i.entry(a).or_default() += 1;
                }
                if let Some(&b) = b {
                    *size_j.entry(b).or_default() += 1;
                }
                if let (Some(&a), Some(&b)) = (a, b) {
                    *joint.entry((a, b)).or_default() += 1;
                }
            }
            for (&(a, b), &c) in &joint {
                let jac = c as f64 / (size_i[&a] + size_j[&b] - c) as f64;
                if jac >= JACCARD_THRESHOLD {
                    uf.union(index[&(i, a)], index[&(j, b)]);
                }
            }
        }
    }

    let mut global: HashMap<usize, u32> = HashMap::new();
    let mut ids: HashMap<(usize, u32), u32> = HashMap::new();
    for (k, &node) in nodes.iter().enumerate() {
        let root = uf.find(k);
        let next = global.len() as u32;
        let id = *global.entry(root).or_insert(next);
        ids.insert(node, id);
    }
    Ok(views
        .iter()
        .enumerate()
        .map(|(vi, v)| ViewLabels {
            camera: v.camera,
            labels: v
                .labels
                .iter()
                .map(|&l| if l == UNLABELED { UNLABELED } else { ids[&(vi, l)] })
                .collect(),
        })
        .collect())
}

#[derive(Default, Clone, Copy)]
struct Tally {
    votes: u64,
    first_view: usize,
}

/// Fuses aligned per-view labels into a per-face mask by pixel voting.
pub fn fuse_mask(mesh: &TriMesh, views: &[ViewLabels], exec: Exec) -> Result<SemanticMask3D> {
    vote_face_labels(mesh, views, exec).map(|l| SemanticMask3D::from_labels(&l))
}

/// Winning label per face, in the input label space, with unseen faces
/// filled.
pub fn vote_face_labels(mesh: &TriMesh, views: &[ViewLabels], exec: Exec) -> Result<Vec<u32>> {
    for v in views {
        v.validate()?;
    }
    let per_view: Vec<HashMap<(u32, u32), u64>> = exec.map(views.len(), |vi| {
        let g = face_buffer(mesh, &views[vi].camera, Exec::Sequential);
        let mut counts = HashMap::new();
        for i in g.covered_indices() {
            let l = views[vi].labels[i];
            if l != UNLABELED {
                *counts.entry((g.face_id[i], l)).or_default() += 1;
            }
        }
        counts
    });

    let n = mesh.triangles.len();
    let mut tallies: Vec<BTreeMap<u32, Tally>> = vec![BTreeMap::new(); n];
    for (vi, counts) in per_view.iter().enumerate() {
        for (&(f, l), &c) in counts {
            let t = tallies[f as usize].entry(l).or_insert(Tally { votes: 0, first_view: vi });
            t.votes += c;
            t.first_view = t.first_view.min(vi);
        }
    }

    let mut labels: Vec<u32> = tallies
        .iter()
        .map(|t| {
            t.iter()
                .min_by(|(la, a), (lb, b)| {
                    b.votes
                        .cmp(&a.votes)
                        .then(a.first_view.cmp(&b.first_view))
                        .then(la.cmp(lb))
                })
                .map_or(UNLABELED, |(&l, _)| l)
        })
        .collect();
    if labels.iter().all(|&l| l == UNLABELED) {
        return Err(Error::EmptyMask);
    }
    fill_unlabeled(mesh, &mut labels);
    Ok(labels)
}

/// Multi-source breadth-first fill over edge adjacency. Faces in components
/// with no labeled face take the most common label.
fn fill_unlabeled(mesh: &TriMesh, labels: &mut [u32]) {
    if labels.iter().all(|&l| l != UNLABELED) {
        return;
    }
    let adj = mesh.edge_adjacency();
    let mut queue: VecDeque<usize> = (0..labels.len()).filter(|&f| labels[f] != UNLABELED).collect();
    while let Some(f) = queue.pop_front() {
        for &g in &adj[f] {
            let g = g as usize;
            if labels[g] == UNLABELED {
                labels[g] = labels[f];
                queue.push_back(g);
            }
        }
    }
    let mut freq: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in labels.iter().filter(|&&l| l != UNLABELED) {
        *freq.entry(l).or_default() += 1;
    }
    let common = freq
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&l, _)| l)
        .unwrap_or(0);
    for l in labels.iter_mut().filter(|l| **l == UNLABELED) {
        *l = common;
    }
}

/// k-means over covered-pixel albedo, as a stand-in for a learned segmenter.
/// Deterministic for a fixed seed.
pub fn fallback_segment(g: &GBuffer, k: usize, seed: u64) -> Result<ViewLabels> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let idx: Vec<usize> = g.covered_indices().collect();
    if idx.is_empty() {
        return Err(Error::invalid("view has no covered pixels"));
    }
    let colors: Vec<[f64; 3]> = idx.iter().map(|&i| g.albedo[i]).collect();
    let distinct: HashSet<[u64; 3]> = colors.iter().map(|c| c.map(f64::to_bits)).collect();
    if k > distinct.len() {
        return Err(Error::KTooLarge { k, distinct: distinct.len() });
    }
    let assign = kmeans(&colors, k, seed);
    let mut labels = vec![UNLABELED; g.len()];
    for (&i, &a) in idx.iter().zip(&assign) {
        labels[i] = a;
    }
    Ok(ViewLabels { camera: g.camera, labels })
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

fn kmeans(points: &[[f64; 3]], k: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // k-means++ seeding.
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut d: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &w) in d.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[next]);
        for (di, p) in d.iter_mut().zip(points) {
            *di = di.min(dist2(p, &centers[centers.len() - 1]));
        }
    }
    let mut assign = vec![u32::MAX; points.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (a, p) in assign.iter_mut().zip(points) {
            let best = (0..k)
                .min_by(|&i, &j| dist2(p, &centers[i]).total_cmp(&dist2(p, &centers[j])))
                .unwrap() as u32;
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![[0.0; 3]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assign.iter().zip(points) {
            counts[a as usize] += 1;
            for c in 0..3 {
                sums[a as usize][c] += p[c];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].map(|s| s / counts[c] as f64);
            } else {
                // Re-seed an empty cluster at the worst-fit point.
                let far = (0..points.len())
                    .max_by(|&i, &j| {
                        dist2(&points[i], &centers[assign[i] as usize])
                            .total_cmp(&dist2(&points[j], &centers[assign[j] as usize]))
                    })
                    .unwrap();
                centers[c] = points[far];
            }
        }
    }
    assign
}

#[derive(Serialize, Deserialize)]
struct CameraList(Vec<Camera>);

pub fn load_cameras(path: &Path) -> Result<Vec<Camera>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let cams: Vec<Camera> = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    for c in &cams {
        c.validate()?;
    }
    Ok(cams)
}

pub fn save_cameras(path: &Path, cams: &[Camera]) -> Result<()> {
    let text = serde_json::to_string_pretty(&CameraList(cams.to_vec())).expect("cameras serialize");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads `cameras.json` plus `view_{i}.png` (16-bit: 0 = unlabeled,
/// v > 0 = label v - 1).
pub fn load_view_labels(dir: &Path) -> Result<Vec<ViewLabels>> {
    let cams = load_cameras(&dir.join("cameras.json"))?;
    cams.into_iter()
        .enumerate()
        .map(|(i, camera)| {
            let path = dir.join(format!("view_{i}.png"));
            if !path.exists() {
                return Err(Error::MissingTargetView(i));
            }
            let (w, h, values) = load_gray16(&path)?;
            if (w, h) != (camera.width, camera.height) {
                return Err(Error::invalid(format!(
                    "{}: {w}x{h} does not match camera {}x{}",
                    path.display(),
                    camera.width,
                    camera.height
                )));
            }
            let labels = values
                .into_iter()
                .map(|v| if v == 0 { UNLABELED } else { v as u32 - 1 })
                .collect();
            Ok(ViewLabels { camera, labels })
        })
        .collect()
}

pub fn save_view_labels(dir: &Path, views: &[ViewLabels]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_cameras(&dir.join("cameras.json"), &views.iter().map(|v| v.camera).collect::<Vec<_>>())?;
    for (i, v) in views.iter().enumerate() {
        let values: Vec<u16> = v
            .labels
            .iter()
            .map(|&l| if l == UNLABELED { 0 } else { (l + 1).min(u16::MAX as u32) as u16 })
            .collect();
        save_gray16(&dir.join(format!("view_{i}.png")), v.camera.width, v.camera.height, &values)?;
    }
    Ok(())
}

/// Renders ground-truth label maps for a mesh whose faces carry segment ids.
pub fn render_face_labels(mesh: &TriMesh, segments: &[u32], cam: &Camera, exec: Exec) -> ViewLabels {
    let g = face_buffer(mesh, cam, exec);
    ViewLabels {
        camera: *cam,
        labels: g
            .face_id
            .iter()
            .map(|&f| if f == EMPTY { UNLABELED } else { segments[f as usize] })
            .collect(),
    }
}
