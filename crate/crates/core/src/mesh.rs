//! Indexed triangle mesh with separate position/UV/normal index streams.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::{Vec2, Vec3};

/// One triangle. Each corner carries its own position, UV and normal index,
/// as in Wavefront OBJ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    pub p: [u32; 3],
    pub t: [u32; 3],
    pub n: [u32; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub positions: Vec<Vec3>,
    pub uvs: Vec<Vec2>,
    pub normals: Vec<Vec3>,
    pub triangles: Vec<Triangle>,
    pub face_segments: Option<Vec<u32>>,
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    /// Grows the box by `frac` of its largest extent on every side.
    pub fn padded(&self, frac: f64) -> Aabb {
        let pad = self.extent().max().max(1e-9) * frac;
        let d = Vec3::repeat(pad);
        Aabb {
            min: self.min - d,
            max: self.max + d,
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

impl TriMesh {
    /// Checks index ranges, unit normals, UV range and segment count.
    pub fn validate(&self) -> Result<()> {
        for (fi, tri) in self.triangles.iter().enumerate() {
            let ok = tri.p.iter().all(|&i| (i as usize) < self.positions.len())
                && tri.t.iter().all(|&i| (i as usize) < self.uvs.len())
                && tri.n.iter().all(|&i| (i as usize) < self.normals.len());
            if !ok {
                return Err(Error::invalid(format!("triangle {fi} has an out-of-range index")));
            }
        }
        if let Some((i, n)) = self
            .normals
            .iter()
            .enumerate()
            .find(|(_, n)| (n.norm() - 1.0).abs() > 1e-4)
        {
            return Err(Error::invalid(format!("normal {i} has length {}", n.norm())));
        }
        if let Some(i) = self
            .uvs
            .iter()
            .position(|uv| !(0.0..=1.0).contains(&uv.x) || !(0.0..=1.0).contains(&uv.y))
        {
            return Err(Error::invalid(format!("uv {i} outside [0,1]")));
        }
        if let Some(seg) = &self.face_segments {
            if seg.len() != self.triangles.len() {
                return Err(Error::invalid("face_segments length differs from triangle count"));
            }
        }
        Ok(())
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn bounds(&self) -> Aabb {
        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for p in &self.positions {
            min = min.inf(p);
            max = max.sup(p);
        }
        Aabb { min, max }
    }

    /// Corner positions of triangle `f`.
    pub fn corners(&self, f: usize) -> [Vec3; 3] {
        let t = &self.triangles[f];
        t.p.map(|i| self.positions[i as usize])
    }

    pub fn corner_uvs(&self, f: usize) -> [Vec2; 3] {
        let t = &self.triangles[f];
        t.t.map(|i| self.uvs[i as usize])
    }

    pub fn corner_normals(&self, f: usize) -> [Vec3; 3] {
        let t = &self.triangles[f];
        t.n.map(|i| self.normals[i as usize])
    }

    /// Unnormalized geometric normal (twice the area, counter-clockwise winding).
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.corners(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        let n = self.face_cross(f);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec3::z()
        }
    }

    /// Replaces the normal stream with area-weighted vertex normals, one per
    /// position.
    pub fn recompute_normals(&mut self) {
        let mut acc = vec![Vec3::zeros(); self.positions.len()];
        for f in 0..self.triangles.len() {
            let n = self.face_cross(f);
            for &i in &self.triangles[f].p {
                acc[i as usize] += n;
            }
        }
        self.normals = acc
            .into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vec3::z()
                }
            })
            .collect();
        for t in &mut self.triangles {
            t.n = t.p;
        }
    }

    /// World-space tangent (direction of increasing u) of triangle `f`, or
    /// `None` when its UV mapping is degenerate.
    pub fn face_tangent(&self, f: usize) -> Option<Vec3> {
        let [p0, p1, p2] = self.corners(f);
        let [t0, t1, t2] = self.corner_uvs(f);
        let e1 = p1 - p0;
        let e2 = p2 - p0;
        let d1 = t1 - t0;
        let d2 = t2 - t0;
        let det = d1.x * d2.y - d2.x * d1.y;
        if det.abs() < 1e-14 {
            return None;
        }
        let t = (e1 * d2.y - e2 * d1.y) / det;
        let len = t.norm();
        (len > 1e-14).then(|| t / len)
    }

    /// Triangles sharing an edge (by position index) with each triangle.
    pub fn edge_adjacency(&self) -> Vec<Vec<u32>> {
        let mut edges: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for (f, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let a = t.p[k];
                let b = t.p[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                edges.entry(key).or_default().push(f as u32);
            }
        }
        let mut adj = vec![Vec::new(); self.triangles.len()];
        for faces in edges.values() {
            for &a in faces {
                for &b in faces {
                    if a != b {
                        adj[a as usize].push(b);
                    }
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Copy translated so the bounding-box center sits at the origin.
    pub fn centered(&self) -> TriMesh {
        let c = self.bounds().center();
        let mut out = self.clone();
        for p in &mut out.positions {
            *p -= c;
        }
        out
    }

    /// Largest distance from the bounding-box center to a vertex.
    pub fn radius(&self) -> f64 {
        let c = self.bounds().center();
        self.positions
            .iter()
            .map(|p| (p - c).norm())
            .fold(0.0, f64::max)
    }
}

/// Right-handed orthonormal frame `(t, b, n)` around unit `n`, using
/// `tangent` when usable and a global up vector otherwise.
pub fn tangent_frame(n: &Vec3, tangent: Option<&Vec3>) -> (Vec3, Vec3) {
    let project = |v: &Vec3| {
        let t = v - n * n.dot(v);
        let len = t.norm();
        (len > 1e-8).then(|| t / len)
    };
    let t = tangent
        .and_then(project)
        .or_else(|| project(&Vec3::y().cross(n)))
        .or_else(|| project(&Vec3::x().cross(n)))
        .unwrap_or_else(Vec3::x);
    let b = n.cross(&t);
    (t, b)
}
