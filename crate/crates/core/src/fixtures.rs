//! Procedural meshes used by tests, benches and the demo commands.

use std::f64::consts::PI;

use crate::mesh::{TriMesh, Triangle};
use crate::{Vec2, Vec3};

/// Square in the z = 0 plane facing +Z, spanning `[-half, half]²`.
pub fn quad(half: f64) -> TriMesh {
    let positions = vec![
        Vec3::new(-half, -half, 0.0),
        Vec3::new(half, -half, 0.0),
        Vec3::new(half, half, 0.0),
        Vec3::new(-half, half, 0.0),
    ];
    let uvs = vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(1.0, 0.0),
        Vec2::new(1.0, 1.0),
        Vec2::new(0.0, 1.0),
    ];
    TriMesh {
        positions,
        uvs,
        normals: vec![Vec3::z()],
        triangles: vec![
            Triangle { p: [0, 1, 2], t: [0, 1, 2], n: [0, 0, 0] },
            Triangle { p: [0, 2, 3], t: [0, 2, 3], n: [0, 0, 0] },
        ],
        face_segments: None,
    }
}

/// Axis-aligned cube `[-1, 1]³` with 12 outward-facing triangles and
/// area-weighted corner normals.
pub fn cube() -> TriMesh {
    let positions: Vec<Vec3> = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { -1.0 } else { 1.0 },
                if i & 2 == 0 { -1.0 } else { 1.0 },
                if i & 4 == 0 { -1.0 } else { 1.0 },
            )
        })
        .collect();
    // Each face as a counter-clockwise quad seen from outside.
    let faces = [
        [4, 5, 7, 6], // +z
        [1, 0, 2, 3], // -z
        [5, 1, 3, 7], // +x
        [0, 4, 6, 2], // -x
        [6, 7, 3, 2], // +y
        [0, 1, 5, 4], // -y
    ];
    let uvs = vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(1.0, 0.0),
        Vec2::new(1.0, 1.0),
        Vec2::new(0.0, 1.0),
    ];
    let mut triangles = Vec::new();
    for q in faces {
        triangles.push(Triangle { p: [q[0], q[1], q[2]], t: [0, 1, 2], n: [0, 0, 0] });
        triangles.push(Triangle { p: [q[0], q[2], q[3]], t: [0, 2, 3], n: [0, 0, 0] });
    }
    let mut m = TriMesh {
        positions,
        uvs,
        normals: vec![],
        triangles,
        face_segments: None,
    };
    m.recompute_normals();
    m
}

/// Latitude/longitude sphere. UVs are an equirectangular atlas with a
/// duplicated seam column, so no two triangles overlap in UV space.
/// Triangle count is `2 * segments * (rings - 1)`.
pub fn uv_sphere(segments: u32, rings: u32, radius: f64) -> TriMesh {
    radial_sphere(segments, rings, |d| d * radius)
}

/// [`uv_sphere`] whose radius is modulated by a smooth bump pattern:
/// `r(d) = 1 + amplitude * sin(f d.x) sin(f d.y) sin(f d.z)`.
pub fn bumpy_sphere(segments: u32, rings: u32, amplitude: f64, frequency: f64) -> TriMesh {
    radial_sphere(segments, rings, |d| d * bumpy_radius(&d, amplitude, frequency))
}

pub fn bumpy_radius(d: &Vec3, amplitude: f64, frequency: f64) -> f64 {
    1.0 + amplitude * (frequency * d.x).sin() * (frequency * d.y).sin() * (frequency * d.z).sin()
}

fn radial_sphere(segments: u32, rings: u32, place: impl Fn(Vec3) -> Vec3) -> TriMesh {
    assert!(segments >= 3 && rings >= 2);
    let dir = |ring: u32, seg: u32| {
        let theta = PI * ring as f64 / rings as f64;
        let phi = 2.0 * PI * seg as f64 / segments as f64;
        Vec3::new(theta.sin() * phi.sin(), theta.cos(), theta.sin() * phi.cos())
    };
    // Positions: north pole, interior rings (segments each), south pole.
    let mut positions = vec![place(Vec3::y())];
    for r in 1..rings {
        for s in 0..segments {
            positions.push(place(dir(r, s)));
        }
    }
    positions.push(place(-Vec3::y()));
    let south = positions.len() as u32 - 1;
    let pos = |r: u32, s: u32| -> u32 {
        if r == 0 {
            0
        } else if r == rings {
            south
        } else {
            1 + (r - 1) * segments + (s % segments)
        }
    };
    // UV grid has segments + 1 columns so the seam is split.
    let cols = segments + 1;
    let mut uvs = Vec::new();
    for r in 0..=rings {
        for s in 0..=segments {
            let u = if r == 0 || r == rings {
                (s as f64 + 0.5) / segments as f64
            } else {
                s as f64 / segments as f64
            };
            uvs.push(Vec2::new(u.min(1.0), 1.0 - r as f64 / rings as f64));
        }
    }
    let uv = |r: u32, s: u32| r * cols + s;

    let mut triangles = Vec::new();
    for r in 0..rings {
        for s in 0..segments {
            let (a, b, c, d) = ((r, s), (r + 1, s), (r + 1, s + 1), (r, s + 1));
            let mut push = |x: (u32, u32), y: (u32, u32), z: (u32, u32)| {
                let p = [pos(x.0, x.1), pos(y.0, y.1), pos(z.0, z.1)];
                triangles.push(Triangle {
                    p,
                    t: [uv(x.0, x.1), uv(y.0, y.1), uv(z.0, z.1)],
                    n: p,
                });
            };
            if r == 0 {
                push(a, b, c);
            } else if r == rings - 1 {
                push(a, b, d);
            } else {
                push(a, b, c);
                push(a, c, d);
            }
        }
    }
    let mut m = TriMesh {
        positions,
        uvs,
        normals: vec![],
        triangles,
        face_segments: None,
    };
    m.recompute_normals();
    m
}

/// Subdivided icosahedron on the unit sphere (`20 * 4^subdivisions`
/// triangles) with analytic normals and spherical-projection UVs.
pub fn icosphere(subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut positions: Vec<Vec3> = [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache = std::collections::HashMap::new();
        let mut midpoint = |a: u32, b: u32, positions: &mut Vec<Vec3>| -> u32 {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                positions.push(((positions[a as usize] + positions[b as usize]) * 0.5).normalize());
                positions.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut positions);
            let bc = midpoint(b, c, &mut positions);
            let ca = midpoint(c, a, &mut positions);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let uvs = positions
        .iter()
        .map(|p| {
            Vec2::new(
                (0.5 + p.x.atan2(p.z) / (2.0 * PI)).clamp(0.0, 1.0),
                (0.5 + p.y.clamp(-1.0, 1.0).asin() / PI).clamp(0.0, 1.0),
            )
        })
        .collect();
    TriMesh {
        normals: positions.clone(),
        positions,
        uvs,
        triangles: faces.into_iter().map(|p| Triangle { p, t: p, n: p }).collect(),
        face_segments: None,
    }
}

/// Segment id per triangle from the height of its centroid, splitting
/// `[-1, 1]` into `parts` equal bands (band 0 at the bottom).
pub fn height_bands(mesh: &TriMesh, parts: u32) -> Vec<u32> {
    (0..mesh.triangles.len())
        .map(|f| {
            let [a, b, c] = mesh.corners(f);
            let y = (a.y + b.y + c.y) / 3.0;
            let band = ((y + 1.0) / 2.0 * parts as f64).floor() as i64;
            band.clamp(0, parts as i64 - 1) as u32
        })
        .collect()
}

/// Three triangles forming a small fan around the origin, used for gradient
/// checks.
pub fn micro_mesh() -> TriMesh {
    let positions = vec![
        Vec3::new(0.0, 0.0, 0.1),
        Vec3::new(0.8, -0.2, 0.0),
        Vec3::new(0.3, 0.7, -0.1),
        Vec3::new(-0.6, 0.4, 0.05),
        Vec3::new(-0.2, -0.7, 0.0),
    ];
    let uvs = positions
        .iter()
        .map(|p| Vec2::new(0.5 + p.x * 0.5, 0.5 + p.y * 0.5))
        .collect();
    let mut m = TriMesh {
        positions,
        uvs,
        normals: vec![],
        triangles: [[0, 1, 2], [0, 2, 3], [0, 3, 4]]
            .into_iter()
            .map(|p| Triangle { p, t: p, n: p })
            .collect(),
        face_segments: None,
    };
    m.recompute_normals();
    m
}
