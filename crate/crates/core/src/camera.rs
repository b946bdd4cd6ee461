//! Orbit cameras looking at the origin.
//!
//! A camera sits on a sphere around the origin at the given azimuth and
//! elevation. Azimuth 0 / elevation 0 places it on +Z, azimuth 90 on +X and
//! elevation 90 on +Y. The image "up" direction is the derivative of the
//! camera position with respect to elevation, so the frame stays well defined
//! at the poles (the top view has up = -Z).

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CameraKind {
    Orthographic,
    Perspective,
}

fn default_distance() -> f64 {
    3.0
}
fn default_ortho_scale() -> f64 {
    1.1
}
fn default_fov() -> f64 {
    40.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub kind: CameraKind,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    /// Eye distance from the origin. Perspective only.
    #[serde(default = "default_distance")]
    pub distance: f64,
    /// Half-height of the orthographic view box. Orthographic only.
    #[serde(default = "default_ortho_scale")]
    pub ortho_scale: f64,
    /// Vertical field of view. Perspective only.
    #[serde(default = "default_fov")]
    pub fov_deg: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub const MIN_SIZE: u32 = 16;

    pub fn orthographic(azimuth_deg: f64, elevation_deg: f64, ortho_scale: f64, size: u32) -> Self {
        Camera {
            kind: CameraKind::Orthographic,
            azimuth_deg,
            elevation_deg,
            distance: default_distance(),
            ortho_scale,
            fov_deg: default_fov(),
            width: size,
            height: size,
        }
    }

    pub fn perspective(azimuth_deg: f64, elevation_deg: f64, distance: f64, size: u32) -> Self {
        Camera {
            kind: CameraKind::Perspective,
            azimuth_deg,
            elevation_deg,
            distance,
            ortho_scale: default_ortho_scale(),
            fov_deg: default_fov(),
            width: size,
            height: size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < Self::MIN_SIZE || self.height < Self::MIN_SIZE {
            return Err(Error::invalid(format!(
                "camera size {}x{} below minimum {}",
                self.width,
                self.height,
                Self::MIN_SIZE
            )));
        }
        let ok = match self.kind {
            CameraKind::Orthographic => self.ortho_scale > 0.0 && self.ortho_scale.is_finite(),
            CameraKind::Perspective => {
                self.distance > 0.0 && self.fov_deg > 0.0 && self.fov_deg < 180.0
            }
        };
        if !ok || !self.azimuth_deg.is_finite() || !self.elevation_deg.is_finite() {
            return Err(Error::invalid("camera parameters out of range"));
        }
        Ok(())
    }

    /// Unit vector from the origin toward the camera.
    pub fn direction(&self) -> Vec3 {
        let (sa, ca) = self.azimuth_deg.to_radians().sin_cos();
        let (se, ce) = self.elevation_deg.to_radians().sin_cos();
        Vec3::new(ce * sa, se, ce * ca)
    }

    pub fn matrices(&self) -> ViewProjection {
        camera_matrices(self)
    }
}

/// Resolved camera frame plus projection to pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewProjection {
    pub kind: CameraKind,
    pub eye: Vec3,
    /// Viewing direction (from the camera into the scene).
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub width: u32,
    pub height: u32,
    /// Orthographic half-height, or `tan(fov/2)` for perspective.
    half_extent: f64,
    aspect: f64,
}

pub const NEAR_PLANE: f64 = 1e-3;

pub fn camera_matrices(cam: &Camera) -> ViewProjection {
    let dir = cam.direction();
    let (sa, ca) = cam.azimuth_deg.to_radians().sin_cos();
    let (se, ce) = cam.elevation_deg.to_radians().sin_cos();
    let up = Vec3::new(-se * sa, ce, -se * ca);
    let forward = -dir;
    let right = forward.cross(&up);
    let (eye, half_extent) = match cam.kind {
        CameraKind::Orthographic => (Vec3::zeros(), cam.ortho_scale),
        CameraKind::Perspective => (dir * cam.distance, (cam.fov_deg.to_radians() * 0.5).tan()),
    };
    ViewProjection {
        kind: cam.kind,
        eye,
        forward,
        right,
        up,
        width: cam.width,
        height: cam.height,
        half_extent,
        aspect: cam.width as f64 / cam.height as f64,
    }
}

impl ViewProjection {
    /// Projects a world point to `(x_pixel, y_pixel, depth)`, with pixel
    /// `(0, 0)` at the top-left corner and depth measured along `forward`.
    pub fn project(&self, p: &Vec3) -> Vec3 {
        let d = p - self.eye;
        let x = d.dot(&self.right);
        let y = d.dot(&self.up);
        let z = d.dot(&self.forward);
        let (nx, ny) = match self.kind {
            CameraKind::Orthographic => (
                x / (self.half_extent * self.aspect),
                y / self.half_extent,
            ),
            CameraKind::Perspective => {
                let s = z * self.half_extent;
                (x / (s * self.aspect), y / s)
            }
        };
        Vec3::new(
            (nx + 1.0) * 0.5 * self.width as f64,
            (1.0 - ny) * 0.5 * self.height as f64,
            z,
        )
    }

    /// Unit vector from `p` toward the viewer.
    pub fn to_viewer(&self, p: &Vec3) -> Vec3 {
        match self.kind {
            CameraKind::Orthographic => -self.forward,
            CameraKind::Perspective => (self.eye - p).normalize(),
        }
    }

    /// World-to-clip matrix (right-handed, OpenGL-style clip space with
    /// `near`/`far` planes) for interop.
    pub fn matrix(&self, near: f64, far: f64) -> Matrix4<f64> {
        let view = Matrix4::new(
            self.right.x, self.right.y, self.right.z, -self.right.dot(&self.eye),
            self.up.x, self.up.y, self.up.z, -self.up.dot(&self.eye),
            -self.forward.x, -self.forward.y, -self.forward.z, self.forward.dot(&self.eye),
            0.0, 0.0, 0.0, 1.0,
        );
        let proj = match self.kind {
            CameraKind::Orthographic => {
                let h = self.half_extent;
                Matrix4::new_orthographic(-h * self.aspect, h * self.aspect, -h, h, near, far)
            }
            CameraKind::Perspective => Matrix4::new_perspective(
                self.aspect,
                2.0 * self.half_extent.atan(),
                near,
                far,
            ),
        };
        proj * view
    }
}
