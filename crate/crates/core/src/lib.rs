//! Post-processing toolkit that upgrades a textured triangle mesh with
//! physically-based materials and refined normals.
//!
//! The crate is organized by pipeline stage:
//!
//! * [`mesh`], [`obj`], [`camera`], [`texture`]: shared geometry and raster types.
//! * [`raster`], [`uvraster`]: screen-space G-buffer rasterization and UV-space baking.
//! * [`shading`]: Cook-Torrance GGX metallic-roughness relighting.
//! * [`mask`]: multi-view label fusion into a per-face semantic mask.
//! * [`material`]: per-segment roughness/metalness tables and UV bakes.
//! * [`refine`]: hash-grid bump field, normal oracle and iterative refinement.
//! * [`gltf`]: glTF 2.0 export with metallic-roughness packing.
//!
//! Data-parallel loops go through [`exec::Exec`], which runs on rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

pub mod camera;
pub mod error;
pub mod exec;
pub mod fixtures;
pub mod gltf;
pub mod mask;
pub mod material;
pub mod mesh;
pub mod obj;
pub mod pipeline;
pub mod raster;
pub mod refine;
pub mod shading;
pub mod texture;
pub mod uvraster;

pub use camera::{Camera, CameraKind, ViewProjection};
pub use error::{Error, Result};
pub use exec::Exec;
pub use mesh::{Triangle, TriMesh};
pub use raster::{GBuffer, RasterOptions};
pub use texture::TextureMap;

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
