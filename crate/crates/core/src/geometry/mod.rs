//! Scene geometry: analytic primitives, meshing into facets, the reference
//! shield/bench scene and its file format.

mod bvh;
mod file;
mod primitive;
mod reference;
mod scene;
mod vec3;

pub use bvh::{Bvh, Hit};
pub use file::SceneFile;
pub use primitive::{
    mesh_primitive, CoatingPatch, Facet, MeshDensity, Shape, Side, SideProperties, SurfacePrimitive,
};
pub use reference::{
    build_reference_scene, derive_shield_stack, nodes, LensLayout, SceneLayout, ShieldFinish,
    ShieldParams, ShieldPlacement,
};
pub use scene::MeshedScene;
pub use vec3::Vec3;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("emissivity {0} outside [0, 1]")]
    InvalidEmissivity(f64),
    #[error("coating fraction {0} outside [0, 1]")]
    InvalidCoatingFraction(f64),
    #[error("facet vertices are not coplanar")]
    NonCoplanar,
    #[error("scene has no facets")]
    EmptyScene,
    #[error("primitive {0} has no node assignment")]
    MissingNode(usize),
    #[error("facets interpenetrate: {a} and {b}")]
    Interpenetration { a: String, b: String },
    #[error("invalid shield parameters: {0}")]
    InvalidShieldParams(String),
    #[error("shield {shield} (phi = {phi_deg:.3} deg, d = {d:.4} m) collides with the bench")]
    ShieldCollision { shield: usize, phi_deg: f64, d: f64 },
    #[error("scene file: {0}")]
    File(String),
}
