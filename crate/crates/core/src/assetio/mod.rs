//! On-disk formats: OBJ meshes in, labeled binary PLY scenes and JSON
//! manifests out.

mod labels;
mod manifest;
mod obj;
mod ply;
mod sample;

pub use labels::{ClassEntry, LabelMap};
pub use manifest::{read_manifest, write_manifest, ManifestEntry, PoolManifest, StageRecord};
pub use obj::{parse_obj, write_obj, MeshAsset};
pub use ply::{read_scene_ply, write_scene_ply, write_scene_sidecar, SceneFile, SceneMeta};
pub use sample::{sample_mesh, DEFAULT_POINTS_PER_OBJECT};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssetIoError {
    #[error("line {line}: {msg}")]
    Obj { line: usize, msg: String },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh has no face with nonzero area")]
    DegenerateMesh,
    #[error("PLY parse error: {0}")]
    Ply(String),
    #[error("{what} value {value} exceeds 65535")]
    LabelRange { what: &'static str, value: u32 },
    #[error("scene labels inconsistent: {0}")]
    SceneInvariant(String),
    #[error("invalid metadata: {0}")]
    Metadata(String),
    #[error("manifest validation: {0}")]
    Validation(String),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
