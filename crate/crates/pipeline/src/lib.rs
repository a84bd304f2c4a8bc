//! Orchestration for the virtfusion generator: prompts → images → depth →
//! textures → drags → meshes → pool → scenes, with each generative stage
//! served by a mock, a subprocess or an HTTP endpoint and every result
//! kept in a content-addressed cache.

pub mod cache;
pub mod config;
pub mod hash;
pub mod image;
pub mod mock;
pub mod run;
pub mod stage;

pub use cache::{Artifact, ArtifactRecord, ArtifactStore};
pub use config::{Counts, DragSettings, PipelineConfig};
pub use run::{run_class, run_full, AcceptAll, ClassOutcome, Failure, RejectionHook, RunCounters, RunSummary, Runner};
pub use stage::{call_stage, ServiceEndpoint, StageError, StageKind, StageRequest, Transport};

use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Asset(#[from] virtfusion_core::assetio::AssetIoError),
    #[error(transparent)]
    Compose(#[from] virtfusion_core::composer::ComposeError),
    #[error("class {class:?}: {message}")]
    Class { class: String, message: String },
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
