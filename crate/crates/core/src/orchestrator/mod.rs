//! Pipeline driver: configuration, seeded parallel Stage-1 generation,
//! verification of output trees and the FID entry point.

use std::path::PathBuf;

use thiserror::Error;

mod config;
mod evaluate;
pub mod seed;
mod stage1;
mod verify;

pub use config::{ConfigError, PipelineConfig};
pub use evaluate::{fid_command, sibling_emb1, FidReport};
pub use stage1::{load_patients, run_stage1, Summary};
pub use verify::{case_dirs, verify, Violation, ViolationKind, VerifyReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Manifest(#[from] crate::manifest::ManifestError),
    #[error(transparent)]
    Plan(#[from] crate::manifest::PlanError),
    #[error(transparent)]
    Edge(#[from] crate::edge_detect::EdgeError),
    #[error(transparent)]
    Fid(#[from] crate::fid::FidError),
    #[error("mixed embedding inputs: real has d={real_d}, fake has d={fake_d}")]
    MixedInput { real_d: usize, fake_d: usize },
    #[error("{0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
