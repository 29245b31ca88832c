//! Library side of the `bonescan` binary: corpus generation, verification,
//! benchmark reports, and skinning, all callable from tests.

use thiserror::Error;

pub mod commands;
pub mod corpus;
pub mod report;

pub use commands::{
    cmd_bench, cmd_generate, cmd_skin, cmd_verify, parse_algorithms, BenchOpts, GenerateOpts,
    Outcome, ReportFormat, SkinOpts, VerifyOpts,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    File(#[from] bonescan::io::FileError),
    #[error(transparent)]
    Scan(#[from] bonescan::ScanError),
    #[error(transparent)]
    Pose(#[from] bonescan::PoseError),
    #[error(transparent)]
    Skeleton(#[from] bonescan::SkeletonError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Spec(String),
}
