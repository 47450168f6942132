//! Experiment harness: loss-pattern application, concealment runs for every
//! algorithm, pooled PSNR and report files.

pub mod config;
pub mod psnr;
pub mod report;
pub mod run;
pub mod synth;

use thiserror::Error;

use crate::conceal::ConcealError;
use crate::loss::LossError;
use crate::video_io::VideoIoError;

pub use config::{ExperimentConfig, SequenceSource};
pub use psnr::{block_psnr, psnr_lost_pixels, Psnr};
pub use run::{run_experiment, CellResult, ExperimentReport, SweepRow, TraceRow};
pub use synth::{SynthSpec, Texture};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("bad value '{value}' for '{key}'")]
    BadValue { key: String, value: String },
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error("no lost pixels to measure")]
    NoLostPixels,
    #[error("synthetic sequence: {0}")]
    Synth(String),
    #[error(transparent)]
    Video(#[from] VideoIoError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Conceal(#[from] ConcealError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}
