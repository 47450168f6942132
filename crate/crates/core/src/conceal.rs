//! Sequence-level concealment with any of the five algorithms.
//!
//! Blocks are processed in a fixed order (ascending frame, then raster
//! position). Each concealed block is written back and marked available so
//! that later blocks can use it as support.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::baselines::{self, BaselineError};
use crate::fse::{self, FseConfig, FseError, FseModel};
use crate::loss::{LossBlock, LossError, LossMask};
use crate::motion::{self, MotionVectorSet, ReliabilityVerdict};
use crate::video_io::Sequence;
use crate::volume::{self, plane_offsets, ExtrapolationVolume, VolumeError, VolumeShape};

#[derive(Debug, Error, PartialEq)]
pub enum ConcealError {
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Fse(#[from] FseError),
    #[error("{block} is not marked lost")]
    NotLost { block: LossBlock },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Tr,
    Ebma,
    Dmve,
    Fse3d,
    Mcfse,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Tr,
        Algorithm::Ebma,
        Algorithm::Dmve,
        Algorithm::Fse3d,
        Algorithm::Mcfse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Tr => "TR",
            Algorithm::Ebma => "EBMA",
            Algorithm::Dmve => "DMVE",
            Algorithm::Fse3d => "3D-FSE",
            Algorithm::Mcfse => "MC-FSE",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Algorithm::Tr => "tr",
            Algorithm::Ebma => "ebma",
            Algorithm::Dmve => "dmve",
            Algorithm::Fse3d => "fse3d",
            Algorithm::Mcfse => "mcfse",
        }
    }

    pub fn uses_fse(self) -> bool {
        matches!(self, Algorithm::Fse3d | Algorithm::Mcfse)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "tr" => Ok(Algorithm::Tr),
            "ebma" => Ok(Algorithm::Ebma),
            "dmve" => Ok(Algorithm::Dmve),
            "fse3d" | "3dfse" | "fse" => Ok(Algorithm::Fse3d),
            "mcfse" => Ok(Algorithm::Mcfse),
            _ => Err(format!("unknown algorithm {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcealConfig {
    pub algorithm: Algorithm,
    pub n_prev: usize,
    pub n_next: usize,
    /// Width of the spatial support band around the block in the volume.
    pub border: usize,
    /// Width of the motion decision area.
    pub band_width: usize,
    pub d_max: usize,
    pub t_abs: f64,
    pub t_rel: f64,
    /// Boundary width for EBMA.
    pub ebma_boundary: usize,
    pub fse: FseConfig,
}

impl Default for ConcealConfig {
    fn default() -> Self {
        ConcealConfig {
            algorithm: Algorithm::Mcfse,
            n_prev: 2,
            n_next: 2,
            border: 16,
            band_width: 4,
            d_max: 16,
            t_abs: 100.0,
            t_rel: 3.0,
            ebma_boundary: 1,
            fse: FseConfig::default(),
        }
    }
}

impl ConcealConfig {
    pub fn with_algorithm(&self, algorithm: Algorithm) -> Self {
        ConcealConfig {
            algorithm,
            ..self.clone()
        }
    }

    pub fn volume_shape(&self) -> VolumeShape {
        VolumeShape {
            n_prev: self.n_prev,
            n_next: self.n_next,
            border: self.border,
        }
    }

    pub fn validate(&self) -> Result<(), ConcealError> {
        if !(self.t_abs >= 0.0 && self.t_rel >= 0.0) {
            return Err(ConcealError::Config(
                "thresholds must be non-negative".into(),
            ));
        }
        if self.band_width == 0 || self.ebma_boundary == 0 {
            return Err(ConcealError::Config("band widths must be positive".into()));
        }
        Ok(())
    }
}

/// How MC-FSE treated the motion estimates of one block.
#[derive(Debug, Clone, PartialEq)]
pub enum Alignment {
    /// Vectors passed the reliability check and aligned the volume.
    Aligned(MotionVectorSet),
    /// Vectors were estimated but rejected.
    Rejected(MotionVectorSet, ReliabilityVerdict),
    /// No vectors could be estimated; the volume was not aligned.
    EstimationFailed(String),
    /// Nothing to align (no neighbouring frames).
    NoNeighbours,
}

/// Output of concealing one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutcome {
    pub patch: Vec<u8>,
    pub model: Option<FseModel>,
    pub alignment: Option<Alignment>,
    /// Set when a baseline fell back to temporal replacement.
    pub fallback: Option<String>,
}

/// Callbacks for per-block and per-iteration diagnostics.
pub trait ConcealObserver {
    /// Whether FSE should report its lost-block estimate every iteration.
    fn wants_iterations(&self) -> bool {
        false
    }

    fn on_iteration(&mut self, _block: &LossBlock, _iteration: usize, _estimate: &[f64]) {}

    fn on_block(&mut self, _block: &LossBlock, _outcome: &Result<BlockOutcome, ConcealError>) {}
}

/// Observer that ignores everything.
pub struct NoObserver;

impl ConcealObserver for NoObserver {}

fn fse_patch(
    volume: &ExtrapolationVolume,
    config: &FseConfig,
    block: &LossBlock,
    observer: &mut dyn ConcealObserver,
) -> Result<(Vec<u8>, FseModel), FseError> {
    let model = if observer.wants_iterations() {
        fse::fse_generate_model_observed(volume, config, |it, est| {
            observer.on_iteration(block, it, est)
        })?
    } else {
        fse::fse_generate_model(volume, config)?
    };
    Ok((fse::cut_patch(&model, volume), model))
}

/// Estimates motion for every available frame offset and screens it.
pub fn motion_alignment(
    seq: &Sequence,
    mask: &LossMask,
    block: &LossBlock,
    config: &ConcealConfig,
) -> Alignment {
    let (kappas, _) = plane_offsets(block.frame, seq.frame_count(), config.n_prev, config.n_next);
    let kappas: Vec<i64> = kappas.into_iter().filter(|&k| k != 0).collect();
    if kappas.is_empty() {
        return Alignment::NoNeighbours;
    }
    match motion::estimate_all(seq, mask, block, &kappas, config.band_width, config.d_max) {
        Err(e) => Alignment::EstimationFailed(e.to_string()),
        Ok(vectors) => {
            let verdict = motion::reliability_verdict(
                &vectors.errors(),
                vectors.area_size,
                config.t_abs,
                config.t_rel,
            );
            if verdict.reliable() {
                Alignment::Aligned(vectors)
            } else {
                Alignment::Rejected(vectors, verdict)
            }
        }
    }
}

/// The full MC-FSE chain for one block: motion estimation, reliability
/// check, (un)aligned volume, model generation, patch.
pub fn conceal_block_mcfse(
    seq: &Sequence,
    mask: &LossMask,
    block: &LossBlock,
    config: &ConcealConfig,
) -> Result<BlockOutcome, ConcealError> {
    conceal_block_with(
        seq,
        mask,
        block,
        &config.with_algorithm(Algorithm::Mcfse),
        &mut NoObserver,
    )
}

pub fn conceal_block(
    seq: &Sequence,
    mask: &LossMask,
    block: &LossBlock,
    config: &ConcealConfig,
) -> Result<BlockOutcome, ConcealError> {
    conceal_block_with(seq, mask, block, config, &mut NoObserver)
}

pub fn conceal_block_with(
    seq: &Sequence,
    mask: &LossMask,
    block: &LossBlock,
    config: &ConcealConfig,
    observer: &mut dyn ConcealObserver,
) -> Result<BlockOutcome, ConcealError> {
    if block
        .pixels()
        .any(|(x, y)| mask.is_available(x, y, block.frame))
    {
        return Err(ConcealError::NotLost { block: *block });
    }
    let baseline = |patch: Result<Vec<u8>, BaselineError>| -> Result<BlockOutcome, ConcealError> {
        match patch {
            Ok(patch) => Ok(BlockOutcome {
                patch,
                model: None,
                alignment: None,
                fallback: None,
            }),
            Err(e) => Ok(BlockOutcome {
                patch: baselines::conceal_tr(seq, mask, block)?,
                model: None,
                alignment: None,
                fallback: Some(e.to_string()),
            }),
        }
    };
    match config.algorithm {
        Algorithm::Tr => Ok(BlockOutcome {
            patch: baselines::conceal_tr(seq, mask, block)?,
            model: None,
            alignment: None,
            fallback: None,
        }),
        Algorithm::Ebma => baseline(baselines::conceal_ebma(
            seq,
            mask,
            block,
            config.d_max,
            config.ebma_boundary,
        )),
        Algorithm::Dmve => baseline(baselines::conceal_dmve(
            seq,
            mask,
            block,
            config.d_max,
            config.band_width,
        )),
        Algorithm::Fse3d => {
            let vol = volume::assemble_volume(seq, mask, block, None, config.volume_shape())?;
            let (patch, model) = fse_patch(&vol, &config.fse, block, observer)?;
            Ok(BlockOutcome {
                patch,
                model: Some(model),
                alignment: None,
                fallback: None,
            })
        }
        Algorithm::Mcfse => {
            let alignment = motion_alignment(seq, mask, block, config);
            let vectors = match &alignment {
                Alignment::Aligned(v) => Some(v),
                _ => None,
            };
            let vol = volume::assemble_volume(seq, mask, block, vectors, config.volume_shape())?;
            let (patch, model) = fse_patch(&vol, &config.fse, block, observer)?;
            Ok(BlockOutcome {
                patch,
                model: Some(model),
                alignment: Some(alignment),
                fallback: None,
            })
        }
    }
}

/// Per-block record of a sequence run.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub block: LossBlock,
    pub error: Option<String>,
    pub aligned: Option<bool>,
    pub fallback: Option<String>,
    /// Residual energy never increased during model generation (FSE only).
    pub energy_non_increasing: Option<bool>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcealRun {
    pub sequence: Sequence,
    pub blocks: Vec<BlockReport>,
    pub seconds: f64,
}

impl ConcealRun {
    pub fn failures(&self) -> impl Iterator<Item = &BlockReport> {
        self.blocks.iter().filter(|b| b.error.is_some())
    }
}

pub fn conceal_sequence(
    seq: &Sequence,
    mask: &LossMask,
    config: &ConcealConfig,
) -> Result<ConcealRun, ConcealError> {
    conceal_sequence_with(seq, mask, config, &mut NoObserver)
}

/// Conceals every lost block of `seq`. Per-block failures are recorded and
/// leave the block zero-filled; the run continues.
pub fn conceal_sequence_with(
    seq: &Sequence,
    mask: &LossMask,
    config: &ConcealConfig,
    observer: &mut dyn ConcealObserver,
) -> Result<ConcealRun, ConcealError> {
    mask.check_matches(seq)
        .map_err(|e: LossError| ConcealError::Config(e.to_string()))?;
    config.validate()?;
    let start = Instant::now();
    let mut work = seq.clone();
    let mut avail = mask.clone();
    let mut reports = Vec::new();

    for block in mask.blocks_in_order() {
        let outcome = conceal_block_with(&work, &avail, &block, config, observer);
        observer.on_block(&block, &outcome);
        let report = match outcome {
            Ok(out) => {
                for ((x, y), v) in block.pixels().zip(&out.patch) {
                    work.set_sample(x, y, block.frame, *v);
                }
                avail.mark_available(&block);
                BlockReport {
                    block,
                    error: None,
                    aligned: out
                        .alignment
                        .as_ref()
                        .map(|a| matches!(a, Alignment::Aligned(_))),
                    fallback: out.fallback,
                    energy_non_increasing: out.model.as_ref().map(|m| m.energy_non_increasing()),
                    iterations: out.model.as_ref().map_or(0, |m| m.chosen.len()),
                }
            }
            Err(e) => {
                for (x, y) in block.pixels() {
                    work.set_sample(x, y, block.frame, 0);
                }
                BlockReport {
                    block,
                    error: Some(e.to_string()),
                    aligned: None,
                    fallback: None,
                    energy_non_increasing: None,
                    iterations: 0,
                }
            }
        };
        reports.push(report);
    }

    Ok(ConcealRun {
        sequence: work,
        blocks: reports,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::apply_loss;

    #[test]
    fn algorithm_names_parse() {
        for a in Algorithm::ALL {
            assert_eq!(a.key().parse::<Algorithm>().unwrap(), a);
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("pocs".parse::<Algorithm>().is_err());
    }

    #[test]
    fn empty_mask_is_identity() {
        let seq = Sequence::filled(32, 32, 3, 77);
        let mask = LossMask::for_sequence(&seq);
        let run = conceal_sequence(&seq, &mask, &ConcealConfig::default()).unwrap();
        assert_eq!(run.sequence, seq);
        assert!(run.blocks.is_empty());
    }

    #[test]
    fn tr_on_static_is_perfect() {
        let seq = Sequence::filled(64, 64, 3, 140);
        let block = LossBlock::new(1, 16, 16, 16);
        let mask = LossMask::from_blocks(64, 64, 3, [block]).unwrap();
        let corrupted = apply_loss(&seq, &mask).unwrap();
        let cfg = ConcealConfig::default().with_algorithm(Algorithm::Tr);
        let run = conceal_sequence(&corrupted, &mask, &cfg).unwrap();
        assert_eq!(run.sequence, seq);
    }

    #[test]
    fn failures_leave_zero_fill() {
        let seq = Sequence::filled(64, 64, 2, 140);
        let block = LossBlock::new(0, 16, 16, 16);
        let mask = LossMask::from_blocks(64, 64, 2, [block]).unwrap();
        let corrupted = apply_loss(&seq, &mask).unwrap();
        let cfg = ConcealConfig::default().with_algorithm(Algorithm::Tr);
        let run = conceal_sequence(&corrupted, &mask, &cfg).unwrap();
        assert_eq!(run.failures().count(), 1);
        assert_eq!(run.sequence.sample(20, 20, 0), 0);
    }

    #[test]
    fn unlost_block_rejected() {
        let seq = Sequence::filled(64, 64, 2, 1);
        let mask = LossMask::for_sequence(&seq);
        let b = LossBlock::new(1, 0, 0, 16);
        assert!(matches!(
            conceal_block(&seq, &mask, &b, &ConcealConfig::default()),
            Err(ConcealError::NotLost { .. })
        ));
    }
}
