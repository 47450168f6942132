//! Temporal reference concealment: temporal replacement (TR), extended
//! boundary matching (EBMA) and decoder motion-vector estimation (DMVE).
//!
//! All three copy a block from the previous frame; they differ in how the
//! displacement is chosen.

use thiserror::Error;

use crate::loss::{LossBlock, LossMask};
use crate::motion::{estimate_motion, DecisionArea, MotionError, MotionVector};
use crate::video_io::Sequence;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BaselineError {
    #[error("{block} has no previous frame")]
    NoPreviousFrame { block: LossBlock },
    #[error("no boundary pixels around {block}")]
    NoBoundary { block: LossBlock },
    #[error("source block for {block} at {vector:?} is out of frame or not received")]
    SourceUnavailable {
        block: LossBlock,
        vector: MotionVector,
    },
    #[error(transparent)]
    Motion(#[from] MotionError),
}

/// Copies the `block.size²` block at `block` displaced by `d` from frame
/// `block.frame − 1`, if every source pixel is in frame and available.
pub fn copy_previous(
    seq: &Sequence,
    mask: &LossMask,
    block: &LossBlock,
    d: MotionVector,
) -> Result<Vec<u8>, BaselineError> {
    if block.frame == 0 {
        return Err(BaselineError::NoPreviousFrame { block: *block });
    }
    let t = block.frame - 1;
    let mut patch = Vec::with_capacity(block.area());
    for (x, y) in block.pixels() {
        let (sx, sy) = (x as i64 + d.x, y as i64 + d.y);
        if !mask.available_at(sx, sy, t) {
            return Err(BaselineError::SourceUnavailable {
                block: *block,
                vector: d,
            });
        }
        patch.push(seq.sample(sx as usize, sy as usize, t));
    }
    Ok(patch)
}

/// Temporal replacement: the co-located block of the previous frame.
pub fn conceal_tr(
    seq: &Sequence,
    mask: &LossMask,
    block: &LossBlock,
) -> Result<Vec<u8>, BaselineError> {
    copy_previous(seq, mask, block, MotionVector::ZERO)
}

/// Search over `|d| ≤ d_max` for the previous-frame block whose surrounding
/// ring of `boundary_width` pixels best matches (SSD) the received ring
/// around the lost block. Candidates must have their ring and the block
/// itself inside the previous frame and available.
pub fn conceal_ebma(
    seq: &Sequence,
    mask: &LossMask,
    block: &LossBlock,
    d_max: usize,
    boundary_width: usize,
) -> Result<Vec<u8>, BaselineError> {
    if block.frame == 0 {
        return Err(BaselineError::NoPreviousFrame { block: *block });
    }
    let ring = DecisionArea::around(mask, block, boundary_width);
    if ring.is_empty() {
        return Err(BaselineError::NoBoundary { block: *block });
    }
    let d = d_max as i64;
    let mut best_key: Option<(u64, (i64, i64, i64))> = None;
    let mut best_patch = Vec::new();
    for y in -d..=d {
        for x in -d..=d {
            let v = MotionVector::new(x, y);
            let Some(err) = crate::motion::sse_for_candidate(seq, mask, &ring, -1, v) else {
                continue;
            };
            let key = (err, (v.norm_sq(), x, y));
            if best_key.is_some_and(|b| key >= b) {
                continue;
            }
            if let Ok(patch) = copy_previous(seq, mask, block, v) {
                best_key = Some(key);
                best_patch = patch;
            }
        }
    }
    match best_key {
        Some(_) => Ok(best_patch),
        None => Err(BaselineError::Motion(MotionError::NoFeasibleCandidate {
            kappa: -1,
            d_max: d,
        })),
    }
}

/// Decoder motion-vector estimation: `d̂^(−1)` from the decision area of
/// width `band_width`, then the displaced previous-frame block.
pub fn conceal_dmve(
    seq: &Sequence,
    mask: &LossMask,
    block: &LossBlock,
    d_max: usize,
    band_width: usize,
) -> Result<Vec<u8>, BaselineError> {
    if block.frame == 0 {
        return Err(BaselineError::NoPreviousFrame { block: *block });
    }
    let area = DecisionArea::around(mask, block, band_width);
    if area.is_empty() {
        return Err(BaselineError::NoBoundary { block: *block });
    }
    let est = estimate_motion(seq, mask, &area, -1, d_max)?;
    copy_previous(seq, mask, block, est.vector)
}
