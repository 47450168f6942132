//! Decoder-side motion estimation around a lost block.
//!
//! The displacement from frame `τ` to frame `τ+κ` is found by full-pel
//! search over a ring of received pixels surrounding the block (the
//! decision area). A set of such estimates is then screened by two
//! thresholds before it is trusted for volume alignment.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::loss::{LossBlock, LossMask};
use crate::video_io::Sequence;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MotionError {
    #[error("decision area around {block} is empty")]
    EmptyDecisionArea { block: LossBlock },
    #[error("no feasible displacement within ±{d_max} for frame offset {kappa}")]
    NoFeasibleCandidate { kappa: i64, d_max: i64 },
    #[error("frame offset {kappa} from frame {frame} leaves the sequence")]
    FrameOutOfRange { frame: usize, kappa: i64 },
}

/// Integer-pel displacement `(x_d, y_d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MotionVector {
    pub x: i64,
    pub y: i64,
}

impl MotionVector {
    pub const ZERO: MotionVector = MotionVector { x: 0, y: 0 };

    pub fn new(x: i64, y: i64) -> Self {
        MotionVector { x, y }
    }

    pub fn norm_sq(self) -> i64 {
        self.x * self.x + self.y * self.y
    }

    /// Smaller Euclidean norm first, then lexicographic `(x, y)`.
    fn tie_key(self) -> (i64, i64, i64) {
        (self.norm_sq(), self.x, self.y)
    }
}

/// Ring of received pixels of a given width around a lost block in its own frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionArea {
    pub frame: usize,
    pub band_width: usize,
    pub coords: Vec<(usize, usize)>,
}

impl DecisionArea {
    /// Collects the ring, clipped to the frame, skipping unavailable pixels.
    pub fn around(mask: &LossMask, block: &LossBlock, band_width: usize) -> Self {
        let bw = band_width as i64;
        let (x0, y0, s) = (block.x0 as i64, block.y0 as i64, block.size as i64);
        let mut coords = Vec::new();
        for y in (y0 - bw)..(y0 + s + bw) {
            for x in (x0 - bw)..(x0 + s + bw) {
                let inside = x >= x0 && x < x0 + s && y >= y0 && y < y0 + s;
                if !inside && mask.available_at(x, y, block.frame) {
                    coords.push((x as usize, y as usize));
                }
            }
        }
        DecisionArea {
            frame: block.frame,
            band_width,
            coords,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Sum of squared errors between the decision area in frame `τ` and the
/// same area displaced by `candidate` in frame `τ+κ`.
///
/// Returns `None` when the candidate is infeasible: the target frame does
/// not exist, or a displaced pixel falls outside the frame or on a pixel
/// that is itself unavailable.
pub fn sse_for_candidate(
    seq: &Sequence,
    mask: &LossMask,
    area: &DecisionArea,
    kappa: i64,
    candidate: MotionVector,
) -> Option<u64> {
    let target = area.frame as i64 + kappa;
    if target < 0 || target >= seq.frame_count() as i64 {
        return None;
    }
    let target = target as usize;
    let width = seq.width();
    let cur = seq.frame(area.frame);
    let reference = seq.frame(target);
    let mut sse = 0u64;
    for &(x, y) in &area.coords {
        let (sx, sy) = (x as i64 + candidate.x, y as i64 + candidate.y);
        if !mask.available_at(sx, sy, target) {
            return None;
        }
        let d = cur[y * width + x] as i64 - reference[sy as usize * width + sx as usize] as i64;
        sse += (d * d) as u64;
    }
    Some(sse)
}

/// Best displacement for one frame offset together with its error `Ě`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MotionEstimate {
    pub kappa: i64,
    pub vector: MotionVector,
    pub error: u64,
}

/// Full search over `[-d_max, d_max]²`.
pub fn estimate_motion(
    seq: &Sequence,
    mask: &LossMask,
    area: &DecisionArea,
    kappa: i64,
    d_max: usize,
) -> Result<MotionEstimate, MotionError> {
    let target = area.frame as i64 + kappa;
    if kappa == 0 || target < 0 || target >= seq.frame_count() as i64 {
        return Err(MotionError::FrameOutOfRange {
            frame: area.frame,
            kappa,
        });
    }
    let d = d_max as i64;
    let mut best: Option<MotionEstimate> = None;
    for y in -d..=d {
        for x in -d..=d {
            let candidate = MotionVector::new(x, y);
            let Some(error) = sse_for_candidate(seq, mask, area, kappa, candidate) else {
                continue;
            };
            let better = match best {
                None => true,
                Some(b) => (error, candidate.tie_key()) < (b.error, b.vector.tie_key()),
            };
            if better {
                best = Some(MotionEstimate {
                    kappa,
                    vector: candidate,
                    error,
                });
            }
        }
    }
    best.ok_or(MotionError::NoFeasibleCandidate { kappa, d_max: d })
}

/// Estimates per frame offset, keyed by `κ`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MotionVectorSet {
    pub area_size: usize,
    estimates: BTreeMap<i64, MotionEstimate>,
}

impl MotionVectorSet {
    pub fn new(area_size: usize) -> Self {
        MotionVectorSet {
            area_size,
            estimates: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, estimate: MotionEstimate) {
        self.estimates.insert(estimate.kappa, estimate);
    }

    pub fn get(&self, kappa: i64) -> Option<&MotionEstimate> {
        self.estimates.get(&kappa)
    }

    pub fn vector(&self, kappa: i64) -> Option<MotionVector> {
        self.get(kappa).map(|e| e.vector)
    }

    pub fn iter(&self) -> impl Iterator<Item = &MotionEstimate> {
        self.estimates.values()
    }

    pub fn errors(&self) -> Vec<u64> {
        self.estimates.values().map(|e| e.error).collect()
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }
}

/// Estimates `d̂^(κ)` for every listed offset around `block`.
pub fn estimate_all(
    seq: &Sequence,
    mask: &LossMask,
    block: &LossBlock,
    kappas: &[i64],
    band_width: usize,
    d_max: usize,
) -> Result<MotionVectorSet, MotionError> {
    let area = DecisionArea::around(mask, block, band_width);
    if area.is_empty() {
        return Err(MotionError::EmptyDecisionArea { block: *block });
    }
    let mut set = MotionVectorSet::new(area.len());
    for &kappa in kappas {
        set.insert(estimate_motion(seq, mask, &area, kappa, d_max)?);
    }
    Ok(set)
}

/// Which screening criterion (if any) rejected a vector set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityVerdict {
    /// Largest `Ě` per decision-area pixel.
    pub max_error_per_pixel: f64,
    /// `(max Ě − min Ě) / mean Ě`, 0 when every error is 0.
    pub spread: f64,
    pub absolute_exceeded: bool,
    pub relative_exceeded: bool,
}

impl ReliabilityVerdict {
    pub fn reliable(&self) -> bool {
        !self.absolute_exceeded && !self.relative_exceeded
    }
}

pub fn reliability_verdict(
    errors: &[u64],
    area_size: usize,
    t_abs: f64,
    t_rel: f64,
) -> ReliabilityVerdict {
    if errors.is_empty() || area_size == 0 {
        return ReliabilityVerdict {
            max_error_per_pixel: f64::INFINITY,
            spread: f64::INFINITY,
            absolute_exceeded: true,
            relative_exceeded: true,
        };
    }
    let max = *errors.iter().max().unwrap() as f64;
    let min = *errors.iter().min().unwrap() as f64;
    let mean = errors.iter().map(|&e| e as f64).sum::<f64>() / errors.len() as f64;
    let max_error_per_pixel = max / area_size as f64;
    let spread = if mean == 0.0 { 0.0 } else { (max - min) / mean };
    ReliabilityVerdict {
        max_error_per_pixel,
        spread,
        absolute_exceeded: max_error_per_pixel > t_abs,
        relative_exceeded: spread > t_rel,
    }
}

/// True when neither the absolute nor the relative threshold is exceeded.
pub fn check_reliability(vectors: &MotionVectorSet, t_abs: f64, t_rel: f64) -> bool {
    reliability_verdict(&vectors.errors(), vectors.area_size, t_abs, t_rel).reliable()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_texture(w: usize, h: usize, seed: u64) -> Vec<u8> {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        (0..w * h)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (state >> 56) as u8
            })
            .collect()
    }

    /// Frame t shows the base image translated by t·(dx, dy).
    fn translating(w: usize, h: usize, frames: usize, dx: i64, dy: i64) -> Sequence {
        let margin = 40;
        let bw = w + 2 * margin;
        let base = pseudo_texture(bw, h + 2 * margin, 7);
        let mut seq = Sequence::new(w, h);
        for t in 0..frames as i64 {
            let mut f = vec![0; w * h];
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    let bx = (x - dx * t + margin as i64) as usize;
                    let by = (y - dy * t + margin as i64) as usize;
                    f[(y as usize) * w + x as usize] = base[by * bw + bx];
                }
            }
            seq.push_frame(f).unwrap();
        }
        seq
    }

    fn block_mask(seq: &Sequence, block: LossBlock) -> LossMask {
        LossMask::from_blocks(seq.width(), seq.height(), seq.frame_count(), [block]).unwrap()
    }

    #[test]
    fn decision_area_ring_size() {
        let mask = LossMask::new(64, 64, 1);
        let area = DecisionArea::around(&mask, &LossBlock::new(0, 24, 24, 16), 4);
        assert_eq!(area.len(), 24 * 24 - 16 * 16);
        // clipped at the corner
        let corner = DecisionArea::around(&mask, &LossBlock::new(0, 0, 0, 16), 4);
        assert_eq!(corner.len(), 20 * 20 - 16 * 16);
    }

    #[test]
    fn sse_static_and_constant_offset() {
        let seq = Sequence::filled(64, 64, 2, 90);
        let block = LossBlock::new(0, 24, 24, 16);
        let mask = block_mask(&seq, block);
        let area = DecisionArea::around(&mask, &block, 4);
        assert_eq!(
            sse_for_candidate(&seq, &mask, &area, 1, MotionVector::ZERO),
            Some(0)
        );

        let mut two = Sequence::filled(64, 64, 1, 128);
        two.push_frame(vec![130; 64 * 64]).unwrap();
        let mask = block_mask(&two, block);
        let area = DecisionArea::around(&mask, &block, 4);
        assert_eq!(area.len(), 320);
        for cand in [MotionVector::new(0, 0), MotionVector::new(-3, 5)] {
            assert_eq!(
                sse_for_candidate(&two, &mask, &area, 1, cand),
                Some(320 * 4)
            );
        }
    }

    #[test]
    fn sse_shifted_right_by_three() {
        let seq = translating(64, 64, 2, 3, 0);
        let block = LossBlock::new(0, 24, 24, 16);
        let mask = block_mask(&seq, block);
        let area = DecisionArea::around(&mask, &block, 4);
        assert_eq!(
            sse_for_candidate(&seq, &mask, &area, 1, MotionVector::new(3, 0)),
            Some(0)
        );
        assert!(sse_for_candidate(&seq, &mask, &area, 1, MotionVector::new(0, 0)).unwrap() > 0);
    }

    #[test]
    fn infeasible_when_leaving_frame() {
        let seq = Sequence::filled(32, 32, 2, 1);
        let block = LossBlock::new(0, 0, 0, 8);
        let mask = block_mask(&seq, block);
        let area = DecisionArea::around(&mask, &block, 2);
        assert_eq!(
            sse_for_candidate(&seq, &mask, &area, 1, MotionVector::new(-1, 0)),
            None
        );
        assert_eq!(
            sse_for_candidate(&seq, &mask, &area, 5, MotionVector::ZERO),
            None
        );
    }

    #[test]
    fn recovers_translation_both_directions() {
        let seq = translating(96, 96, 3, -5, 2);
        let block = LossBlock::new(1, 40, 40, 16);
        let mask = block_mask(&seq, block);
        let area = DecisionArea::around(&mask, &block, 4);
        let fwd = estimate_motion(&seq, &mask, &area, 1, 16).unwrap();
        assert_eq!((fwd.vector, fwd.error), (MotionVector::new(-5, 2), 0));
        let back = estimate_motion(&seq, &mask, &area, -1, 16).unwrap();
        assert_eq!((back.vector, back.error), (MotionVector::new(5, -2), 0));
    }

    #[test]
    fn static_tie_break_prefers_zero() {
        let seq = Sequence::filled(64, 64, 2, 50);
        let block = LossBlock::new(0, 24, 24, 16);
        let mask = block_mask(&seq, block);
        let area = DecisionArea::around(&mask, &block, 4);
        let est = estimate_motion(&seq, &mask, &area, 1, 16).unwrap();
        assert_eq!((est.vector, est.error), (MotionVector::ZERO, 0));
    }

    #[test]
    fn tie_break_ordering() {
        let mut c = [
            MotionVector::new(1, 0),
            MotionVector::new(0, -1),
            MotionVector::new(-1, 0),
            MotionVector::new(0, 1),
        ];
        c.sort_by_key(|v| v.tie_key());
        assert_eq!(c[0], MotionVector::new(-1, 0));
        assert_eq!(c[1], MotionVector::new(0, -1));
    }

    #[test]
    fn no_feasible_candidate() {
        let seq = Sequence::filled(16, 16, 2, 0);
        let block = LossBlock::new(0, 4, 4, 8);
        let mut mask = block_mask(&seq, block);
        // opposite corners: only the zero displacement keeps all four in frame
        let corners = DecisionArea {
            frame: 0,
            band_width: 4,
            coords: vec![(0, 0), (15, 0), (0, 15), (15, 15)],
        };
        let est = estimate_motion(&seq, &mask, &corners, 1, 3).unwrap();
        assert_eq!(est.vector, MotionVector::ZERO);

        mask.add_block(LossBlock::new(1, 0, 0, 16)).unwrap();
        assert_eq!(
            estimate_motion(&seq, &mask, &corners, 1, 3),
            Err(MotionError::NoFeasibleCandidate { kappa: 1, d_max: 3 })
        );
    }

    #[test]
    fn reliability_examples() {
        assert!(reliability_verdict(&[0, 0, 0, 0], 224, 100.0, 3.0).reliable());

        let v = reliability_verdict(&[101 * 224, 0, 0, 0], 224, 100.0, 3.0);
        assert!(v.absolute_exceeded);
        assert!(!v.reliable());

        let v = reliability_verdict(&[10, 10, 10, 50], 224, 100.0, 3.0);
        assert!((v.spread - 2.0).abs() < 1e-12);
        assert!(v.reliable());

        assert!(!reliability_verdict(&[], 224, 100.0, 3.0).reliable());
    }
}
