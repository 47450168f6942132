//! Extrapolation volume assembly.
//!
//! The volume is a stack of square windows around the lost block: the
//! block's own frame in the middle, neighbouring frames above and below,
//! each optionally displaced by its motion vector so that the content lines
//! up with the centre plane.

use thiserror::Error;

use crate::loss::{LossBlock, LossMask};
use crate::motion::{MotionVector, MotionVectorSet};
use crate::video_io::Sequence;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VolumeError {
    #[error("no motion vector for frame offset {kappa}")]
    MissingVector { kappa: i64 },
    #[error("volume for {block} has no support samples")]
    NoSupport { block: LossBlock },
    #[error("volume shape mismatch: {0}")]
    Shape(String),
}

/// Role of a volume sample during model generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    /// Received sample used to fit the model.
    Support,
    /// Sample of the lost block, to be filled.
    Lost,
    /// Out of frame or not received; ignored.
    Unavailable,
}

/// Position of the lost block inside the centre plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockRect {
    pub m0: usize,
    pub n0: usize,
    pub size: usize,
}

impl BlockRect {
    pub fn contains(&self, m: usize, n: usize) -> bool {
        m >= self.m0 && m < self.m0 + self.size && n >= self.n0 && n < self.n0 + self.size
    }
}

/// `M × N × P` samples with per-sample labels; index `(p·N + n)·M + m`,
/// `m` horizontal, `n` vertical, `p` temporal.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationVolume {
    m: usize,
    n: usize,
    p: usize,
    samples: Vec<f64>,
    labels: Vec<Label>,
    center_plane: usize,
    block_rect: BlockRect,
    /// Frame offset `κ` of each plane, in plane order.
    kappas: Vec<i64>,
    /// Requested offsets that fell outside the sequence.
    dropped: Vec<i64>,
}

impl ExtrapolationVolume {
    /// Builds a volume from raw parts; used for synthetic volumes in tests
    /// and experiments.
    pub fn from_parts(
        dims: (usize, usize, usize),
        samples: Vec<f64>,
        labels: Vec<Label>,
        center_plane: usize,
        block_rect: BlockRect,
    ) -> Result<Self, VolumeError> {
        let (m, n, p) = dims;
        let len = m * n * p;
        if samples.len() != len || labels.len() != len {
            return Err(VolumeError::Shape(format!(
                "expected {len} samples and labels, got {} and {}",
                samples.len(),
                labels.len()
            )));
        }
        if center_plane >= p
            || block_rect.m0 + block_rect.size > m
            || block_rect.n0 + block_rect.size > n
        {
            return Err(VolumeError::Shape(
                "block rectangle outside the volume".into(),
            ));
        }
        let kappas = (0..p as i64).map(|q| q - center_plane as i64).collect();
        Ok(ExtrapolationVolume {
            m,
            n,
            p,
            samples,
            labels,
            center_plane,
            block_rect,
            kappas,
            dropped: Vec::new(),
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m, self.n, self.p)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn index(&self, m: usize, n: usize, p: usize) -> usize {
        (p * self.n + n) * self.m + m
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn sample(&self, m: usize, n: usize, p: usize) -> f64 {
        self.samples[self.index(m, n, p)]
    }

    pub fn label(&self, m: usize, n: usize, p: usize) -> Label {
        self.labels[self.index(m, n, p)]
    }

    pub fn center_plane(&self) -> usize {
        self.center_plane
    }

    pub fn block_rect(&self) -> BlockRect {
        self.block_rect
    }

    pub fn kappas(&self) -> &[i64] {
        &self.kappas
    }

    pub fn dropped(&self) -> &[i64] {
        &self.dropped
    }

    pub fn support_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == Label::Support).count()
    }

    /// Coordinates of the lost block in raster order.
    pub fn lost_coords(&self) -> Vec<(usize, usize, usize)> {
        let r = self.block_rect;
        (r.n0..r.n0 + r.size)
            .flat_map(|n| (r.m0..r.m0 + r.size).map(move |m| (m, n, self.center_plane)))
            .collect()
    }

    /// Centre of the lost block in volume coordinates.
    pub fn block_center(&self) -> (f64, f64, f64) {
        let r = self.block_rect;
        let half = (r.size as f64 - 1.0) / 2.0;
        (
            r.m0 as f64 + half,
            r.n0 as f64 + half,
            self.center_plane as f64,
        )
    }

    /// One plane's samples with unavailable positions set to `None`.
    pub fn plane(&self, p: usize) -> Vec<Option<f64>> {
        let start = p * self.m * self.n;
        (start..start + self.m * self.n)
            .map(|i| (self.labels[i] == Label::Support).then_some(self.samples[i]))
            .collect()
    }
}

/// Frame window and temporal extent of a volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VolumeShape {
    pub n_prev: usize,
    pub n_next: usize,
    pub border: usize,
}

/// Offsets `κ` that stay inside the sequence, and those that do not.
pub fn plane_offsets(
    frame: usize,
    frame_count: usize,
    n_prev: usize,
    n_next: usize,
) -> (Vec<i64>, Vec<i64>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for kappa in -(n_prev as i64)..=(n_next as i64) {
        let t = frame as i64 + kappa;
        if t >= 0 && t < frame_count as i64 {
            kept.push(kappa);
        } else {
            dropped.push(kappa);
        }
    }
    (kept, dropped)
}

/// Cuts the `(size + 2·border)²` window around `block` from the block's
/// frame and from up to `n_prev` previous and `n_next` following frames.
///
/// With `vectors`, the window of plane `κ` is displaced by `d̂^(κ)`;
/// without, all windows are co-located. Samples that are out of frame or
/// not available in `mask` are labelled [`Label::Unavailable`].
pub fn assemble_volume(
    seq: &Sequence,
    mask: &LossMask,
    block: &LossBlock,
    vectors: Option<&MotionVectorSet>,
    shape: VolumeShape,
) -> Result<ExtrapolationVolume, VolumeError> {
    let side = block.size + 2 * shape.border;
    let (kappas, dropped) =
        plane_offsets(block.frame, seq.frame_count(), shape.n_prev, shape.n_next);
    let p = kappas.len();
    let center_plane = kappas.iter().position(|&k| k == 0).unwrap_or(0);
    let mut samples = vec![0.0; side * side * p];
    let mut labels = vec![Label::Unavailable; side * side * p];
    let origin_x = block.x0 as i64 - shape.border as i64;
    let origin_y = block.y0 as i64 - shape.border as i64;

    for (plane, &kappa) in kappas.iter().enumerate() {
        let d = match (kappa, vectors) {
            (0, _) | (_, None) => MotionVector::ZERO,
            (_, Some(set)) => set
                .vector(kappa)
                .ok_or(VolumeError::MissingVector { kappa })?,
        };
        let t = (block.frame as i64 + kappa) as usize;
        for n in 0..side {
            for m in 0..side {
                let i = (plane * side + n) * side + m;
                let x = origin_x + m as i64;
                let y = origin_y + n as i64;
                if kappa == 0 && x >= 0 && y >= 0 && block.contains(x as usize, y as usize) {
                    labels[i] = Label::Lost;
                    continue;
                }
                let (sx, sy) = (x + d.x, y + d.y);
                if mask.available_at(sx, sy, t) {
                    samples[i] = seq.sample(sx as usize, sy as usize, t) as f64;
                    labels[i] = Label::Support;
                }
            }
        }
    }

    let volume = ExtrapolationVolume {
        m: side,
        n: side,
        p,
        samples,
        labels,
        center_plane,
        block_rect: BlockRect {
            m0: shape.border,
            n0: shape.border,
            size: block.size,
        },
        kappas,
        dropped,
    };
    if volume.support_count() == 0 {
        return Err(VolumeError::NoSupport { block: *block });
    }
    Ok(volume)
}
