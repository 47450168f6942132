use std::fmt;

use crate::loss::{LossBlock, LossMask};
use crate::video_io::Sequence;

use super::HarnessError;

pub const PEAK: f64 = 255.0;

/// Pooled PSNR over a set of pixels. Infinite when the squared error is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Psnr {
    pub sse: u64,
    pub count: usize,
}

impl Psnr {
    pub fn from_sse(sse: u64, count: usize) -> Self {
        Psnr { sse, count }
    }

    pub fn mse(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sse as f64 / self.count as f64
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.sse == 0
    }

    pub fn db(&self) -> f64 {
        if self.is_infinite() {
            f64::INFINITY
        } else {
            10.0 * (PEAK * PEAK / self.mse()).log10()
        }
    }

    pub fn merge(self, other: Psnr) -> Psnr {
        Psnr {
            sse: self.sse + other.sse,
            count: self.count + other.count,
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{:.2}", self.db())
        }
    }
}

fn check_dims(a: &Sequence, b: &Sequence, mask: &LossMask) -> Result<(), HarnessError> {
    let da = (a.width(), a.height(), a.frame_count());
    let db = (b.width(), b.height(), b.frame_count());
    if da != db || da != mask.dims() {
        return Err(HarnessError::Dimensions(format!(
            "original {da:?}, concealed {db:?}, mask {:?}",
            mask.dims()
        )));
    }
    Ok(())
}

/// Squared error summed over one block.
pub fn block_psnr(original: &Sequence, concealed: &Sequence, block: &LossBlock) -> Psnr {
    let sse = block
        .pixels()
        .map(|(x, y)| {
            let d = original.sample(x, y, block.frame) as i64
                - concealed.sample(x, y, block.frame) as i64;
            (d * d) as u64
        })
        .sum();
    Psnr::from_sse(sse, block.area())
}

/// PSNR with the mean squared error pooled over every lost pixel of every frame.
pub fn psnr_lost_pixels(
    original: &Sequence,
    concealed: &Sequence,
    mask: &LossMask,
) -> Result<Psnr, HarnessError> {
    check_dims(original, concealed, mask)?;
    let (w, h) = (original.width(), original.height());
    let mut sse = 0u64;
    let mut count = 0usize;
    for t in 0..original.frame_count() {
        if !mask.frame_has_loss(t) {
            continue;
        }
        let (a, b) = (original.frame(t), concealed.frame(t));
        for y in 0..h {
            for x in 0..w {
                if !mask.is_available(x, y, t) {
                    let d = a[y * w + x] as i64 - b[y * w + x] as i64;
                    sse += (d * d) as u64;
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return Err(HarnessError::NoLostPixels);
    }
    Ok(Psnr::from_sse(sse, count))
}
