//! Block-loss patterns and the per-frame availability map.

use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::video_io::Sequence;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("stride {stride} is smaller than block size {size}")]
    StrideTooSmall { stride: usize, size: usize },
    #[error("block {block} does not fit in a {width}x{height}x{frames} sequence")]
    OutOfBounds {
        block: LossBlock,
        width: usize,
        height: usize,
        frames: usize,
    },
    #[error("mask is {mask:?} but sequence is {seq:?} (width, height, frames)")]
    DimensionMismatch {
        mask: (usize, usize, usize),
        seq: (usize, usize, usize),
    },
    #[error("pattern line {line}: {reason}")]
    Pattern { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A square lost block with its top-left corner at `(x0, y0)` in frame `frame`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LossBlock {
    pub frame: usize,
    pub y0: usize,
    pub x0: usize,
    pub size: usize,
}

impl LossBlock {
    pub fn new(frame: usize, x0: usize, y0: usize, size: usize) -> Self {
        LossBlock {
            frame,
            y0,
            x0,
            size,
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x0 + self.size && y >= self.y0 && y < self.y0 + self.size
    }

    pub fn area(&self) -> usize {
        self.size * self.size
    }

    /// Iterates the block's pixel coordinates in raster order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..self.y0 + self.size)
            .flat_map(move |y| (self.x0..self.x0 + self.size).map(move |x| (x, y)))
    }
}

impl fmt::Display for LossBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "frame {} ({}, {}) {}x{}",
            self.frame, self.x0, self.y0, self.size, self.size
        )
    }
}

/// Availability of every pixel in a sequence plus the list of lost blocks.
///
/// `available` is false exactly on the union of `blocks`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossMask {
    width: usize,
    height: usize,
    frame_count: usize,
    lost: Vec<Vec<bool>>,
    blocks: Vec<LossBlock>,
}

impl LossMask {
    /// Everything available.
    pub fn new(width: usize, height: usize, frame_count: usize) -> Self {
        LossMask {
            width,
            height,
            frame_count,
            lost: vec![Vec::new(); frame_count],
            blocks: Vec::new(),
        }
    }

    pub fn for_sequence(seq: &Sequence) -> Self {
        Self::new(seq.width(), seq.height(), seq.frame_count())
    }

    pub fn from_blocks(
        width: usize,
        height: usize,
        frame_count: usize,
        blocks: impl IntoIterator<Item = LossBlock>,
    ) -> Result<Self, LossError> {
        let mut mask = Self::new(width, height, frame_count);
        for b in blocks {
            mask.add_block(b)?;
        }
        Ok(mask)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.frame_count)
    }

    pub fn blocks(&self) -> &[LossBlock] {
        &self.blocks
    }

    /// Blocks sorted by frame, then raster position.
    pub fn blocks_in_order(&self) -> Vec<LossBlock> {
        let mut blocks = self.blocks.clone();
        blocks.sort();
        blocks.dedup();
        blocks
    }

    pub fn add_block(&mut self, block: LossBlock) -> Result<(), LossError> {
        if block.size == 0
            || block.frame >= self.frame_count
            || block.x0 + block.size > self.width
            || block.y0 + block.size > self.height
        {
            return Err(LossError::OutOfBounds {
                block,
                width: self.width,
                height: self.height,
                frames: self.frame_count,
            });
        }
        let plane = &mut self.lost[block.frame];
        if plane.is_empty() {
            *plane = vec![false; self.width * self.height];
        }
        for (x, y) in block.pixels() {
            plane[y * self.width + x] = true;
        }
        self.blocks.push(block);
        Ok(())
    }

    /// Marks a block as received again (e.g. once it has been concealed).
    /// Pixels still covered by another listed block stay unavailable.
    pub fn mark_available(&mut self, block: &LossBlock) {
        self.blocks.retain(|b| b != block);
        let plane = &mut self.lost[block.frame];
        if plane.is_empty() {
            return;
        }
        for (x, y) in block.pixels() {
            plane[y * self.width + x] = false;
        }
        for other in self.blocks.iter().filter(|b| b.frame == block.frame) {
            for (x, y) in other.pixels() {
                plane[y * self.width + x] = true;
            }
        }
    }

    #[inline]
    pub fn is_available(&self, x: usize, y: usize, t: usize) -> bool {
        let plane = &self.lost[t];
        plane.is_empty() || !plane[y * self.width + x]
    }

    /// Signed lookup; out-of-frame coordinates are unavailable.
    #[inline]
    pub fn available_at(&self, x: i64, y: i64, t: usize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.is_available(x as usize, y as usize, t)
    }

    pub fn frame_has_loss(&self, t: usize) -> bool {
        self.lost[t].iter().any(|&l| l)
    }

    pub fn lost_count(&self) -> usize {
        self.lost.iter().flatten().filter(|&&l| l).count()
    }

    pub fn check_matches(&self, seq: &Sequence) -> Result<(), LossError> {
        let seq_dims = (seq.width(), seq.height(), seq.frame_count());
        if self.dims() != seq_dims {
            return Err(LossError::DimensionMismatch {
                mask: self.dims(),
                seq: seq_dims,
            });
        }
        Ok(())
    }
}

/// Parameters of the regular isolated-loss grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsolatedPattern {
    pub frames: Vec<usize>,
    pub block_size: usize,
    pub stride_x: usize,
    pub stride_y: usize,
    pub offset: usize,
}

impl Default for IsolatedPattern {
    fn default() -> Self {
        IsolatedPattern {
            frames: vec![16, 46, 76, 106, 136],
            block_size: 16,
            stride_x: 64,
            stride_y: 64,
            offset: 16,
        }
    }
}

/// Lays a grid of lost blocks at `(offset + i·stride_x, offset + j·stride_y)`
/// in each listed frame, keeping only blocks that fit fully inside the frame.
pub fn build_isolated_pattern(
    width: usize,
    height: usize,
    frame_count: usize,
    pattern: &IsolatedPattern,
) -> Result<LossMask, LossError> {
    let size = pattern.block_size;
    for stride in [pattern.stride_x, pattern.stride_y] {
        if stride < size {
            return Err(LossError::StrideTooSmall { stride, size });
        }
    }
    let mut mask = LossMask::new(width, height, frame_count);
    for &frame in &pattern.frames {
        let mut y = pattern.offset;
        while y + size <= height {
            let mut x = pattern.offset;
            while x + size <= width {
                mask.add_block(LossBlock::new(frame, x, y, size))?;
                x += pattern.stride_x;
            }
            y += pattern.stride_y;
        }
    }
    Ok(mask)
}

/// Parses `frame x0 y0 size` lines; blank lines and `#` comments are skipped.
pub fn parse_pattern(text: &str) -> Result<Vec<LossBlock>, LossError> {
    let mut blocks = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(LossError::Pattern {
                line: i + 1,
                reason: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let mut nums = [0usize; 4];
        for (slot, f) in nums.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| LossError::Pattern {
                line: i + 1,
                reason: format!("not a non-negative integer: {f:?}"),
            })?;
        }
        blocks.push(LossBlock::new(nums[0], nums[1], nums[2], nums[3]));
    }
    Ok(blocks)
}

pub fn load_pattern(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    frame_count: usize,
) -> Result<LossMask, LossError> {
    let text = fs::read_to_string(path)?;
    LossMask::from_blocks(width, height, frame_count, parse_pattern(&text)?)
}

pub fn format_pattern(mask: &LossMask) -> String {
    let mut out = String::from("# frame x0 y0 size\n");
    for b in mask.blocks_in_order() {
        out.push_str(&format!("{} {} {} {}\n", b.frame, b.x0, b.y0, b.size));
    }
    out
}

/// Zero-fills every lost sample; returns a new sequence.
pub fn apply_loss(seq: &Sequence, mask: &LossMask) -> Result<Sequence, LossError> {
    mask.check_matches(seq)?;
    let mut out = seq.clone();
    for b in mask.blocks() {
        for (x, y) in b.pixels() {
            out.set_sample(x, y, b.frame, 0);
        }
    }
    Ok(out)
}
