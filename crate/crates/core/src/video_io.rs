//! Raw video containers: YUV4MPEG2 streams, headerless planar YUV and
//! binary PGM frame dumps.
//!
//! Only the luma plane is carried through the library. Chroma can be kept
//! on the side with [`load_y4m_with_chroma`] so that corrupted or concealed
//! output streams reproduce the source colour exactly.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

const Y4M_MAGIC: &[u8] = b"YUV4MPEG2";
const FRAME_MAGIC: &[u8] = b"FRAME";

#[derive(Debug, Error)]
pub enum VideoIoError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad stream magic at byte offset {offset}")]
    BadMagic { offset: usize },
    #[error("malformed header at byte offset {offset}: {reason}")]
    BadHeader { offset: usize, reason: String },
    #[error("unsupported colour space {colorspace:?} at byte offset {offset}")]
    UnsupportedColorspace { offset: usize, colorspace: String },
    #[error("expected FRAME marker at byte offset {offset}")]
    BadFrameMarker { offset: usize },
    #[error(
        "truncated frame at byte offset {offset}: need {expected} bytes, {available} available"
    )]
    TruncatedFrame {
        offset: usize,
        expected: usize,
        available: usize,
    },
    #[error("file size {size} is not a multiple of the {frame_bytes}-byte frame size (remainder {remainder})")]
    PartialFrame {
        size: usize,
        frame_bytes: usize,
        remainder: usize,
    },
    #[error("frame {index} has {actual} samples, expected {expected}")]
    FrameSize {
        index: usize,
        expected: usize,
        actual: usize,
    },
}

/// Chroma subsampling of a planar source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChromaMode {
    /// 4:2:0, two quarter-size chroma planes per frame.
    Yuv420,
    /// 4:0:0, luma only.
    Mono,
}

impl ChromaMode {
    pub fn chroma_bytes(self, width: usize, height: usize) -> usize {
        match self {
            ChromaMode::Yuv420 => 2 * width.div_ceil(2) * height.div_ceil(2),
            ChromaMode::Mono => 0,
        }
    }

    pub fn frame_bytes(self, width: usize, height: usize) -> usize {
        width * height + self.chroma_bytes(width, height)
    }
}

impl std::str::FromStr for ChromaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "420" | "yuv420" | "i420" | "4:2:0" => Ok(ChromaMode::Yuv420),
            "400" | "mono" | "gray" | "4:0:0" => Ok(ChromaMode::Mono),
            other => Err(format!("unknown chroma mode {other:?}")),
        }
    }
}

/// Frame rate as a rational number. Informational only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl Default for FrameRate {
    fn default() -> Self {
        FrameRate { num: 30, den: 1 }
    }
}

/// An ordered list of 8-bit luma frames, all `width × height`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    width: usize,
    height: usize,
    pub frame_rate: FrameRate,
    frames: Vec<Vec<u8>>,
}

impl Sequence {
    pub fn new(width: usize, height: usize) -> Self {
        Sequence {
            width,
            height,
            frame_rate: FrameRate::default(),
            frames: Vec::new(),
        }
    }

    pub fn from_frames(
        width: usize,
        height: usize,
        frames: Vec<Vec<u8>>,
    ) -> Result<Self, VideoIoError> {
        let mut seq = Sequence::new(width, height);
        for frame in frames {
            seq.push_frame(frame)?;
        }
        Ok(seq)
    }

    /// A sequence of `count` frames filled with `value`.
    pub fn filled(width: usize, height: usize, count: usize, value: u8) -> Self {
        Sequence {
            width,
            height,
            frame_rate: FrameRate::default(),
            frames: vec![vec![value; width * height]; count],
        }
    }

    pub fn push_frame(&mut self, frame: Vec<u8>) -> Result<(), VideoIoError> {
        let expected = self.width * self.height;
        if frame.len() != expected {
            return Err(VideoIoError::FrameSize {
                index: self.frames.len(),
                expected,
                actual: frame.len(),
            });
        }
        self.frames.push(frame);
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, t: usize) -> &[u8] {
        &self.frames[t]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [u8] {
        &mut self.frames[t]
    }

    pub fn frames(&self) -> &[Vec<u8>] {
        &self.frames
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, t: usize) -> u8 {
        self.frames[t][y * self.width + x]
    }

    #[inline]
    pub fn set_sample(&mut self, x: usize, y: usize, t: usize, value: u8) {
        self.frames[t][y * self.width + x] = value;
    }

    /// Bounds-checked signed access; `None` outside the frame.
    #[inline]
    pub fn get(&self, x: i64, y: i64, t: usize) -> Option<u8> {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            None
        } else {
            Some(self.sample(x as usize, y as usize, t))
        }
    }
}

/// Chroma planes kept alongside a [`Sequence`], one buffer per frame
/// (U followed by V).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChromaPlanes {
    pub mode: ChromaMode,
    pub frames: Vec<Vec<u8>>,
}

pub fn load_y4m(path: impl AsRef<Path>) -> Result<Sequence, VideoIoError> {
    let bytes = fs::read(path)?;
    parse_y4m(&bytes).map(|(seq, _)| seq)
}

pub fn load_y4m_with_chroma(
    path: impl AsRef<Path>,
) -> Result<(Sequence, ChromaPlanes), VideoIoError> {
    let bytes = fs::read(path)?;
    parse_y4m(&bytes)
}

fn header_tokens(line: &[u8], base: usize) -> Vec<(usize, &[u8])> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &b) in line.iter().enumerate() {
        if b == b' ' {
            if let Some(s) = start.take() {
                out.push((base + s, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((base + s, &line[s..]));
    }
    out
}

fn parse_number<T: std::str::FromStr>(
    tok: &[u8],
    offset: usize,
    what: &str,
) -> Result<T, VideoIoError> {
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| VideoIoError::BadHeader {
            offset,
            reason: format!("invalid {what} {:?}", String::from_utf8_lossy(tok)),
        })
}

/// Parse an in-memory YUV4MPEG2 stream.
pub fn parse_y4m(bytes: &[u8]) -> Result<(Sequence, ChromaPlanes), VideoIoError> {
    if bytes.len() < Y4M_MAGIC.len() + 1
        || &bytes[..Y4M_MAGIC.len()] != Y4M_MAGIC
        || !matches!(bytes[Y4M_MAGIC.len()], b' ' | b'\n')
    {
        return Err(VideoIoError::BadMagic { offset: 0 });
    }
    let header_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or(VideoIoError::BadHeader {
            offset: bytes.len(),
            reason: "header is not newline-terminated".into(),
        })?;

    let mut width = None;
    let mut height = None;
    let mut frame_rate = FrameRate::default();
    let mut mode = ChromaMode::Yuv420;
    let params = &bytes[Y4M_MAGIC.len()..header_end];
    for (offset, tok) in header_tokens(params, Y4M_MAGIC.len()) {
        let value = &tok[1..];
        match tok[0] {
            b'W' => width = Some(parse_number::<usize>(value, offset, "width")?),
            b'H' => height = Some(parse_number::<usize>(value, offset, "height")?),
            b'F' => {
                let text = std::str::from_utf8(value).unwrap_or("");
                let (n, d) = text
                    .split_once(':')
                    .ok_or_else(|| VideoIoError::BadHeader {
                        offset,
                        reason: format!("invalid frame rate {text:?}"),
                    })?;
                frame_rate = FrameRate {
                    num: parse_number(n.as_bytes(), offset, "frame rate")?,
                    den: parse_number(d.as_bytes(), offset, "frame rate")?,
                };
            }
            b'C' => {
                let cs = String::from_utf8_lossy(value).into_owned();
                mode = if cs.starts_with("420") {
                    ChromaMode::Yuv420
                } else if cs == "mono" {
                    ChromaMode::Mono
                } else {
                    return Err(VideoIoError::UnsupportedColorspace {
                        offset,
                        colorspace: cs,
                    });
                };
            }
            // interlacing, aspect ratio and extensions carry no sample data
            _ => {}
        }
    }
    let (width, height) = match (width, height) {
        (Some(w), Some(h)) if w > 0 && h > 0 => (w, h),
        _ => {
            return Err(VideoIoError::BadHeader {
                offset: header_end,
                reason: "missing or zero W/H".into(),
            })
        }
    };

    let luma_bytes = width * height;
    let chroma_bytes = mode.chroma_bytes(width, height);
    let mut seq = Sequence::new(width, height);
    seq.frame_rate = frame_rate;
    let mut chroma = ChromaPlanes {
        mode,
        frames: Vec::new(),
    };

    let mut pos = header_end + 1;
    while pos < bytes.len() {
        if bytes.len() - pos < FRAME_MAGIC.len()
            || &bytes[pos..pos + FRAME_MAGIC.len()] != FRAME_MAGIC
        {
            return Err(VideoIoError::BadFrameMarker { offset: pos });
        }
        let line_end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| pos + i)
            .ok_or(VideoIoError::BadFrameMarker { offset: pos })?;
        let data = line_end + 1;
        let need = luma_bytes + chroma_bytes;
        let available = bytes.len() - data;
        if available < need {
            return Err(VideoIoError::TruncatedFrame {
                offset: data,
                expected: need,
                available,
            });
        }
        seq.frames.push(bytes[data..data + luma_bytes].to_vec());
        chroma
            .frames
            .push(bytes[data + luma_bytes..data + need].to_vec());
        pos = data + need;
    }
    Ok((seq, chroma))
}

pub fn load_raw_yuv(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    mode: ChromaMode,
) -> Result<Sequence, VideoIoError> {
    let bytes = fs::read(path)?;
    parse_raw_yuv(&bytes, width, height, mode).map(|(seq, _)| seq)
}

pub fn load_raw_yuv_with_chroma(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    mode: ChromaMode,
) -> Result<(Sequence, ChromaPlanes), VideoIoError> {
    let bytes = fs::read(path)?;
    parse_raw_yuv(&bytes, width, height, mode)
}

pub fn parse_raw_yuv(
    bytes: &[u8],
    width: usize,
    height: usize,
    mode: ChromaMode,
) -> Result<(Sequence, ChromaPlanes), VideoIoError> {
    let frame_bytes = mode.frame_bytes(width, height);
    if frame_bytes == 0 {
        return Err(VideoIoError::BadHeader {
            offset: 0,
            reason: "zero frame dimensions".into(),
        });
    }
    let remainder = bytes.len() % frame_bytes;
    if remainder != 0 {
        return Err(VideoIoError::PartialFrame {
            size: bytes.len(),
            frame_bytes,
            remainder,
        });
    }
    let luma = width * height;
    let mut seq = Sequence::new(width, height);
    let mut chroma = ChromaPlanes {
        mode,
        frames: Vec::new(),
    };
    for chunk in bytes.chunks_exact(frame_bytes) {
        seq.frames.push(chunk[..luma].to_vec());
        chroma.frames.push(chunk[luma..].to_vec());
    }
    Ok((seq, chroma))
}

/// Serialize as 4:2:0 YUV4MPEG2. Chroma is taken from `chroma` when it is
/// 4:2:0 and covers every frame, otherwise it is synthesized as 128.
pub fn encode_y4m(seq: &Sequence, chroma: Option<&ChromaPlanes>) -> Vec<u8> {
    let (w, h) = (seq.width(), seq.height());
    let chroma_bytes = ChromaMode::Yuv420.chroma_bytes(w, h);
    let chroma =
        chroma.filter(|c| c.mode == ChromaMode::Yuv420 && c.frames.len() >= seq.frame_count());
    let neutral = vec![128u8; chroma_bytes];
    let mut out = Vec::with_capacity(64 + seq.frame_count() * (6 + w * h + chroma_bytes));
    out.extend_from_slice(
        format!(
            "YUV4MPEG2 W{w} H{h} F{}:{} Ip A1:1 C420jpeg\n",
            seq.frame_rate.num, seq.frame_rate.den
        )
        .as_bytes(),
    );
    for (t, frame) in seq.frames().iter().enumerate() {
        out.extend_from_slice(b"FRAME\n");
        out.extend_from_slice(frame);
        match chroma {
            Some(c) => out.extend_from_slice(&c.frames[t]),
            None => out.extend_from_slice(&neutral),
        }
    }
    out
}

pub fn write_y4m(seq: &Sequence, path: impl AsRef<Path>) -> Result<(), VideoIoError> {
    write_atomic(path.as_ref(), &encode_y4m(seq, None))
}

pub fn write_y4m_with_chroma(
    seq: &Sequence,
    chroma: &ChromaPlanes,
    path: impl AsRef<Path>,
) -> Result<(), VideoIoError> {
    write_atomic(path.as_ref(), &encode_y4m(seq, Some(chroma)))
}

pub fn encode_pgm(frame: &[u8], width: usize, height: usize) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(&frame[..width * height]);
    out
}

pub fn write_pgm(
    frame: &[u8],
    width: usize,
    height: usize,
    path: impl AsRef<Path>,
) -> Result<(), VideoIoError> {
    if frame.len() != width * height {
        return Err(VideoIoError::FrameSize {
            index: 0,
            expected: width * height,
            actual: frame.len(),
        });
    }
    write_atomic(path.as_ref(), &encode_pgm(frame, width, height))
}

/// Write to a sibling temporary file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), VideoIoError> {
    let mut tmp_name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}
