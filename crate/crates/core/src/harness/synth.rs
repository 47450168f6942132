//! Deterministic synthetic test sequences.
//!
//! A spec string reads `kind[:key=value,...]`, for example
//! `translate:dx=8,dy=0,texture=natural,seed=3`. Kinds are presets:
//! `static`, `translate`, `zoom` and `scenecut`; any key overrides them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::video_io::Sequence;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Texture {
    /// Random low-frequency sinusoids plus fine per-pixel grain.
    Natural,
    /// Integer-valued lattice built from period-2 and period-4 cosines.
    Lattice,
    /// Independent uniform samples.
    Noise,
}

impl FromStr for Texture {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "natural" => Ok(Texture::Natural),
            "lattice" => Ok(Texture::Lattice),
            "noise" => Ok(Texture::Noise),
            _ => Err(HarnessError::Synth(format!("unknown texture '{s}'"))),
        }
    }
}

impl fmt::Display for Texture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Texture::Natural => "natural",
            Texture::Lattice => "lattice",
            Texture::Noise => "noise",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub kind: String,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// Integer content motion in pixels per frame.
    pub dx: i64,
    pub dy: i64,
    /// Relative magnification per frame around the frame center.
    pub zoom: f64,
    /// First frame drawn from a second, unrelated texture.
    pub cut: Option<usize>,
    pub texture: Texture,
    pub seed: u64,
}

impl SynthSpec {
    pub fn preset(kind: &str) -> Result<Self, HarnessError> {
        let mut spec = SynthSpec {
            kind: kind.to_string(),
            width: 176,
            height: 144,
            frames: 9,
            dx: 0,
            dy: 0,
            zoom: 0.0,
            cut: None,
            texture: Texture::Natural,
            seed: 1,
        };
        match kind {
            "static" => {}
            "translate" => spec.dx = 8,
            "zoom" => spec.zoom = 0.03,
            "scenecut" => spec.cut = Some(4),
            _ => return Err(HarnessError::Synth(format!("unknown kind '{kind}'"))),
        }
        Ok(spec)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let bad = || HarnessError::Synth(format!("bad value '{value}' for '{key}'"));
        match key {
            "width" | "w" => self.width = value.parse().map_err(|_| bad())?,
            "height" | "h" => self.height = value.parse().map_err(|_| bad())?,
            "frames" | "n" => self.frames = value.parse().map_err(|_| bad())?,
            "dx" => self.dx = value.parse().map_err(|_| bad())?,
            "dy" => self.dy = value.parse().map_err(|_| bad())?,
            "zoom" => self.zoom = value.parse().map_err(|_| bad())?,
            "cut" => self.cut = Some(value.parse().map_err(|_| bad())?),
            "texture" => self.texture = value.parse()?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            _ => return Err(HarnessError::Synth(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Short name used for output files.
    pub fn name(&self) -> String {
        let mut name = format!("synth-{}", self.kind);
        if self.dx != 0 || self.dy != 0 {
            name += &format!("-d{}x{}", self.dx, self.dy);
        }
        if self.zoom != 0.0 {
            name += &format!("-z{}", self.zoom);
        }
        if let Some(c) = self.cut {
            name += &format!("-cut{c}");
        }
        name + &format!("-{}-s{}", self.texture, self.seed)
    }

    pub fn generate(&self) -> Sequence {
        let first = TextureField::new(self.texture, self.seed);
        let second = TextureField::new(self.texture, self.seed.wrapping_add(0x9e37_79b9));
        let (cx, cy) = (self.width as f64 / 2.0, self.height as f64 / 2.0);
        let mut seq = Sequence::new(self.width, self.height);
        for t in 0..self.frames {
            let field = match self.cut {
                Some(c) if t >= c => &second,
                _ => &first,
            };
            let scale = (1.0 + self.zoom).powi(t as i32);
            let (sx, sy) = (self.dx * t as i64, self.dy * t as i64);
            let mut frame = Vec::with_capacity(self.width * self.height);
            for y in 0..self.height {
                for x in 0..self.width {
                    let v = if self.zoom == 0.0 {
                        field.at(x as i64 - sx, y as i64 - sy)
                    } else {
                        let fx = cx + (x as f64 - cx) / scale - sx as f64;
                        let fy = cy + (y as f64 - cy) / scale - sy as f64;
                        field.at(fx.round() as i64, fy.round() as i64)
                    };
                    frame.push(v);
                }
            }
            seq.push_frame(frame).expect("frame size matches");
        }
        seq
    }
}

impl FromStr for SynthSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.strip_prefix("synth:").unwrap_or(s);
        let (kind, params) = s.split_once(':').unwrap_or((s, ""));
        let mut spec = SynthSpec::preset(kind)?;
        for kv in params.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| HarnessError::Synth(format!("expected key=value, got '{kv}'")))?;
            spec.set(k.trim(), v.trim())?;
        }
        Ok(spec)
    }
}

struct Wave {
    fx: f64,
    fy: f64,
    amp: f64,
    phase: f64,
}

/// An infinite 2D texture evaluated at integer positions.
struct TextureField {
    texture: Texture,
    waves: Vec<Wave>,
    grain: f64,
    lattice: [i64; 4],
    seed: u64,
}

fn hash2(x: i64, y: i64, seed: u64) -> u64 {
    let mut z = seed
        ^ (x as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (y as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl TextureField {
    fn new(texture: Texture, seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut waves = Vec::new();
        let mut grain = 0.0;
        if texture == Texture::Natural {
            for _ in 0..16 {
                let f: f64 = rng.gen_range(0.02..0.25);
                let angle: f64 = rng.gen_range(0.0..PI);
                waves.push(Wave {
                    fx: f * angle.cos(),
                    fy: f * angle.sin(),
                    amp: rng.gen_range(3.0..12.0) * (0.04 / f).sqrt(),
                    phase: rng.gen_range(0.0..2.0 * PI),
                });
            }
            grain = 2.0;
        }
        // amplitudes of the period-4 and period-2 terms, then a phase shift
        let lattice = [
            rng.gen_range(8..24),
            rng.gen_range(8..24),
            rng.gen_range(8..24),
            rng.gen_range(0..4),
        ];
        TextureField {
            texture,
            waves,
            grain,
            lattice,
            seed,
        }
    }

    fn at(&self, x: i64, y: i64) -> u8 {
        match self.texture {
            Texture::Noise => (hash2(x, y, self.seed) >> 56) as u8,
            Texture::Lattice => {
                let q = |v: i64| [1, 0, -1, 0][v.rem_euclid(4) as usize];
                let [a, b, c, shift] = self.lattice;
                let v = 128 + a * q(x + shift) + b * q(y) + c * (1 - 2 * ((x + y).rem_euclid(2)));
                v.clamp(0, 255) as u8
            }
            Texture::Natural => {
                let mut v = 128.0;
                for w in &self.waves {
                    v += w.amp * (2.0 * PI * (w.fx * x as f64 + w.fy * y as f64) + w.phase).cos();
                }
                let u = (hash2(x, y, self.seed) >> 11) as f64 / (1u64 << 53) as f64;
                v += self.grain * (2.0 * u - 1.0);
                v.round().clamp(0.0, 255.0) as u8
            }
        }
    }
}
