//! `key = value` experiment configuration.
//!
//! Lines starting with `#` are comments. The same keys are accepted from the
//! command line as `--set key=value`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::conceal::{Algorithm, ConcealConfig};
use crate::fse::GridDims;
use crate::loss::{build_isolated_pattern, load_pattern, IsolatedPattern, LossMask};
use crate::video_io::{self, ChromaMode, ChromaPlanes, Sequence};

use super::synth::SynthSpec;
use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceSource {
    Y4m(PathBuf),
    Raw(PathBuf),
    Synth(SynthSpec),
}

impl SequenceSource {
    pub fn name(&self) -> String {
        match self {
            SequenceSource::Y4m(p) | SequenceSource::Raw(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
            SequenceSource::Synth(s) => s.name(),
        }
    }

    /// Whether the source refers to a file that is not there.
    pub fn is_missing(&self) -> bool {
        match self {
            SequenceSource::Y4m(p) | SequenceSource::Raw(p) => !p.exists(),
            SequenceSource::Synth(_) => false,
        }
    }

    pub fn load(
        &self,
        width: usize,
        height: usize,
        chroma: ChromaMode,
    ) -> Result<(Sequence, Option<ChromaPlanes>), HarnessError> {
        Ok(match self {
            SequenceSource::Y4m(p) => {
                let (s, c) = video_io::load_y4m_with_chroma(p)?;
                (s, Some(c))
            }
            SequenceSource::Raw(p) => {
                let (s, c) = video_io::load_raw_yuv_with_chroma(p, width, height, chroma)?;
                (s, Some(c))
            }
            SequenceSource::Synth(spec) => (spec.generate(), None),
        })
    }
}

impl FromStr for SequenceSource {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.starts_with("synth:") {
            return Ok(SequenceSource::Synth(s.parse()?));
        }
        let path = PathBuf::from(s);
        let raw = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("yuv"));
        Ok(if raw {
            SequenceSource::Raw(path)
        } else {
            SequenceSource::Y4m(path)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sequences: Vec<SequenceSource>,
    /// Frame size of raw `.yuv` inputs.
    pub width: usize,
    pub height: usize,
    pub chroma: ChromaMode,
    pub algorithms: Vec<Algorithm>,
    /// Loss frames as written, numbered from `frame_base`.
    pub frames: Vec<usize>,
    pub frame_base: usize,
    pub pattern: IsolatedPattern,
    pub pattern_file: Option<PathBuf>,
    pub conceal: ConcealConfig,
    pub output: PathBuf,
    pub trace: bool,
    /// `(n_prev, n_next)` settings rerun for the FSE algorithms.
    pub frame_sweep: Vec<(usize, usize)>,
    pub dump_frames: bool,
    pub debug_blocks: bool,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let pattern = IsolatedPattern::default();
        ExperimentConfig {
            sequences: Vec::new(),
            width: 352,
            height: 288,
            chroma: ChromaMode::Yuv420,
            algorithms: Algorithm::ALL.to_vec(),
            frames: pattern.frames.clone(),
            frame_base: 0,
            pattern,
            pattern_file: None,
            conceal: ConcealConfig::default(),
            output: PathBuf::from("results"),
            trace: false,
            frame_sweep: Vec::new(),
            dump_frames: false,
            debug_blocks: false,
            threads: 0,
        }
    }
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_bool(value: &str) -> Option<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = ExperimentConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| HarnessError::Config {
                line: i + 1,
                reason: "expected key = value".into(),
            })?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| HarnessError::Config {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Applies `key=value`.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), HarnessError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| HarnessError::BadValue {
            key: pair.to_string(),
            value: String::new(),
        })?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let bad = || HarnessError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        fn num<T: FromStr>(v: &str, bad: impl Fn() -> HarnessError) -> Result<T, HarnessError> {
            v.parse().map_err(|_| bad())
        }
        let c = &mut self.conceal;
        match key {
            "sequence" => self.sequences.push(value.parse()?),
            "sequences" => {
                self.sequences = value
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<_, _>>()?
            }
            "width" => self.width = num(value, bad)?,
            "height" => self.height = num(value, bad)?,
            "chroma" => self.chroma = value.parse().map_err(|_| bad())?,
            "algorithms" => {
                self.algorithms = list(value)
                    .map(|a| a.parse().map_err(|_| bad()))
                    .collect::<Result<_, _>>()?
            }
            "frames" => self.frames = list(value).map(|f| num(f, bad)).collect::<Result<_, _>>()?,
            "frame_base" => {
                self.frame_base = num(value, bad)?;
                if self.frame_base > 1 {
                    return Err(bad());
                }
            }
            "block_size" => self.pattern.block_size = num(value, bad)?,
            "stride" => {
                self.pattern.stride_x = num(value, bad)?;
                self.pattern.stride_y = self.pattern.stride_x;
            }
            "stride_x" => self.pattern.stride_x = num(value, bad)?,
            "stride_y" => self.pattern.stride_y = num(value, bad)?,
            "offset" => self.pattern.offset = num(value, bad)?,
            "pattern_file" => self.pattern_file = (!value.is_empty()).then(|| PathBuf::from(value)),
            "n_prev" => c.n_prev = num(value, bad)?,
            "n_next" => c.n_next = num(value, bad)?,
            "border" => c.border = num(value, bad)?,
            "band_width" => c.band_width = num(value, bad)?,
            "d_max" => c.d_max = num(value, bad)?,
            "t_abs" => c.t_abs = num(value, bad)?,
            "t_rel" => c.t_rel = num(value, bad)?,
            "ebma_boundary" => c.ebma_boundary = num(value, bad)?,
            "fft" => c.fse.fft_dims = value.parse::<GridDims>().map_err(|_| bad())?,
            "rho" => c.fse.rho = num(value, bad)?,
            "gamma" => c.fse.gamma = num(value, bad)?,
            "iterations" => c.fse.max_iterations = num(value, bad)?,
            "output" => self.output = PathBuf::from(value),
            "trace" => self.trace = parse_bool(value).ok_or_else(bad)?,
            "frame_sweep" => {
                self.frame_sweep = list(value)
                    .map(|s| {
                        let (p, f) = s.split_once(':').ok_or_else(bad)?;
                        Ok((num(p.trim(), bad)?, num(f.trim(), bad)?))
                    })
                    .collect::<Result<_, HarnessError>>()?
            }
            "dump_frames" => self.dump_frames = parse_bool(value).ok_or_else(bad)?,
            "debug_blocks" => self.debug_blocks = parse_bool(value).ok_or_else(bad)?,
            "threads" => self.threads = num(value, bad)?,
            _ => return Err(HarnessError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Loss frames as 0-based indices.
    pub fn loss_frames(&self) -> Result<Vec<usize>, HarnessError> {
        self.frames
            .iter()
            .map(|&f| {
                f.checked_sub(self.frame_base)
                    .ok_or_else(|| HarnessError::BadValue {
                        key: "frames".into(),
                        value: f.to_string(),
                    })
            })
            .collect()
    }

    /// The loss mask for a sequence. Pattern frames past the end of the
    /// sequence are dropped and reported in the returned warnings.
    pub fn loss_mask(&self, seq: &Sequence) -> Result<(LossMask, Vec<String>), HarnessError> {
        let (w, h, n) = (seq.width(), seq.height(), seq.frame_count());
        if let Some(path) = &self.pattern_file {
            return Ok((load_pattern(path, w, h, n)?, Vec::new()));
        }
        let mut warnings = Vec::new();
        let mut pattern = self.pattern.clone();
        pattern.frames = Vec::new();
        for f in self.loss_frames()? {
            if f < n {
                pattern.frames.push(f);
            } else {
                warnings.push(format!(
                    "loss frame {f} is beyond the last frame {}",
                    n.saturating_sub(1)
                ));
            }
        }
        Ok((build_isolated_pattern(w, h, n, &pattern)?, warnings))
    }

    /// The effective settings, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let c = &self.conceal;
        let mut s = String::new();
        let seqs: Vec<String> = self
            .sequences
            .iter()
            .map(|src| match src {
                SequenceSource::Y4m(p) | SequenceSource::Raw(p) => p.display().to_string(),
                SequenceSource::Synth(spec) => format!(
                    "synth:{}:width={},height={},frames={},dx={},dy={},zoom={},{}texture={},seed={}",
                    spec.kind,
                    spec.width,
                    spec.height,
                    spec.frames,
                    spec.dx,
                    spec.dy,
                    spec.zoom,
                    spec.cut.map(|c| format!("cut={c},")).unwrap_or_default(),
                    spec.texture,
                    spec.seed
                ),
            })
            .collect();
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let _ = writeln!(s, "sequences = {}", seqs.join("; "));
        let _ = writeln!(s, "width = {}\nheight = {}", self.width, self.height);
        let _ = writeln!(
            s,
            "chroma = {}",
            match self.chroma {
                ChromaMode::Yuv420 => "420",
                ChromaMode::Mono => "mono",
            }
        );
        let algs: Vec<&str> = self.algorithms.iter().map(|a| a.key()).collect();
        let _ = writeln!(s, "algorithms = {}", algs.join(","));
        let _ = writeln!(
            s,
            "frames = {}\nframe_base = {}",
            join(&self.frames),
            self.frame_base
        );
        let p = &self.pattern;
        let _ = writeln!(
            s,
            "block_size = {}\nstride_x = {}\nstride_y = {}\noffset = {}",
            p.block_size, p.stride_x, p.stride_y, p.offset
        );
        if let Some(f) = &self.pattern_file {
            let _ = writeln!(s, "pattern_file = {}", f.display());
        }
        let _ = writeln!(
            s,
            "n_prev = {}\nn_next = {}\nborder = {}\nband_width = {}\nd_max = {}\nt_abs = {}\nt_rel = {}\nebma_boundary = {}",
            c.n_prev, c.n_next, c.border, c.band_width, c.d_max, c.t_abs, c.t_rel, c.ebma_boundary
        );
        let _ = writeln!(
            s,
            "fft = {}\nrho = {}\ngamma = {}\niterations = {}",
            c.fse.fft_dims, c.fse.rho, c.fse.gamma, c.fse.max_iterations
        );
        let sweep: Vec<String> = self
            .frame_sweep
            .iter()
            .map(|(p, f)| format!("{p}:{f}"))
            .collect();
        let _ = writeln!(
            s,
            "output = {}\ntrace = {}",
            self.output.display(),
            self.trace
        );
        let _ = writeln!(s, "frame_sweep = {}", sweep.join(","));
        let _ = writeln!(
            s,
            "dump_frames = {}\ndebug_blocks = {}\nthreads = {}",
            self.dump_frames, self.debug_blocks, self.threads
        );
        s
    }
}
