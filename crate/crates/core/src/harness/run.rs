//! Experiment execution.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use crate::conceal::{
    conceal_sequence_with, Algorithm, Alignment, BlockOutcome, BlockReport, ConcealConfig,
    ConcealError, ConcealObserver,
};
use crate::fse::to_pixel;
use crate::loss::{apply_loss, format_pattern, LossBlock, LossMask};
use crate::video_io::{encode_y4m, write_atomic, write_pgm, ChromaPlanes, Sequence};

use super::config::ExperimentConfig;
use super::psnr::{block_psnr, psnr_lost_pixels, Psnr};
use super::{report, HarnessError};

#[derive(Debug, Clone, PartialEq)]
pub struct BlockRow {
    pub report: BlockReport,
    pub psnr: Psnr,
}

/// One concealment run of one algorithm over one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub sequence: String,
    pub algorithm: Algorithm,
    pub n_prev: usize,
    pub n_next: usize,
    pub psnr: Psnr,
    pub blocks: Vec<BlockRow>,
    pub seconds: f64,
}

impl CellResult {
    pub fn failed_blocks(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.report.error.is_some())
            .count()
    }

    pub fn fallback_blocks(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.report.fallback.is_some())
            .count()
    }

    pub fn aligned_blocks(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.report.aligned == Some(true))
            .count()
    }

    /// Blocks whose residual energy rose during model generation.
    pub fn non_monotone_blocks(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.report.energy_non_increasing == Some(false))
            .count()
    }
}

/// Pooled PSNR of the lost pixels after a given number of iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub sequence: String,
    pub algorithm: Algorithm,
    pub iteration: usize,
    pub psnr: Psnr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sequence: String,
    pub algorithm: Algorithm,
    pub n_prev: usize,
    pub n_next: usize,
    pub psnr: Psnr,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub cells: Vec<CellResult>,
    pub traces: Vec<TraceRow>,
    pub sweep: Vec<SweepRow>,
    pub warnings: Vec<String>,
    pub output: PathBuf,
}

impl ExperimentReport {
    pub fn cell(&self, sequence: &str, algorithm: Algorithm) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.sequence == sequence && c.algorithm == algorithm)
    }
}

struct Prepared {
    name: String,
    original: Sequence,
    chroma: Option<ChromaPlanes>,
    mask: LossMask,
    corrupted: Sequence,
}

#[derive(Clone, Copy)]
struct Job {
    seq: usize,
    algorithm: Algorithm,
    n_prev: usize,
    n_next: usize,
    sweep: bool,
}

/// Collects per-iteration squared error and optional per-block model dumps.
struct CellObserver<'a> {
    original: &'a Sequence,
    trace: Option<Vec<u64>>,
    trace_pixels: usize,
    debug_dir: Option<PathBuf>,
    prefix: String,
    io_errors: Vec<String>,
}

impl ConcealObserver for CellObserver<'_> {
    fn wants_iterations(&self) -> bool {
        self.trace.is_some()
    }

    fn on_iteration(&mut self, block: &LossBlock, iteration: usize, estimate: &[f64]) {
        let Some(sse) = self.trace.as_mut() else {
            return;
        };
        if iteration == 1 {
            self.trace_pixels += block.area();
        }
        if sse.len() < iteration {
            sse.resize(iteration, 0);
        }
        sse[iteration - 1] += block
            .pixels()
            .zip(estimate)
            .map(|((x, y), &v)| {
                let d = to_pixel(v) as i64 - self.original.sample(x, y, block.frame) as i64;
                (d * d) as u64
            })
            .sum::<u64>();
    }

    fn on_block(&mut self, block: &LossBlock, outcome: &Result<BlockOutcome, ConcealError>) {
        let Some(dir) = &self.debug_dir else {
            return;
        };
        let Ok(out) = outcome else {
            return;
        };
        let Some(model) = &out.model else {
            return;
        };
        let mut text = String::new();
        match &out.alignment {
            Some(Alignment::Aligned(v)) | Some(Alignment::Rejected(v, _)) => {
                for e in v.iter() {
                    text += &format!(
                        "# kappa {} vector ({}, {}) error {}\n",
                        e.kappa, e.vector.x, e.vector.y, e.error
                    );
                }
                let state = if matches!(out.alignment, Some(Alignment::Aligned(_))) {
                    "aligned"
                } else {
                    "rejected"
                };
                text += &format!("# {state}\n");
            }
            Some(other) => text += &format!("# {other:?}\n"),
            None => {}
        }
        text += &model.to_csv();
        let path = dir.join(format!(
            "{}_f{}_x{}_y{}.csv",
            self.prefix, block.frame, block.x0, block.y0
        ));
        if let Err(e) = write_atomic(&path, text.as_bytes()) {
            self.io_errors.push(format!("{}: {e}", path.display()));
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn prepare(cfg: &ExperimentConfig, warnings: &mut Vec<String>) -> Vec<Prepared> {
    let mut out = Vec::new();
    let mut names = HashSet::new();
    for src in &cfg.sequences {
        let mut name = src.name();
        if src.is_missing() {
            warnings.push(format!("skipping {name}: file not found"));
            continue;
        }
        let (original, chroma) = match src.load(cfg.width, cfg.height, cfg.chroma) {
            Ok(v) => v,
            Err(e) => {
                warnings.push(format!("skipping {name}: {e}"));
                continue;
            }
        };
        let mask = match cfg.loss_mask(&original) {
            Ok((mask, w)) => {
                warnings.extend(w.into_iter().map(|w| format!("{name}: {w}")));
                mask
            }
            Err(e) => {
                warnings.push(format!("skipping {name}: {e}"));
                continue;
            }
        };
        if mask.blocks().is_empty() {
            warnings.push(format!("skipping {name}: no lost blocks"));
            continue;
        }
        let mut k = 2;
        while !names.insert(name.clone()) {
            name = format!("{}-{k}", src.name());
            k += 1;
        }
        let corrupted = apply_loss(&original, &mask).expect("mask built for this sequence");
        out.push(Prepared {
            name,
            original,
            chroma,
            mask,
            corrupted,
        });
    }
    out
}

struct JobOutput {
    cell: CellResult,
    trace: Vec<TraceRow>,
    warnings: Vec<String>,
}

fn run_job(cfg: &ExperimentConfig, prep: &Prepared, job: Job) -> Result<JobOutput, HarnessError> {
    let conceal = ConcealConfig {
        algorithm: job.algorithm,
        n_prev: job.n_prev,
        n_next: job.n_next,
        ..cfg.conceal.clone()
    };
    let prefix = format!("{}_{}", prep.name, job.algorithm.key());
    let debug_dir = (cfg.debug_blocks && !job.sweep && job.algorithm.uses_fse())
        .then(|| cfg.output.join("debug"));
    let mut observer = CellObserver {
        original: &prep.original,
        trace: (cfg.trace && !job.sweep && job.algorithm.uses_fse()).then(Vec::new),
        trace_pixels: 0,
        debug_dir,
        prefix: prefix.clone(),
        io_errors: Vec::new(),
    };
    let run = conceal_sequence_with(&prep.corrupted, &prep.mask, &conceal, &mut observer)?;
    let psnr = psnr_lost_pixels(&prep.original, &run.sequence, &prep.mask)?;
    let blocks = run
        .blocks
        .iter()
        .map(|r| BlockRow {
            psnr: block_psnr(&prep.original, &run.sequence, &r.block),
            report: r.clone(),
        })
        .collect();
    let mut warnings = observer.io_errors;
    for f in run.failures() {
        warnings.push(format!(
            "{} {}: {} failed: {}",
            prep.name,
            job.algorithm,
            f.block,
            f.error.as_deref().unwrap_or_default()
        ));
    }
    if !job.sweep {
        let path = cfg.output.join(format!("{prefix}.y4m"));
        write_atomic(&path, &encode_y4m(&run.sequence, prep.chroma.as_ref()))?;
        if cfg.dump_frames {
            dump_frames(&cfg.output, &prefix, &run.sequence, &prep.mask)?;
        }
    }
    let trace = observer
        .trace
        .unwrap_or_default()
        .into_iter()
        .enumerate()
        .map(|(i, sse)| TraceRow {
            sequence: prep.name.clone(),
            algorithm: job.algorithm,
            iteration: i + 1,
            psnr: Psnr::from_sse(sse, observer.trace_pixels),
        })
        .collect();
    Ok(JobOutput {
        cell: CellResult {
            sequence: prep.name.clone(),
            algorithm: job.algorithm,
            n_prev: job.n_prev,
            n_next: job.n_next,
            psnr,
            blocks,
            seconds: run.seconds,
        },
        trace,
        warnings,
    })
}

fn dump_frames(
    out: &Path,
    prefix: &str,
    seq: &Sequence,
    mask: &LossMask,
) -> Result<(), HarnessError> {
    let dir = out.join("frames");
    for t in (0..seq.frame_count()).filter(|&t| mask.frame_has_loss(t)) {
        write_pgm(
            seq.frame(t),
            seq.width(),
            seq.height(),
            dir.join(format!("{prefix}_f{t}.pgm")),
        )?;
    }
    Ok(())
}

/// Runs every configured algorithm on every sequence and writes the
/// concealed sequences and report files into `cfg.output`.
///
/// Sequences that are missing or unreadable are skipped with a warning.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.conceal.validate()?;
    for &(p, f) in &cfg.frame_sweep {
        ConcealConfig {
            n_prev: p,
            n_next: f,
            ..cfg.conceal.clone()
        }
        .validate()?;
    }
    fs::create_dir_all(&cfg.output).map_err(io_err(&cfg.output))?;
    if cfg.debug_blocks {
        let d = cfg.output.join("debug");
        fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    if cfg.dump_frames {
        let d = cfg.output.join("frames");
        fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    let mut report = ExperimentReport {
        output: cfg.output.clone(),
        ..Default::default()
    };
    let prepared = prepare(cfg, &mut report.warnings);

    for p in &prepared {
        write_atomic(
            &cfg.output.join(format!("{}_corrupted.y4m", p.name)),
            &encode_y4m(&p.corrupted, p.chroma.as_ref()),
        )?;
        let pattern = cfg.output.join(format!("{}_pattern.txt", p.name));
        write_atomic(&pattern, format_pattern(&p.mask).as_bytes())?;
        if cfg.dump_frames {
            dump_frames(
                &cfg.output,
                &format!("{}_original", p.name),
                &p.original,
                &p.mask,
            )?;
            dump_frames(
                &cfg.output,
                &format!("{}_corrupted", p.name),
                &p.corrupted,
                &p.mask,
            )?;
        }
    }

    let mut jobs = Vec::new();
    for seq in 0..prepared.len() {
        for &algorithm in &cfg.algorithms {
            jobs.push(Job {
                seq,
                algorithm,
                n_prev: cfg.conceal.n_prev,
                n_next: cfg.conceal.n_next,
                sweep: false,
            });
        }
        for &(n_prev, n_next) in &cfg.frame_sweep {
            for &algorithm in cfg.algorithms.iter().filter(|a| a.uses_fse()) {
                jobs.push(Job {
                    seq,
                    algorithm,
                    n_prev,
                    n_next,
                    sweep: true,
                });
            }
        }
    }

    let threads = match cfg.threads {
        0 => thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<JobOutput, HarnessError>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&job) = jobs.get(i) else {
                    break;
                };
                let out = run_job(cfg, &prepared[job.seq], job);
                results.lock().expect("worker panicked")[i] = Some(out);
            });
        }
    });

    for (job, out) in jobs
        .iter()
        .zip(results.into_inner().expect("worker panicked"))
    {
        let out = out.expect("every job ran")?;
        report.warnings.extend(out.warnings);
        if job.sweep {
            report.sweep.push(SweepRow {
                sequence: out.cell.sequence,
                algorithm: job.algorithm,
                n_prev: job.n_prev,
                n_next: job.n_next,
                psnr: out.cell.psnr,
            });
        } else {
            report.traces.extend(out.trace);
            report.cells.push(out.cell);
        }
    }

    report::write_all(cfg, &report)?;
    Ok(report)
}
