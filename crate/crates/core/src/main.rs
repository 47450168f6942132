use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mcfse::conceal::{conceal_sequence, Algorithm};
use mcfse::harness::{run_experiment, ExperimentConfig, SequenceSource, SynthSpec};
use mcfse::loss::{apply_loss, format_pattern, LossMask};
use mcfse::video_io::{encode_y4m, write_atomic};
use mcfse::{psnr_lost_pixels, Sequence};

#[derive(Parser)]
#[command(
    name = "mcfse",
    version,
    about = "Block loss concealment for video sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment from a config file.
    Run(RunArgs),
    /// Cut a loss pattern out of a sequence and conceal it.
    Conceal(ConcealArgs),
    /// Apply a loss pattern (zero fill) and write the corrupted sequence.
    Corrupt(CorruptArgs),
    /// Pooled PSNR of the lost pixels between two sequences.
    Psnr(PsnrArgs),
    /// Write a synthetic test sequence.
    Synth(SynthArgs),
}

/// Options shared by commands that build a loss pattern. Any config key is
/// accepted through `--set key=value`.
#[derive(Args)]
struct Settings {
    /// Frame width and height for raw .yuv input.
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Comma-separated loss frames.
    #[arg(long)]
    frames: Option<String>,
    /// Number loss frames from 1 instead of 0.
    #[arg(long)]
    one_based: bool,
    /// Loss pattern file with `frame x0 y0 size` lines.
    #[arg(long)]
    pattern: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Override any config key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Settings {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        let mut pairs: Vec<String> = Vec::new();
        if let Some(w) = self.width {
            pairs.push(format!("width={w}"));
        }
        if let Some(h) = self.height {
            pairs.push(format!("height={h}"));
        }
        if self.one_based {
            pairs.push("frame_base=1".into());
        }
        if let Some(f) = &self.frames {
            pairs.push(format!("frames={f}"));
        }
        if let Some(p) = &self.pattern {
            pairs.push(format!("pattern_file={}", p.display()));
        }
        if let Some(n) = self.iterations {
            pairs.push(format!("iterations={n}"));
        }
        pairs.extend(self.set.iter().cloned());
        for p in &pairs {
            cfg.set_pair(p).with_context(|| format!("setting {p}"))?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct RunArgs {
    /// Config file; command-line settings override it.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Input sequences (Y4M, raw .yuv, or synth:<spec>); replaces the config list.
    #[arg(long = "input", short)]
    inputs: Vec<String>,
    /// Comma-separated algorithms (tr, ebma, dmve, fse3d, mcfse).
    #[arg(long)]
    algorithms: Option<String>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Write the per-iteration PSNR trace.
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Args)]
struct ConcealArgs {
    #[arg(long, short)]
    input: String,
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, short, default_value = "mcfse")]
    algorithm: Algorithm,
    /// Also write the loss pattern here.
    #[arg(long)]
    pattern_out: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(long, short)]
    input: String,
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long)]
    pattern_out: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Args)]
struct PsnrArgs {
    #[arg(long)]
    original: String,
    #[arg(long)]
    concealed: String,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Args)]
struct SynthArgs {
    /// For example `translate:dx=8,dy=0,frames=21`.
    spec: String,
    #[arg(long, short)]
    output: PathBuf,
}

fn load(
    cfg: &ExperimentConfig,
    input: &str,
) -> Result<(Sequence, Option<mcfse::video_io::ChromaPlanes>)> {
    let src: SequenceSource = input.parse()?;
    if src.is_missing() {
        bail!("{input}: file not found");
    }
    Ok(src.load(cfg.width, cfg.height, cfg.chroma)?)
}

fn mask_for(cfg: &ExperimentConfig, seq: &Sequence) -> Result<LossMask> {
    let (mask, warnings) = cfg.loss_mask(seq)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    if mask.blocks().is_empty() {
        bail!("the loss pattern has no blocks inside this sequence");
    }
    Ok(mask)
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if !args.inputs.is_empty() {
        cfg.sequences = args
            .inputs
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()?;
    }
    if let Some(a) = &args.algorithms {
        cfg.set("algorithms", a)?;
    }
    if let Some(o) = &args.output {
        cfg.output = o.clone();
    }
    if args.trace {
        cfg.trace = true;
    }
    args.settings.apply(&mut cfg)?;
    if cfg.sequences.is_empty() {
        bail!("no input sequences; pass --input or set `sequences` in the config");
    }
    let report = run_experiment(&cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for c in &report.cells {
        println!(
            "{:<32} {:<7} {:>9} dB  {:>4} blocks  {:>8.2} s",
            c.sequence,
            c.algorithm.name(),
            c.psnr.to_string(),
            c.blocks.len(),
            c.seconds
        );
    }
    println!("reports written to {}", report.output.display());
    Ok(())
}

fn conceal(args: ConcealArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    args.settings.apply(&mut cfg)?;
    let (seq, chroma) = load(&cfg, &args.input)?;
    let mask = mask_for(&cfg, &seq)?;
    let corrupted = apply_loss(&seq, &mask)?;
    let run = conceal_sequence(
        &corrupted,
        &mask,
        &cfg.conceal.with_algorithm(args.algorithm),
    )?;
    for f in run.failures() {
        eprintln!(
            "warning: {} failed: {}",
            f.block,
            f.error.as_deref().unwrap_or_default()
        );
    }
    write_atomic(&args.output, &encode_y4m(&run.sequence, chroma.as_ref()))?;
    if let Some(p) = &args.pattern_out {
        write_atomic(p, format_pattern(&mask).as_bytes())?;
    }
    let psnr = psnr_lost_pixels(&seq, &run.sequence, &mask)?;
    println!(
        "{}: {} blocks, PSNR {} dB, {:.2} s",
        args.algorithm.name(),
        mask.blocks().len(),
        psnr,
        run.seconds
    );
    Ok(())
}

fn corrupt(args: CorruptArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    args.settings.apply(&mut cfg)?;
    let (seq, chroma) = load(&cfg, &args.input)?;
    let mask = mask_for(&cfg, &seq)?;
    write_atomic(
        &args.output,
        &encode_y4m(&apply_loss(&seq, &mask)?, chroma.as_ref()),
    )?;
    if let Some(p) = &args.pattern_out {
        write_atomic(p, format_pattern(&mask).as_bytes())?;
    }
    println!("{} blocks removed", mask.blocks().len());
    Ok(())
}

fn psnr(args: PsnrArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    args.settings.apply(&mut cfg)?;
    let (original, _) = load(&cfg, &args.original)?;
    let (concealed, _) = load(&cfg, &args.concealed)?;
    let mask = mask_for(&cfg, &original)?;
    let p = psnr_lost_pixels(&original, &concealed, &mask)?;
    println!("{p} dB (mse {:.6}, {} pixels)", p.mse(), p.count);
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec: SynthSpec = args.spec.parse()?;
    let seq = spec.generate();
    write_atomic(&args.output, &encode_y4m(&seq, None))?;
    println!(
        "{}: {}x{}, {} frames",
        spec.name(),
        seq.width(),
        seq.height(),
        seq.frame_count()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Conceal(a) => conceal(a),
        Command::Corrupt(a) => corrupt(a),
        Command::Psnr(a) => psnr(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
