use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use trajvis::config::{render_style_from_doc, IniDoc, PipelineConfig};
use trajvis::metrics::{evaluate_dirs, ClipPenalty, EvalOptions};
use trajvis::pipeline::{render_files, run};
use trajvis::render::RenderStyle;
use trajvis::synthgen::{write_scene, SceneSpec, SynthError, SyntheticScene};

#[derive(Parser)]
#[command(name = "trajvis", version, about = "Online target trajectory overlay for moving-camera video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the online pipeline described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic scene with ground truth.
    Synth {
        /// Scene spec (INI); defaults are used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Ext::Png)]
        ext: Ext,
    },
    /// Score predicted runs against references and write a CSV report.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// How a reference point whose prediction was clipped is scored.
        #[arg(long, value_enum, default_value_t = Penalty::Diagonal)]
        clipped: Penalty,
        /// Leave out the wall-clock columns (reproducible reports).
        #[arg(long)]
        no_timing: bool,
    },
    /// Draw stored trajectory records onto a frame directory.
    Render {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Track file with the boxes to outline.
        #[arg(long)]
        boxes: Option<PathBuf>,
        /// Config file whose [render] section sets the style.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Ext {
    Png,
    Ppm,
}

#[derive(Clone, Copy, ValueEnum)]
enum Penalty {
    Diagonal,
    Skip,
}

/// Exit status 2 for configuration problems, 1 for everything else.
enum Failure {
    Config(anyhow::Error),
    Hard(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Hard(e.into())
    }
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Hard(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config } => cmd_run(&config),
        Command::Synth { spec, out, seed, ext } => cmd_synth(spec.as_deref(), &out, seed, ext),
        Command::Eval {
            pred,
            reference,
            out,
            clipped,
            no_timing,
        } => cmd_eval(&pred, &reference, &out, clipped, no_timing),
        Command::Render {
            records,
            frames,
            out,
            boxes,
            config,
        } => cmd_render(&records, &frames, &out, boxes.as_deref(), config.as_deref()),
    }
}

fn cmd_run(config: &Path) -> Result<(), Failure> {
    let cfg = PipelineConfig::load(config).map_err(config_err)?;
    let summary = run(&cfg).map_err(|e| if e.is_config() { config_err(e) } else { Failure::Hard(e.into()) })?;
    info!(
        "{} frames in {:.2} s, {} camera fallbacks, {} low-confidence boxes; outputs in {}",
        summary.frames,
        summary.total_seconds,
        summary.fallbacks,
        summary.low_confidence,
        cfg.output_dir.display()
    );
    Ok(())
}

fn cmd_synth(spec: Option<&Path>, out: &Path, seed: Option<u64>, ext: Ext) -> Result<(), Failure> {
    let mut spec = match spec {
        Some(p) => SceneSpec::load(p).map_err(config_err)?,
        None => SceneSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let scene = SyntheticScene::new(spec).map_err(|e| match e {
        SynthError::InvalidSpec(_) | SynthError::Config(_) => config_err(e),
        other => Failure::Hard(other.into()),
    })?;
    let ext = match ext {
        Ext::Png => "png",
        Ext::Ppm => "ppm",
    };
    let files = write_scene(&scene, out, ext)?;
    info!(
        "{} frames in {}; {:.0} corners per frame ({})",
        scene.frames(),
        files.frames_dir.display(),
        files.suitability.corner_count,
        if files.suitability.suitable { "suitable" } else { "unsuitable" }
    );
    Ok(())
}

fn cmd_eval(pred: &Path, reference: &Path, out: &Path, clipped: Penalty, no_timing: bool) -> Result<(), Failure> {
    let opts = EvalOptions {
        penalty: match clipped {
            Penalty::Diagonal => ClipPenalty::Diagonal,
            Penalty::Skip => ClipPenalty::Skip,
        },
        timing: !no_timing,
    };
    let report = evaluate_dirs(pred, reference, &opts)?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    report.write_csv(&mut w).with_context(|| format!("writing {}", out.display()))?;
    w.flush().with_context(|| format!("writing {}", out.display()))?;
    let mut text = Vec::new();
    report.write_text(&mut text)?;
    info!("report written to {}\n{}", out.display(), String::from_utf8_lossy(&text).trim_end());
    Ok(())
}

fn cmd_render(
    records: &Path,
    frames: &Path,
    out: &Path,
    boxes: Option<&Path>,
    config: Option<&Path>,
) -> Result<(), Failure> {
    let style = match config {
        Some(p) => {
            let doc = IniDoc::load(p).map_err(config_err)?;
            render_style_from_doc(&doc).map_err(config_err)?
        }
        None => RenderStyle::default(),
    };
    let n = render_files(records, boxes, frames, out, &style)?;
    info!("{n} frames written to {}", out.display());
    Ok(())
}
