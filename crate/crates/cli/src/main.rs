//! `evfuse`: simulate events, stack event images, track, and evaluate.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "evfuse", version, about = "Visible + event camera single-object tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a frame directory into an event file.
    Simulate {
        frames_dir: PathBuf,
        out_events: PathBuf,
        /// contrast threshold
        #[arg(long, default_value_t = 0.2)]
        theta: f64,
        /// log offset
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
    },
    /// Accumulate events in `[t0, t1)` into `<prefix>_on.pgm` and `<prefix>_off.pgm`.
    Stack { events: PathBuf, t0: u64, t1: u64, out_prefix: String },
    /// Track one sequence from its first ground-truth box.
    Track {
        frames_dir: PathBuf,
        events: PathBuf,
        gt: PathBuf,
        config: PathBuf,
        out_results: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Score a results directory against an annotation directory.
    Eval {
        results_dir: PathBuf,
        annotations_dir: PathBuf,
        out_report: PathBuf,
        /// tag file used instead of `<annotations_dir>/attributes.json`
        #[arg(long)]
        attributes: Option<PathBuf>,
    },
    /// Write the synthetic moving-square sequence: frames plus a ground-truth file.
    Synth {
        out_frames_dir: PathBuf,
        out_gt: PathBuf,
        /// square brightness (background is 128)
        #[arg(long, default_value_t = 255)]
        foreground: u8,
        #[arg(long, default_value_t = 60)]
        frames: usize,
    },
}

/// Per-flag overrides applied on top of the JSON config.
#[derive(Debug, Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    fusion: Option<String>,
    /// both | frame | event
    #[arg(long)]
    modality: Option<String>,
    /// f32 | f64
    #[arg(long)]
    precision: Option<String>,
    /// any other field, as `key=value` with a JSON value (bare strings allowed)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn init_logging() {
    let level = match std::env::var("EVFUSE_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Off,
        Ok("debug") => log::LevelFilter::Debug,
        Ok("trace") => log::LevelFilter::Trace,
        Ok("info") | Err(_) => log::LevelFilter::Info,
        Ok(other) => {
            eprintln!("warning: unknown EVFUSE_LOG value {other:?}, using info");
            log::LevelFilter::Info
        }
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let result = match cli.command {
        Command::Simulate { frames_dir, out_events, theta, eps } => {
            commands::simulate(&frames_dir, &out_events, theta, eps)
        }
        Command::Stack { events, t0, t1, out_prefix } => commands::stack(&events, t0, t1, &out_prefix),
        Command::Track { frames_dir, events, gt, config, out_results, overrides } => {
            commands::track(&frames_dir, &events, &gt, &config, &out_results, &overrides.into())
        }
        Command::Eval { results_dir, annotations_dir, out_report, attributes } => {
            commands::eval(&results_dir, &annotations_dir, &out_report, attributes.as_deref())
        }
        Command::Synth { out_frames_dir, out_gt, foreground, frames } => {
            commands::synth(&out_frames_dir, &out_gt, foreground, frames)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

impl From<Overrides> for commands::ConfigOverrides {
    fn from(o: Overrides) -> Self {
        let mut pairs = Vec::new();
        if let Some(s) = o.seed {
            pairs.push(("seed".to_string(), s.to_string()));
        }
        for (k, v) in [("fusion", o.fusion), ("modality", o.modality), ("precision", o.precision)] {
            if let Some(v) = v {
                pairs.push((k.to_string(), v));
            }
        }
        commands::ConfigOverrides { pairs, raw: o.set }
    }
}
