use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use evfuse::bbox::BBox;
use evfuse::config::{Precision, RunConfig};
use evfuse::eval::{evaluate_dataset, parse_attributes, parse_box_file, write_report_files};
use evfuse::event::{parse_event_file, serialize_event_stream, EventStream};
use evfuse::frames::{encode_pnm, load_frame_dir, write_frame_dir, FrameSequence};
use evfuse::repr::{render_counts, stack_events};
use evfuse::sim::{simulate_events, SimulatorConfig};
use evfuse::synthetic::MovingSquare;
use evfuse::tracker::track_sequence;
use serde_json::Value;

use crate::output::{write_all_atomic, write_atomic, write_dir_atomic};

pub struct ConfigOverrides {
    /// typed flags, applied first
    pub pairs: Vec<(String, String)>,
    /// `key=value` strings from `--set`
    pub raw: Vec<String>,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_events(path: &Path) -> Result<EventStream> {
    parse_event_file(&read_bytes(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_frames(dir: &Path) -> Result<FrameSequence> {
    load_frame_dir(dir).with_context(|| format!("loading frames from {}", dir.display()))
}

pub fn simulate(frames_dir: &Path, out: &Path, theta: f64, eps: f64) -> Result<()> {
    let sim = SimulatorConfig { theta, eps };
    sim.validate()?;
    let frames = load_frames(frames_dir)?;
    let events = simulate_events(&frames.intensity_frames(), &sim)?;
    log::info!("{} frames → {} events", frames.frames.len(), events.len());
    write_atomic(out, &serialize_event_stream(&events))
}

pub fn stack(events: &Path, t0: u64, t1: u64, prefix: &str) -> Result<()> {
    if t1 < t0 {
        bail!("window end {t1} is before its start {t0}");
    }
    let stream = load_events(events)?;
    let img = stack_events(&stream, t0, t1)?;
    let (on, off) = render_counts(&img);
    log::info!("window [{t0}, {t1}): max count {}", img.max_count());
    write_all_atomic(&[
        (PathBuf::from(format!("{prefix}_on.pgm")), encode_pnm(&on)?),
        (PathBuf::from(format!("{prefix}_off.pgm")), encode_pnm(&off)?),
    ])
}

/// Bare words become JSON strings, so `--set backbone=random` works unquoted.
fn json_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

/// Loads `path`, applies the overrides and validates the result.
pub fn load_config(path: &Path, overrides: &ConfigOverrides) -> Result<RunConfig> {
    let text = read_text(path)?;
    let mut value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let obj = value.as_object_mut().with_context(|| format!("{}: expected a JSON object", path.display()))?;
    for (k, v) in &overrides.pairs {
        obj.insert(k.clone(), json_value(v));
    }
    for kv in &overrides.raw {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set {kv:?}: expected KEY=VALUE"))?;
        obj.insert(k.trim().to_string(), json_value(v.trim()));
    }
    RunConfig::from_json(&value.to_string()).with_context(|| format!("invalid configuration {}", path.display()))
}

fn format_results(rows: &[(BBox, f64)]) -> String {
    rows.iter().map(|(b, s)| format!("{:.4},{:.4},{:.4},{:.4},{:.4}\n", b.x, b.y, b.w, b.h, s)).collect()
}

pub fn track(
    frames_dir: &Path,
    events: &Path,
    gt: &Path,
    config: &Path,
    out: &Path,
    overrides: &ConfigOverrides,
) -> Result<()> {
    let config = load_config(config, overrides)?;
    let gt_boxes = parse_box_file(&read_text(gt)?).with_context(|| format!("parsing {}", gt.display()))?;
    let init = gt_boxes
        .first()
        .copied()
        .flatten()
        .with_context(|| format!("{}: the first line must hold a valid box", gt.display()))?;
    let frames = load_frames(frames_dir)?;
    let stream = load_events(events)?;
    log::info!("tracking {} frames with fusion {} (seed {})", frames.frames.len(), config.fusion, config.seed);
    let rows = match config.precision {
        Precision::F32 => track_sequence::<f32>(&config, &frames, &stream, init)?,
        Precision::F64 => track_sequence::<f64>(&config, &frames, &stream, init)?,
    };
    write_atomic(out, format_results(&rows).as_bytes())
}

/// `out/report.json` → `out/report`
fn stem_of(path: &Path) -> PathBuf {
    match path.extension() {
        Some(_) => path.with_extension(""),
        None => path.to_path_buf(),
    }
}

pub fn eval(results: &Path, annotations: &Path, out: &Path, attributes: Option<&Path>) -> Result<()> {
    let tags = attributes.map(|p| parse_attributes(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))).transpose()?;
    let report = evaluate_dataset(results, annotations, tags.as_ref())?;
    for e in &report.errors {
        log::warn!("{e}");
    }
    log::info!(
        "{} sequences: P@20 {:.4}  AUC {:.4}",
        report.sequences.len(),
        report.aggregate.p20,
        report.aggregate.auc
    );
    let stem = stem_of(out);
    let files: Vec<(PathBuf, Vec<u8>)> = write_report_files(&report)
        .into_iter()
        .map(|(suffix, text)| {
            let path = if suffix == "json" {
                out.to_path_buf()
            } else {
                PathBuf::from(format!("{}_{suffix}", stem.display()))
            };
            (path, text.into_bytes())
        })
        .collect();
    write_all_atomic(&files)
}

pub fn synth(frames_dir: &Path, gt: &Path, foreground: u8, frames: usize) -> Result<()> {
    if frames == 0 {
        bail!("--frames must be positive");
    }
    let square = MovingSquare { foreground, frames, ..MovingSquare::default() };
    let (seq, boxes) = square.generate();
    write_dir_atomic(frames_dir, |tmp| Ok(write_frame_dir(tmp, &seq)?))?;
    let text: String = boxes.iter().map(|b| format!("{},{},{},{}\n", b.x, b.y, b.w, b.h)).collect();
    write_atomic(gt, text.as_bytes())
}
