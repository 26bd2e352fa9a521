//! Tracks the synthetic moving square and prints per-sequence scores.
//!
//! Usage: `cargo run --example moving_square [config.json] [foreground]`

use std::time::Instant;

use evfuse::config::RunConfig;
use evfuse::eval::{mean_iou, precision_curve, success_curve};
use evfuse::sim::{simulate_events, SimulatorConfig};
use evfuse::synthetic::MovingSquare;
use evfuse::tracker::track_sequence;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let config = match args.first() {
        Some(path) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    let mut square = MovingSquare::default();
    if let Some(fg) = args.get(1) {
        square.foreground = fg.parse()?;
    }
    let (frames, gt) = square.generate();
    let events = simulate_events(&frames.intensity_frames(), &SimulatorConfig { theta: config.theta, eps: config.eps })?;
    println!("{} events", events.len());
    let start = Instant::now();
    let out = track_sequence::<f32>(&config, &frames, &events, gt[0])?;
    let pred: Vec<_> = out.iter().map(|(b, _)| Some(*b)).collect();
    let gt: Vec<_> = gt.iter().copied().map(Some).collect();
    for (i, ((b, s), g)) in out.iter().zip(&gt).enumerate() {
        println!("{i:3} iou {:.3} score {s:8.3} box {:.1},{:.1},{:.1},{:.1}", b.iou(g.as_ref().unwrap()), b.x, b.y, b.w, b.h);
    }
    println!(
        "mean IoU {:.4}  P@20 {:.4}  AUC {:.4}  time {:.1}s",
        mean_iou(&pred, &gt)?,
        precision_curve(&pred, &gt)?.1,
        success_curve(&pred, &gt)?.1,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
