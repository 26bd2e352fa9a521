//! Brute-force per-pixel event generation and random frame sequences.

use evfuse::sim::{IntensityFrame, SimulatorConfig};
use evfuse::{Event, EventStream, Polarity};
use rand::Rng;

pub const SIZE: u32 = 8;
pub const FRAMES: usize = 10;

/// `FRAMES` random `SIZE×SIZE` frames with integer intensities in `lo..=hi`
/// and random strictly increasing timestamps.
pub fn random_sequence(seed: u64, lo: u8, hi: u8) -> Vec<IntensityFrame> {
    let mut rng = super::rng(seed);
    let mut t = rng.random_range(0..1000u64);
    (0..FRAMES)
        .map(|_| {
            t += rng.random_range(1..5000u64);
            let pixels = (0..SIZE * SIZE).map(|_| f64::from(rng.random_range(lo..=hi))).collect();
            IntensityFrame::new(t, SIZE, SIZE, pixels).unwrap()
        })
        .collect()
}

pub fn scaled(frames: &[IntensityFrame], c: f64) -> Vec<IntensityFrame> {
    frames
        .iter()
        .map(|f| IntensityFrame::new(f.t, f.width, f.height, f.pixels.iter().map(|v| v * c).collect()).unwrap())
        .collect()
}

/// Counts, per pixel, how many whole steps of `θ` (less a `1e-9·θ` slack)
/// fit between the reference and the new log intensity, then moves the
/// reference by that many steps.
pub fn brute_force(frames: &[IntensityFrame], cfg: &SimulatorConfig) -> Vec<Event> {
    let log = |v: f64| if v < cfg.eps { cfg.eps.ln() } else { v.ln() };
    let w = frames[0].width as usize;
    let mut reference: Vec<f64> = frames[0].pixels.iter().map(|&v| log(v)).collect();
    let mut out = Vec::new();
    for pair in frames.windows(2) {
        let (t0, t1) = (pair[0].t, pair[1].t);
        // (t, pixel, emission index, polarity)
        let mut batch: Vec<(u64, usize, u64, Polarity)> = Vec::new();
        for (idx, &v) in pair[1].pixels.iter().enumerate() {
            let target = log(v);
            let delta = target - reference[idx];
            let (p, sign) = if delta > 0.0 { (Polarity::On, 1.0) } else { (Polarity::Off, -1.0) };
            let mut k = 0u64;
            while (k + 1) as f64 * cfg.theta <= delta.abs() + 1e-9 * cfg.theta {
                k += 1;
            }
            for i in 1..=k {
                let t = t0 + (i * (t1 - t0) + k - 1) / k;
                batch.push((t, idx, i, p));
            }
            reference[idx] += sign * k as f64 * cfg.theta;
        }
        batch.sort_by_key(|&(t, idx, i, _)| (t, idx, i));
        out.extend(batch.into_iter().map(|(t, idx, _, p)| Event::new(t, (idx % w) as u32, (idx / w) as u32, p)));
    }
    out
}

/// Largest per-pixel gap between the final log intensity and the one
/// rebuilt from the first frame plus `θ` times the signed event count.
pub fn conservation_error(frames: &[IntensityFrame], cfg: &SimulatorConfig, stream: &EventStream) -> f64 {
    let w = frames[0].width as usize;
    let mut net = vec![0i64; frames[0].pixels.len()];
    for e in stream.events() {
        net[e.y as usize * w + e.x as usize] += i64::from(e.p.sign());
    }
    let last = frames.last().unwrap();
    frames[0]
        .pixels
        .iter()
        .zip(&last.pixels)
        .zip(&net)
        .map(|((&a, &b), &k)| (cfg.log_intensity(b) - (cfg.log_intensity(a) + k as f64 * cfg.theta)).abs())
        .fold(0.0, f64::max)
}
