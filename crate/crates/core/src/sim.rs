//! Frame-to-event conversion with the ideal log-intensity threshold model.
//!
//! Each pixel keeps a reference log intensity `R`, initialised from the first
//! frame. For every new frame the pixel emits `floor(|L - R| / theta)` events
//! of the sign of `L - R` and moves `R` by exactly that many thresholds, so the
//! sub-threshold residual carries over to the next frame.

use crate::event::{Event, EventStream, Polarity};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("frame {index}: timestamp {t} is not after previous timestamp {prev}")]
    NonIncreasingTimestamp { index: usize, t: u64, prev: u64 },
    #[error("frame {index}: resolution {got:?} differs from {expected:?}")]
    ResolutionMismatch { index: usize, expected: (u32, u32), got: (u32, u32) },
    #[error("frame {index}: pixel {pixel} has intensity {value} outside [0, 255]")]
    IntensityRange { index: usize, pixel: usize, value: f64 },
    #[error("invalid simulator config: {0}")]
    Config(String),
}

/// A timed grayscale intensity image; values on the 0–255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityFrame {
    pub t: u64,
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<f64>,
}

impl IntensityFrame {
    pub fn new(t: u64, width: u32, height: u32, pixels: Vec<f64>) -> Result<Self, SimError> {
        if pixels.len() != width as usize * height as usize {
            return Err(SimError::Config(format!(
                "{}x{} frame needs {} pixels, got {}",
                width,
                height,
                width as usize * height as usize,
                pixels.len()
            )));
        }
        if let Some((pixel, &value)) =
            pixels.iter().enumerate().find(|(_, v)| !(0.0..=255.0).contains(*v))
        {
            return Err(SimError::IntensityRange { index: 0, pixel, value });
        }
        Ok(Self { t, width, height, pixels })
    }

    pub fn from_gray8(t: u64, width: u32, height: u32, pixels: &[u8]) -> Result<Self, SimError> {
        Self::new(t, width, height, pixels.iter().map(|&v| v as f64).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatorConfig {
    /// Contrast threshold in natural-log units.
    pub theta: f64,
    /// Intensity floor applied before the logarithm (0–255 scale).
    pub eps: f64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self { theta: 0.2, eps: 0.5 }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(SimError::Config(format!("theta must be > 0, got {}", self.theta)));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(SimError::Config(format!("eps must be > 0, got {}", self.eps)));
        }
        Ok(())
    }

    #[inline]
    pub fn log_intensity(&self, v: f64) -> f64 {
        v.max(self.eps).ln()
    }
}

/// Slack added to `|Δ|/θ` before flooring, so that a pixel returning to an
/// earlier intensity gives back exactly the events it produced.
pub const COUNT_SLACK: f64 = 1e-9;

/// Timestamp of the `i`-th (1-based) of `k` events between two frames.
/// Rounded up to whole microseconds so it stays inside `(t_prev, t_new]`.
#[inline]
pub fn interpolated_timestamp(t_prev: u64, t_new: u64, i: u64, k: u64) -> u64 {
    let dt = (t_new - t_prev) as u128;
    t_prev + ((i as u128 * dt).div_ceil(k as u128)) as u64
}

/// Convert an ordered frame sequence into a timestamp-sorted event stream.
///
/// Events produced by one frame transition are ordered by timestamp, then by
/// row-major pixel index, then by emission order.
pub fn simulate_events(frames: &[IntensityFrame], config: &SimulatorConfig) -> Result<EventStream, SimError> {
    config.validate()?;
    if frames.len() < 2 {
        return Err(SimError::TooFewFrames(frames.len()));
    }
    let first = &frames[0];
    let (width, height) = (first.width, first.height);
    for (index, f) in frames.iter().enumerate() {
        if (f.width, f.height) != (width, height) || f.pixels.len() != first.pixels.len() {
            return Err(SimError::ResolutionMismatch {
                index,
                expected: (width, height),
                got: (f.width, f.height),
            });
        }
        if let Some((pixel, &value)) =
            f.pixels.iter().enumerate().find(|(_, v)| !(0.0..=255.0).contains(*v))
        {
            return Err(SimError::IntensityRange { index, pixel, value });
        }
        if index > 0 && f.t <= frames[index - 1].t {
            return Err(SimError::NonIncreasingTimestamp { index, t: f.t, prev: frames[index - 1].t });
        }
    }

    let theta = config.theta;
    let mut reference: Vec<f64> = first.pixels.iter().map(|&v| config.log_intensity(v)).collect();
    let mut events = Vec::new();
    let mut batch: Vec<Event> = Vec::new();

    for pair in frames.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        batch.clear();
        for (idx, (r, &v)) in reference.iter_mut().zip(&next.pixels).enumerate() {
            let delta = config.log_intensity(v) - *r;
            let k = (delta.abs() / theta + COUNT_SLACK).floor();
            if k < 1.0 {
                continue;
            }
            let k_int = k as u64;
            let p = if delta > 0.0 { Polarity::On } else { Polarity::Off };
            let (x, y) = ((idx % width as usize) as u32, (idx / width as usize) as u32);
            for i in 1..=k_int {
                batch.push(Event::new(interpolated_timestamp(prev.t, next.t, i, k_int), x, y, p));
            }
            *r += k * theta * delta.signum();
        }
        // stable: ties keep pixel order, then emission order
        batch.sort_by_key(|e| e.t);
        events.extend_from_slice(&batch);
    }

    Ok(EventStream::new(width, height, events).expect("simulator emits valid events"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(t: u64, v: f64) -> IntensityFrame {
        IntensityFrame::new(t, 1, 1, vec![v]).unwrap()
    }

    #[test]
    fn identical_frames_emit_nothing() {
        let f = IntensityFrame::new(0, 3, 2, vec![77.0; 6]).unwrap();
        let mut g = f.clone();
        g.t = 10;
        let s = simulate_events(&[f, g], &SimulatorConfig::default()).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.resolution(), (3, 2));
    }

    #[test]
    fn doubling_emits_three_on_events() {
        // ln 2 / 0.2 = 3.47 -> 3 events, residual ln 2 - 0.6
        let cfg = SimulatorConfig { theta: 0.2, eps: 0.5 };
        let s = simulate_events(&[frame(0, 100.0), frame(300, 200.0)], &cfg).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.events().iter().all(|e| e.p == Polarity::On));
        let ts: Vec<u64> = s.events().iter().map(|e| e.t).collect();
        assert_eq!(ts, vec![100, 200, 300]);

        // residual 0.0931 + ln(1.1)=0.0953 crosses 0.2 once more
        let s = simulate_events(&[frame(0, 100.0), frame(300, 200.0), frame(400, 220.0)], &cfg).unwrap();
        assert_eq!(s.len(), 3);
        let s = simulate_events(&[frame(0, 100.0), frame(300, 200.0), frame(400, 225.0)], &cfg).unwrap();
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn halving_emits_three_off_events() {
        let cfg = SimulatorConfig { theta: 0.2, eps: 0.5 };
        let s = simulate_events(&[frame(0, 200.0), frame(300, 100.0)], &cfg).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.events().iter().all(|e| e.p == Polarity::Off));
    }

    #[test]
    fn floor_clamps_dark_pixels() {
        let cfg = SimulatorConfig { theta: 0.2, eps: 0.5 };
        // 0 and 0.25 are both below eps: no change in log intensity
        let s = simulate_events(&[frame(0, 0.0), frame(1, 0.25)], &cfg).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn timestamps_stay_inside_interval_when_dense() {
        let cfg = SimulatorConfig { theta: 0.05, eps: 0.5 };
        let s = simulate_events(&[frame(10, 1.0), frame(12, 255.0)], &cfg).unwrap();
        assert!(s.len() > 2);
        assert!(s.events().iter().all(|e| e.t > 10 && e.t <= 12));
        assert_eq!(s.events().last().unwrap().t, 12);
    }

    #[test]
    fn error_paths() {
        let cfg = SimulatorConfig::default();
        assert_eq!(simulate_events(&[frame(0, 1.0)], &cfg), Err(SimError::TooFewFrames(1)));
        assert!(matches!(
            simulate_events(&[frame(5, 1.0), frame(5, 2.0)], &cfg),
            Err(SimError::NonIncreasingTimestamp { index: 1, .. })
        ));
        let wide = IntensityFrame::new(9, 2, 1, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            simulate_events(&[frame(0, 1.0), wide], &cfg),
            Err(SimError::ResolutionMismatch { index: 1, .. })
        ));
        assert!(simulate_events(&[frame(0, 1.0), frame(1, 2.0)], &SimulatorConfig { theta: 0.0, eps: 0.5 }).is_err());
        assert!(IntensityFrame::new(0, 1, 1, vec![256.0]).is_err());
    }
}
