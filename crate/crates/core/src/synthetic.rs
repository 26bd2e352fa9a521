//! Synthetic test sequences: a bright square moving over a flat background.

use crate::bbox::BBox;
use crate::frames::{FrameSequence, ImageFrame};

#[derive(Debug, Clone, PartialEq)]
pub struct MovingSquare {
    pub width: u32,
    pub height: u32,
    pub size: u32,
    pub foreground: u8,
    pub background: u8,
    /// top-left corner in frame 0
    pub start: (i64, i64),
    /// pixels per frame; reflects off the borders
    pub velocity: (i64, i64),
    pub frames: usize,
    pub frame_interval_us: u64,
}

impl Default for MovingSquare {
    /// 24×24 white square on gray 128, 3 px/frame, 128×128, 60 frames.
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            size: 24,
            foreground: 255,
            background: 128,
            start: (8, 52),
            velocity: (3, 0),
            frames: 60,
            frame_interval_us: 10_000,
        }
    }
}

impl MovingSquare {
    pub fn low_contrast() -> Self {
        Self { foreground: 140, ..Self::default() }
    }

    /// Top-left positions per frame, bouncing inside the canvas.
    pub fn positions(&self) -> Vec<(i64, i64)> {
        let span = |extent: u32| (extent as i64 - self.size as i64).max(0);
        let bounce = |start: i64, v: i64, span: i64, i: i64| {
            if span == 0 {
                return 0;
            }
            let p = (start + v * i).rem_euclid(2 * span);
            if p > span {
                2 * span - p
            } else {
                p
            }
        };
        (0..self.frames as i64)
            .map(|i| {
                (
                    bounce(self.start.0, self.velocity.0, span(self.width), i),
                    bounce(self.start.1, self.velocity.1, span(self.height), i),
                )
            })
            .collect()
    }

    /// Frames plus the ground-truth box of every frame.
    pub fn generate(&self) -> (FrameSequence, Vec<BBox>) {
        let (w, h, s) = (self.width as i64, self.height as i64, self.size as i64);
        let mut frames = Vec::with_capacity(self.frames);
        let mut boxes = Vec::with_capacity(self.frames);
        for (x0, y0) in self.positions() {
            let mut data = vec![self.background; (w * h) as usize];
            for y in y0.max(0)..(y0 + s).min(h) {
                for x in x0.max(0)..(x0 + s).min(w) {
                    data[(y * w + x) as usize] = self.foreground;
                }
            }
            frames.push(ImageFrame::gray(self.width, self.height, data));
            boxes.push(BBox::new(x0 as f64, y0 as f64, s as f64, s as f64));
        }
        let timestamps = (0..self.frames as u64).map(|i| i * self.frame_interval_us).collect();
        (FrameSequence { frames, timestamps }, boxes)
    }
}
