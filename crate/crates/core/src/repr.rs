//! Network-facing representations: per-window event count images and
//! normalised 3-channel tensors for both modalities.

use crate::event::{EventError, EventStream, Polarity};
use crate::frames::ImageFrame;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// ON/OFF event counts over one time window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventImage {
    pub width: u32,
    pub height: u32,
    /// Row-major, `height × width`.
    pub on_counts: Vec<u32>,
    pub off_counts: Vec<u32>,
}

impl EventImage {
    pub fn zeros(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self { width, height, on_counts: vec![0; n], off_counts: vec![0; n] }
    }

    pub fn on(&self, x: u32, y: u32) -> u32 {
        self.on_counts[(y * self.width + x) as usize]
    }

    pub fn off(&self, x: u32, y: u32) -> u32 {
        self.off_counts[(y * self.width + x) as usize]
    }

    pub fn max_count(&self) -> u32 {
        self.on_counts.iter().chain(&self.off_counts).copied().max().unwrap_or(0)
    }

    /// Elementwise sum of two images of the same resolution.
    pub fn merged(&self, other: &Self) -> Option<Self> {
        if (self.width, self.height) != (other.width, other.height) {
            return None;
        }
        let add = |a: &[u32], b: &[u32]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        Some(Self {
            width: self.width,
            height: self.height,
            on_counts: add(&self.on_counts, &other.on_counts),
            off_counts: add(&self.off_counts, &other.off_counts),
        })
    }
}

/// Count events with `t_start <= t < t_end` per pixel and polarity.
pub fn stack_events(stream: &EventStream, t_start: u64, t_end: u64) -> Result<EventImage, EventError> {
    let mut img = EventImage::zeros(stream.width(), stream.height());
    for e in stream.window(t_start, t_end)? {
        let idx = (e.y * img.width + e.x) as usize;
        match e.p {
            Polarity::On => img.on_counts[idx] += 1,
            Polarity::Off => img.off_counts[idx] += 1,
        }
    }
    Ok(img)
}

/// `3×H×W` tensor: ON counts, OFF counts, zeros; both count channels divided
/// by `max(1, largest count)`.
pub fn to_network_tensor<T: Scalar>(img: &EventImage) -> Tensor<T> {
    let (w, h) = (img.width as usize, img.height as usize);
    let m = T::of(img.max_count().max(1) as f64);
    let mut data = Vec::with_capacity(3 * w * h);
    data.extend(img.on_counts.iter().map(|&c| T::of(c as f64) / m));
    data.extend(img.off_counts.iter().map(|&c| T::of(c as f64) / m));
    data.extend(std::iter::repeat_n(T::zero(), w * h));
    Tensor::new(vec![3, h, w], data).expect("shape matches")
}

/// `3×H×W` tensor scaled to `[0, 1]`; grayscale is replicated over channels.
pub fn preprocess_frame<T: Scalar>(frame: &ImageFrame) -> Tensor<T> {
    let (w, h) = (frame.width as usize, frame.height as usize);
    let n = w * h;
    let full = T::of(255.0);
    let mut data = vec![T::zero(); 3 * n];
    match frame.channels {
        1 => {
            for c in 0..3 {
                for (d, &v) in data[c * n..(c + 1) * n].iter_mut().zip(&frame.data) {
                    *d = T::of(v as f64) / full;
                }
            }
        }
        _ => {
            for (i, px) in frame.data.chunks_exact(3).enumerate() {
                for c in 0..3 {
                    data[c * n + i] = T::of(px[c] as f64) / full;
                }
            }
        }
    }
    Tensor::new(vec![3, h, w], data).expect("shape matches")
}

/// Grayscale rendering of the two count channels, normalised like
/// [`to_network_tensor`]: `(on, off)`.
pub fn render_counts(img: &EventImage) -> (ImageFrame, ImageFrame) {
    let m = img.max_count().max(1) as f64;
    let render = |c: &[u32]| c.iter().map(|&v| (255.0 * v as f64 / m).round() as u8).collect();
    (
        ImageFrame::gray(img.width, img.height, render(&img.on_counts)),
        ImageFrame::gray(img.width, img.height, render(&img.off_counts)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Event;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn stream(events: Vec<Event>) -> EventStream {
        EventStream::new(8, 6, events).unwrap()
    }

    #[test]
    fn empty_stream_gives_zero_image() {
        let img = stack_events(&EventStream::empty(8, 6), 0, 100).unwrap();
        assert_eq!(img, EventImage::zeros(8, 6));
        assert!(to_network_tensor::<f64>(&img).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_on_event() {
        let img = stack_events(&stream(vec![Event::new(5, 3, 4, Polarity::On)]), 0, 10).unwrap();
        assert_eq!(img.on(3, 4), 1);
        assert_eq!(img.on_counts.iter().sum::<u32>(), 1);
        assert_eq!(img.off_counts.iter().sum::<u32>(), 0);
    }

    #[test]
    fn window_is_half_open() {
        let s = stream(vec![Event::new(10, 0, 0, Polarity::On), Event::new(20, 0, 0, Polarity::On)]);
        assert_eq!(stack_events(&s, 10, 20).unwrap().on(0, 0), 1);
        assert!(stack_events(&s, 20, 10).is_err());
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut events: Vec<Event> = (0..200)
            .map(|i| Event::new(7, (i * 7) % 8, (i * 5) % 6, if i % 3 == 0 { Polarity::Off } else { Polarity::On }))
            .collect();
        let a = stack_events(&stream(events.clone()), 0, 10).unwrap();
        events.shuffle(&mut rng);
        let b = stack_events(&stream(events), 0, 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn network_tensor_normalisation() {
        let mut img = EventImage::zeros(2, 1);
        img.on_counts[1] = 4;
        img.off_counts[0] = 2;
        let t = to_network_tensor::<f64>(&img);
        assert_eq!(t.shape(), &[3, 1, 2]);
        assert_eq!(t.data()[1], 1.0);
        assert_eq!(t.data()[2], 0.5);
        assert!(t.data()[4..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn frame_preprocessing() {
        let black = preprocess_frame::<f64>(&ImageFrame::gray(2, 2, vec![0; 4]));
        assert!(black.data().iter().all(|&v| v == 0.0));
        let white = preprocess_frame::<f64>(&ImageFrame::gray(2, 2, vec![255; 4]));
        assert!(white.data().iter().all(|&v| v == 1.0));
        let mid = preprocess_frame::<f64>(&ImageFrame::gray(1, 1, vec![128]));
        assert!((mid.data()[0] - 0.50196).abs() < 1e-5);
        assert_eq!(mid.shape(), &[3, 1, 1]);
        let rgb = preprocess_frame::<f64>(&ImageFrame::rgb(1, 1, vec![0, 255, 51]));
        assert_eq!(rgb.data(), &[0.0, 1.0, 0.2]);
    }

    fn arb_stream() -> impl Strategy<Value = EventStream> {
        prop::collection::vec((0u64..50, 0u32..8, 0u32..6, any::<bool>()), 0..100).prop_map(|raw| {
            let mut t = 0;
            stream(
                raw.into_iter()
                    .map(|(dt, x, y, on)| {
                        t += dt;
                        Event::new(t, x, y, if on { Polarity::On } else { Polarity::Off })
                    })
                    .collect(),
            )
        })
    }

    proptest! {
        #[test]
        fn additivity_and_conservation(s in arb_stream(), a in 0u64..3000, b in 0u64..3000, c in 0u64..3000) {
            let mut v = [a, b, c];
            v.sort();
            let left = stack_events(&s, v[0], v[1]).unwrap();
            let right = stack_events(&s, v[1], v[2]).unwrap();
            let whole = stack_events(&s, v[0], v[2]).unwrap();
            prop_assert_eq!(left.merged(&right).unwrap(), whole.clone());
            let n_on = s.events().iter().filter(|e| e.t >= v[0] && e.t < v[2] && e.p == Polarity::On).count();
            prop_assert_eq!(whole.on_counts.iter().sum::<u32>() as usize, n_on);
            let t = to_network_tensor::<f32>(&whole);
            prop_assert!(t.data().iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
}
