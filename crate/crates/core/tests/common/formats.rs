//! Random valid event streams and weight files.

use evfuse::nn::{WeightEntry, WeightFile};
use evfuse::{Event, EventStream, Polarity};
use rand::Rng;

pub const INSTANCES: u64 = 1000;

pub fn random_stream<R: Rng>(rng: &mut R) -> EventStream {
    let width = if rng.random_bool(0.1) { u32::MAX } else { rng.random_range(1..=2048) };
    let height = rng.random_range(1..=2048);
    let n = rng.random_range(0..200);
    let mut t = if rng.random_bool(0.1) { u64::MAX - 10_000 } else { rng.random_range(0..1_000_000) };
    let events = (0..n)
        .map(|_| {
            t += rng.random_range(0..50);
            let p = if rng.random_bool(0.5) { Polarity::On } else { Polarity::Off };
            Event::new(t, rng.random_range(0..width), rng.random_range(0..height), p)
        })
        .collect();
    EventStream::new(width, height, events).unwrap()
}

fn random_value<R: Rng>(rng: &mut R) -> f32 {
    loop {
        let v = f32::from_bits(rng.random());
        if v.is_finite() {
            return v;
        }
    }
}

pub fn random_weights<R: Rng>(rng: &mut R) -> WeightFile {
    let count = rng.random_range(0..6);
    let entries = (0..count)
        .map(|i| {
            let stem: String = (0..rng.random_range(1..12)).map(|_| rng.random_range('a'..='z')).collect();
            let name = match rng.random_range(0..3) {
                0 => format!("{stem}.{i}"),
                1 => format!("ß{stem}→{i}"),
                _ => format!("layer{i}.{stem}.weight"),
            };
            let rank = rng.random_range(0..=4);
            let shape: Vec<usize> = (0..rank).map(|_| rng.random_range(0..=4)).collect();
            let len = shape.iter().product();
            let values = (0..len).map(|_| random_value(rng)).collect();
            WeightEntry { name, shape, values }
        })
        .collect();
    WeightFile { entries }
}
