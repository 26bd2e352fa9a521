mod common;

use common::simulator::{brute_force, conservation_error, random_sequence, scaled};
use evfuse::sim::{simulate_events, IntensityFrame, SimulatorConfig};
use proptest::prelude::*;

#[test]
fn matches_brute_force_on_random_sequences() {
    let cfg = SimulatorConfig::default();
    for seed in 0..50 {
        let frames = random_sequence(seed, 0, 255);
        let stream = simulate_events(&frames, &cfg).unwrap();
        assert_eq!(stream.events(), brute_force(&frames, &cfg).as_slice(), "seed {seed}");
    }
}

#[test]
fn matches_brute_force_at_other_thresholds() {
    for (seed, theta) in [(100, 0.05), (101, 0.1), (102, 0.5), (103, 1.3)] {
        let cfg = SimulatorConfig { theta, eps: 1.0 };
        let frames = random_sequence(seed, 0, 255);
        let stream = simulate_events(&frames, &cfg).unwrap();
        assert_eq!(stream.events(), brute_force(&frames, &cfg).as_slice(), "theta {theta}");
    }
}

#[test]
fn scaling_intensities_changes_nothing() {
    let cfg = SimulatorConfig::default();
    for seed in 0..50 {
        // floor-safe: every value stays above eps and below 255 after scaling
        let frames = random_sequence(1000 + seed, 1, 170);
        let base = simulate_events(&frames, &cfg).unwrap();
        for c in [1.2, 1.5] {
            let s = simulate_events(&scaled(&frames, c), &cfg).unwrap();
            assert_eq!(base.events(), s.events(), "seed {seed}, c {c}");
        }
    }
}

#[test]
fn accumulator_is_conserved() {
    let cfg = SimulatorConfig::default();
    for seed in 0..50 {
        let frames = random_sequence(2000 + seed, 0, 255);
        let stream = simulate_events(&frames, &cfg).unwrap();
        let err = conservation_error(&frames, &cfg, &stream);
        assert!(err < cfg.theta, "seed {seed}: {err}");
    }
}

#[test]
fn timestamps_stay_inside_each_transition() {
    let cfg = SimulatorConfig { theta: 0.05, eps: 0.5 };
    let frames = random_sequence(7, 0, 255);
    let stream = simulate_events(&frames, &cfg).unwrap();
    let (first, last) = (frames[0].t, frames.last().unwrap().t);
    assert!(stream.events().iter().all(|e| e.t > first && e.t <= last));
    assert!(stream.events().windows(2).all(|w| w[0].t <= w[1].t));
}

proptest! {
    #[test]
    fn single_pixel_counts_match_the_log_ratio(a in 1u8..=255, b in 1u8..=255, theta in 0.05f64..1.0) {
        let cfg = SimulatorConfig { theta, eps: 0.5 };
        let f0 = IntensityFrame::new(0, 1, 1, vec![f64::from(a)]).unwrap();
        let f1 = IntensityFrame::new(1000, 1, 1, vec![f64::from(b)]).unwrap();
        let s = simulate_events(&[f0.clone(), f1.clone()], &cfg).unwrap();
        let oracle = brute_force(&[f0, f1], &cfg);
        prop_assert_eq!(s.events(), oracle.as_slice());
        let expected = ((f64::from(b).ln() - f64::from(a).ln()).abs() / theta).floor() as usize;
        prop_assert!(s.len().abs_diff(expected) <= 1);
    }

    #[test]
    fn reversing_contrast_flips_polarity(a in 1u8..=255, b in 1u8..=255) {
        let cfg = SimulatorConfig::default();
        let mk = |x: u8, y: u8| {
            vec![
                IntensityFrame::new(0, 1, 1, vec![f64::from(x)]).unwrap(),
                IntensityFrame::new(500, 1, 1, vec![f64::from(y)]).unwrap(),
            ]
        };
        let up = simulate_events(&mk(a, b), &cfg).unwrap();
        let down = simulate_events(&mk(b, a), &cfg).unwrap();
        prop_assert_eq!(up.len(), down.len());
        for (u, d) in up.events().iter().zip(down.events()) {
            prop_assert_eq!(u.p.sign(), -d.p.sign());
            prop_assert_eq!(u.t, d.t);
        }
    }
}
