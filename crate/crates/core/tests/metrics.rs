mod common;

use common::metrics::{count_overlap, IntBox, Trajectories};
use evfuse::eval::{iou, mean_iou, precision_curve, success_curve, PRECISION_THRESHOLD};
use evfuse::BBox;
use proptest::prelude::*;

#[test]
fn iou_matches_pixel_counting() {
    let mut rng = common::rng(11);
    for _ in 0..100 {
        let (a, b) = (IntBox::random(&mut rng), IntBox::random(&mut rng));
        let (inter, union) = count_overlap(&a, &b);
        let got = iou(&a.bbox(), &b.bbox());
        assert!((got - inter as f64 / union as f64).abs() < 1e-12, "{a:?} {b:?}: {got}");
    }
}

#[test]
fn curves_match_counting_oracles() {
    let mut rng = common::rng(12);
    for _ in 0..20 {
        let traj = Trajectories::random(&mut rng);
        let (pred, gt) = traj.as_boxes();
        let (prec, p20) = precision_curve(&pred, &gt).unwrap();
        for (i, (&t, &v)) in prec.thresholds.iter().zip(&prec.values).enumerate() {
            assert_eq!(t, i as f64);
            assert_eq!(v, traj.precision_at(i as i64), "precision at {t}");
        }
        assert_eq!(p20, traj.precision_at(20));
        let (succ, auc) = success_curve(&pred, &gt).unwrap();
        assert_eq!(succ.thresholds.len(), 21);
        let mut sum = 0.0;
        for (i, &v) in succ.values.iter().enumerate() {
            assert_eq!(v, traj.success_at(i as i64), "success at {i}/20");
            sum += v;
        }
        assert!((auc - sum / 21.0).abs() < 1e-12);
    }
}

#[test]
fn perfect_track_auc_is_twenty_over_twenty_one() {
    let gt: Vec<Option<BBox>> = (0..30).map(|i| Some(BBox::new(i as f64, 2.0 * i as f64, 10.0, 12.0))).collect();
    let (_, auc) = success_curve(&gt, &gt).unwrap();
    assert!((auc - 20.0 / 21.0).abs() < 1e-12);
    let (curve, p20) = precision_curve(&gt, &gt).unwrap();
    assert_eq!(p20, 1.0);
    assert!(curve.values.iter().all(|&v| v == 1.0));
    assert_eq!(mean_iou(&gt, &gt).unwrap(), 1.0);
}

#[test]
fn precision_defaults_to_an_inclusive_twenty_pixels() {
    assert_eq!(PRECISION_THRESHOLD, 20.0);
    let gt = vec![Some(BBox::new(0.0, 0.0, 10.0, 10.0)); 2];
    let at = vec![Some(BBox::new(12.0, 16.0, 10.0, 10.0)); 2];
    assert_eq!(precision_curve(&at, &gt).unwrap().1, 1.0);
    let beyond = vec![Some(BBox::new(20.0 + 1e-9, 0.0, 10.0, 10.0)); 2];
    assert_eq!(precision_curve(&beyond, &gt).unwrap().1, 0.0);
}

#[test]
fn absent_ground_truth_is_skipped_and_missing_predictions_miss() {
    let b = BBox::new(5.0, 5.0, 10.0, 10.0);
    let gt = vec![Some(b), None, Some(b)];
    let pred = vec![Some(b), Some(BBox::new(90.0, 90.0, 1.0, 1.0)), None];
    assert_eq!(precision_curve(&pred, &gt).unwrap().1, 0.5);
    assert_eq!(mean_iou(&pred, &gt).unwrap(), 0.5);
    assert!(precision_curve(&pred[..2], &gt).is_err());
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(
        ax in -50.0f64..50.0, ay in -50.0f64..50.0, aw in 0.1f64..40.0, ah in 0.1f64..40.0,
        bx in -50.0f64..50.0, by in -50.0f64..50.0, bw in 0.1f64..40.0, bh in 0.1f64..40.0,
    ) {
        let (a, b) = (BBox::new(ax, ay, aw, ah), BBox::new(bx, by, bw, bh));
        let v = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn curves_are_monotone(seed in 0u64..1000) {
        let mut rng = common::rng(seed);
        let traj = Trajectories::random(&mut rng);
        let (pred, gt) = traj.as_boxes();
        let prec = precision_curve(&pred, &gt).unwrap().0;
        prop_assert!(prec.values.windows(2).all(|w| w[0] <= w[1]));
        let succ = success_curve(&pred, &gt).unwrap().0;
        prop_assert!(succ.values.windows(2).all(|w| w[0] >= w[1]));
    }
}
