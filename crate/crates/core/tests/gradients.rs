mod common;

use common::grad::{self, Check, TOLERANCE};

fn assert_op(name: &str, op: Check) {
    let worst = grad::worst(op);
    assert!(worst < TOLERANCE, "{name}: relative error {worst:e} over {} seeds", grad::SEEDS);
}

#[test]
fn conv() {
    assert_op("conv", grad::conv);
}

#[test]
fn fully_connected() {
    assert_op("fc", grad::fully_connected);
}

#[test]
fn relu() {
    assert_op("relu", grad::relu_op);
}

#[test]
fn max_pool() {
    assert_op("max_pool", grad::max_pool);
}

#[test]
fn softmax() {
    assert_op("softmax", grad::softmax_op);
    assert_op("softmax_rows", grad::softmax_rows_op);
}

#[test]
fn cross_entropy() {
    assert_op("bce", grad::bce);
    assert_op("bce_batch", grad::bce_batch);
}

#[test]
fn instance_embedding() {
    assert_op("instance_embedding", grad::instance_embedding);
}

#[test]
fn cross_attend() {
    assert_op("cross_attend", grad::cross_attend);
}

#[test]
fn self_attend() {
    assert_op("self_attend", grad::self_attend);
}

#[test]
fn cmt_fuse() {
    assert_op("cmt_fuse", grad::cmt);
}

#[test]
fn middle_fusion() {
    assert_op("middle_fusion", grad::middle);
}

#[test]
fn classifier_with_loss() {
    assert_op("classifier", grad::classifier);
}

#[test]
fn every_op_is_listed_once() {
    let mut names: Vec<&str> = grad::OPS.iter().map(|(n, _)| *n).collect();
    names.sort_unstable();
    names.dedup();
    assert_eq!(names.len(), grad::OPS.len());
}
