mod common;

use common::gradcheck::{self, skipped, worst, MAX_SKIPPED_SHARE};
use fssei::complex_nn::{Mode, Padding};

const LAYER_TOL: f64 = 1e-4;
const NETWORK_TOL: f64 = 1e-3;

fn assert_all(seeds: std::ops::Range<u64>, tol: f64, f: impl Fn(u64) -> gradcheck::Report) {
    for seed in seeds {
        let report = f(seed);
        let (e, name) = worst(&report);
        assert!(e <= tol, "seed {seed}: {name} relative error {e:e} > {tol:e}");
        let (s, total) = skipped(&report);
        assert!((s as f64) <= MAX_SKIPPED_SHARE * total as f64, "seed {seed}: {s} of {total} coordinates not smooth");
    }
}

#[test]
fn conv_same_padding() {
    assert_all(0..10, LAYER_TOL, |s| gradcheck::conv(s, Padding::Same));
}

#[test]
fn conv_valid_padding() {
    assert_all(0..10, LAYER_TOL, |s| gradcheck::conv(s, Padding::Valid));
}

#[test]
fn cvrelu() {
    assert_all(0..10, LAYER_TOL, gradcheck::relu);
}

#[test]
fn cvbn_train_mode() {
    assert_all(0..10, LAYER_TOL, |s| gradcheck::batchnorm(s, Mode::Train));
}

#[test]
fn cvbn_eval_mode() {
    assert_all(0..10, LAYER_TOL, |s| gradcheck::batchnorm(s, Mode::Eval));
}

#[test]
fn magnitude_pool() {
    assert_all(0..10, LAYER_TOL, gradcheck::pool);
}

#[test]
fn dense_head() {
    assert_all(0..10, LAYER_TOL, gradcheck::head);
}

#[test]
fn loss_terms() {
    assert_all(0..10, 1e-6, gradcheck::losses);
}

#[test]
fn composed_network() {
    assert_all(0..10, NETWORK_TOL, gradcheck::network);
}
