//! Exhaustive and finite-difference oracles for the fusion rules.

mod common;

use common::checks;

#[test]
fn small_networks_match_enumeration() {
    let w = checks::enumeration(11, 3);
    assert!(w.cases > 1000, "only {} cases", w.cases);
    assert!(w.err < 1e-12, "worst relative error {:e}", w.err);
}

#[test]
fn score_weights_match_finite_differences() {
    let e = checks::gradients(12, 50);
    assert!(e < 1e-4, "worst relative error {e:e}");
}

#[test]
fn reference_rules_collapse_without_attack() {
    let w = checks::collapse(13, 40);
    assert!(w.err < 1e-12, "worst gap {:e}", w.err);
}
