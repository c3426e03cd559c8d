//! Acceptance suite: runs every verification claim at its pinned tolerance
//! and prints one pass/fail line per criterion (use `--nocapture` to see
//! the lines for passing tests).
//!
//! Run with: `cargo test --test acceptance -- --nocapture`

use incentive_dynamics::verify::{self, ClaimOutcome};

fn check(outcome: ClaimOutcome) {
    println!("{}", verify::format_outcome(&outcome));
    assert!(
        outcome.passed,
        "criterion {} ({}) failed: {}",
        outcome.criterion, outcome.id, outcome.details
    );
}

fn run(id: &str) -> ClaimOutcome {
    let claims = verify::select_claims(Some(id)).expect("claim exists");
    assert_eq!(claims.len(), 1);
    (claims[0].run)()
}

#[test]
fn criterion_01_uniform_nash_iff_equal_row_sums() {
    check(run("lemma1"));
}

#[test]
fn criterion_02_permuted_rows_make_uniform_a_dash_equilibrium() {
    check(run("prop1"));
}

#[test]
fn criterion_03_dash_components_equal_and_interior_equilibria_uniform() {
    check(run("prop2"));
}

#[test]
fn criterion_04_dash_converges_globally_on_rps_family() {
    check(run("theorem"));
}

#[test]
fn criterion_05_canonical_dynamics_do_not_converge_on_bad_rps() {
    check(run("nonconvergence"));
}

#[test]
fn criterion_06_unequal_row_sum_counterexample() {
    check(run("counterexample1"));
}

#[test]
fn criterion_07_equal_row_sum_counterexample() {
    check(run("counterexample2"));
}

#[test]
fn criterion_08_incentive_stability_margin_sampling() {
    check(run("iss"));
}

#[test]
fn criterion_09_reciprocal_sum_minimum() {
    check(run("fmin"));
}

#[test]
fn criterion_10_integrator_conserves_replicator_log_barrier() {
    check(run("integrator"));
}
