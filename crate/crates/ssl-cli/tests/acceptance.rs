//! Acceptance gate: one test per criterion. Each prints its pass/fail line
//! (visible under `--nocapture`, or all at once via `ssl verify all`).

use ssl_cli::verify::run_criterion;

fn check(index: usize) {
    let outcome = run_criterion(index);
    println!("{}", outcome.lines());
    assert!(outcome.passed(), "{}", outcome.lines());
}

#[test]
fn criterion_01_gaussian_chi2_closed_form_matches_quadrature() {
    check(1);
}

#[test]
fn criterion_02_langevin_stationary_variance_matches_fixed_point() {
    check(2);
}

#[test]
fn criterion_03_noising_propagates_smoothness_constants() {
    check(3);
}

#[test]
fn criterion_04_langevin_chi2_bound_dominates_exact_chain() {
    check(4);
}

#[test]
fn criterion_05_predictor_chi2_bound_dominates_exact_chain() {
    check(5);
}

#[test]
fn criterion_06_small_score_error_hides_large_sampling_gap() {
    check(6);
}

#[test]
fn criterion_07_coupled_disagreement_within_splice_budget() {
    check(7);
}

#[test]
fn criterion_08_biased_score_error_is_nonmonotone_in_runtime() {
    check(8);
}

#[test]
fn criterion_09_smoothed_prior_warm_start_bound_holds() {
    check(9);
}

#[test]
fn criterion_10_annealing_recovers_balanced_modes() {
    check(10);
}

#[test]
fn criterion_11_runs_are_byte_identical_across_thread_counts() {
    check(11);
}
