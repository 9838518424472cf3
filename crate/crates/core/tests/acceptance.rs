//! Acceptance matrix: one test per criterion, each printing a verdict line.

use gsc::bench;

fn assert_criterion(id: usize) {
    let outcome = bench::run(id);
    println!("{}", outcome.line());
    assert!(outcome.passed, "{}", outcome.line());
}

#[test]
fn c01_kernel_exactness() {
    assert_criterion(1);
}

#[test]
fn c02_threshold_constants() {
    assert_criterion(2);
}

#[test]
fn c03_atom_certificates() {
    assert_criterion(3);
}

#[test]
fn c04_bound_suite() {
    assert_criterion(4);
}

#[test]
fn c05_descent_and_step_ordering() {
    assert_criterion(5);
}

#[test]
fn c06_quadratic_tails() {
    assert_criterion(6);
}

#[test]
fn c07_composite_correctness() {
    assert_criterion(7);
}

#[test]
fn c08_prox_oracles() {
    assert_criterion(8);
}

#[test]
fn c09_bfgs() {
    assert_criterion(9);
}

#[test]
fn c10_linesearch_floor() {
    assert_criterion(10);
}

#[test]
fn c11_baseline_contrast() {
    assert_criterion(11);
}

#[test]
fn c12_determinism() {
    assert_criterion(12);
}
