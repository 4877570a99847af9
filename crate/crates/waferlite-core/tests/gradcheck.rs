//! Gradient checks for every primitive and for the full architectures
//! at small resolution (f64, step 1e-4, relative tolerance 1e-4).

use waferlite_core::gradcheck::{check_architecture, check_primitives, DEFAULT_STEP, DEFAULT_TOL};
use waferlite_core::graph::ArchId;

#[test]
fn primitive_gradients_match_central_differences() {
    let report = check_primitives(101, DEFAULT_STEP, DEFAULT_TOL).unwrap();
    assert!(report.coords_checked > 500, "only {} coords", report.coords_checked);
    assert!(report.max_rel_err < DEFAULT_TOL);
}

#[test]
fn basenet_architecture_gradients() {
    let r = check_architecture(ArchId::BaseNet, 16, 21, 4, DEFAULT_STEP, DEFAULT_TOL).unwrap();
    assert!(r.coords_checked >= 16);
}

#[test]
fn basenet8plus_architecture_gradients() {
    let r = check_architecture(ArchId::BaseNet8Plus, 16, 22, 3, DEFAULT_STEP, DEFAULT_TOL).unwrap();
    assert!(r.coords_checked >= 40);
}

#[test]
fn incnet_architecture_gradients() {
    let r = check_architecture(ArchId::IncNet, 16, 23, 3, DEFAULT_STEP, DEFAULT_TOL).unwrap();
    assert!(r.coords_checked >= 40);
}

#[test]
fn resinet_architecture_gradients() {
    let r = check_architecture(ArchId::ResiNet, 16, 24, 3, DEFAULT_STEP, DEFAULT_TOL).unwrap();
    assert!(r.coords_checked >= 20);
}
