mod common;

use common::{relative_error, worst_gradient_error};

#[test]
fn backprop_matches_central_differences() {
    let worst = worst_gradient_error(100, 11);
    assert!(worst < 1e-5, "worst relative error {worst}");
}

#[test]
fn relative_error_floor() {
    assert_eq!(relative_error(0.0, 0.0), 0.0);
    assert!((relative_error(1.0, 1.1) - 0.1 / 2.1).abs() < 1e-15);
}
