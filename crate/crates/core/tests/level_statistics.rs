mod common;

use common::random_matrix::{goe_mean_r, poisson_mean_r};

#[test]
fn poisson_reference_value() {
    let r = poisson_mean_r(1_000_000, 42);
    assert!((r - 0.3863).abs() <= 0.002, "<r> = {r}");
}

#[test]
fn goe_reference_value() {
    let r = goe_mean_r(300, 20, 7);
    assert!((r - 0.5295).abs() <= 0.01, "<r> = {r}");
}
