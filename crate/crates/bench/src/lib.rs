//! Shared fixtures for the benchmarks.

use bst_core::{make_grid, FrequencyGrid, JsaMatrix, StateConfig};

/// Default grid with `n` points per photon.
pub fn grid(n: usize) -> FrequencyGrid {
    make_grid(1550.0, 36.0, n).expect("valid grid")
}

/// The default hyper-entangled state at phase `phi`.
pub fn state(n: usize, phi: f64) -> JsaMatrix {
    StateConfig::default()
        .with_phase(phi)
        .synthesize(&grid(n))
        .expect("default state")
}

/// `points` delays spanning ±8 ps.
pub fn delays(points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| -8.0 + 16.0 * k as f64 / (points - 1) as f64)
        .collect()
}
