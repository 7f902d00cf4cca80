//! Shared fixtures for the criterion benches.

use threshold_core::linearized::{assemble, compute_spectrum, LinearizedOps, SpectrumData};
use threshold_core::{make_grid, solve_ground, GroundProfile};

/// Cubic problem in three dimensions on a grid of `n` intervals over [0, 20].
pub fn cubic(n: usize) -> GroundProfile {
    let grid = make_grid(3, 20.0, n).expect("valid grid");
    solve_ground(&grid, 3.0).expect("ground state")
}

pub fn cubic_with_spectrum(n: usize) -> (GroundProfile, LinearizedOps, SpectrumData) {
    let gp = cubic(n);
    let ops = assemble(&gp);
    let spec = compute_spectrum(&ops).expect("spectrum");
    (gp, ops, spec)
}
