#![allow(dead_code)]

use std::sync::OnceLock;

use threshold_core::linearized::{assemble, compute_spectrum, LinearizedOps, SpectrumData};
use threshold_core::{make_grid, solve_ground, GroundProfile};

pub struct Fixture {
    pub gp: GroundProfile,
    pub ops: LinearizedOps,
    pub spec: SpectrumData,
}

/// Cubic problem in three dimensions on a small grid, built once per test binary.
pub fn cubic() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let grid = make_grid(3, 20.0, 1000).unwrap();
        let gp = solve_ground(&grid, 3.0).unwrap();
        let ops = assemble(&gp);
        let spec = compute_spectrum(&ops).unwrap();
        Fixture { gp, ops, spec }
    })
}

pub fn ground(dim: usize, p: f64) -> GroundProfile {
    solve_ground(&make_grid(dim, 20.0, 1000).unwrap(), p).unwrap()
}
