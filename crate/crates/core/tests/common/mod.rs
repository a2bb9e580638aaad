//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use mfgl_core::equilibrium::{solve_stationary_equilibrium, EquilibriumConfig, StationaryEquilibrium};
use mfgl_core::{Density, ModelParams, StateGrid};

pub fn default_setup(n_wealth: usize) -> (StateGrid, ModelParams) {
    let params = ModelParams::default_calibration();
    let grid = StateGrid::uniform(50.0, n_wealth, &params.income).unwrap();
    (grid, params)
}

pub fn equilibrium(grid: &StateGrid, params: &ModelParams) -> StationaryEquilibrium {
    solve_stationary_equilibrium(grid, params, &EquilibriumConfig::default()).unwrap()
}

/// Moves every node's mass `shift` wealth nodes up (piling up at the top).
pub fn shift_wealth(m: &Density, grid: &StateGrid, shift: usize) -> Density {
    let q = m.probabilities(grid);
    let mut out = vec![0.0; q.len()];
    for (k, qk) in q.iter().enumerate() {
        let (i, j) = grid.split(k);
        let i2 = (i + shift).min(grid.n_wealth() - 1);
        out[grid.index(i2, j)] += qk;
    }
    Density::from_probabilities(grid, &out).unwrap()
}
