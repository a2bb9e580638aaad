use crate::error::{check_len, Error, Result};

use super::grid::StateGrid;

/// Population density on a [`StateGrid`]. `values[k]` is a density with
/// respect to the grid's quadrature weights, so the probability mass at
/// node `k` is `weight(k) · values[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    values: Vec<f64>,
}

pub const MASS_TOLERANCE: f64 = 1e-10;

impl Density {
    /// Validating constructor: nonnegative entries with unit weighted mass.
    pub fn new(grid: &StateGrid, values: Vec<f64>) -> Result<Self> {
        check_len("density", grid.len(), values.len())?;
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("density entries must be finite and >= 0".into()));
        }
        let d = Density { values };
        let mass = d.total_mass(grid);
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Domain(format!("density has total mass {mass}, expected 1")));
        }
        Ok(d)
    }

    /// Density from per-node probabilities (which must sum to one).
    pub fn from_probabilities(grid: &StateGrid, probs: &[f64]) -> Result<Self> {
        check_len("probabilities", grid.len(), probs.len())?;
        let values = probs
            .iter()
            .enumerate()
            .map(|(k, q)| q / grid.weight(k))
            .collect();
        Density::new(grid, values)
    }

    /// Like [`Density::from_probabilities`] but rescales to unit mass.
    pub fn normalized(grid: &StateGrid, probs: &[f64]) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Domain(format!("cannot normalize total mass {total}")));
        }
        let scaled: Vec<f64> = probs.iter().map(|q| (q / total).max(0.0)).collect();
        Density::from_probabilities(grid, &scaled)
    }

    pub fn point_mass(grid: &StateGrid, k: usize) -> Result<Self> {
        let mut probs = vec![0.0; grid.len()];
        *probs
            .get_mut(k)
            .ok_or_else(|| Error::Domain(format!("node {k} outside grid")))? = 1.0;
        Density::from_probabilities(grid, &probs)
    }

    pub fn uniform_probabilities(grid: &StateGrid) -> Self {
        let n = grid.len() as f64;
        Density {
            values: (0..grid.len()).map(|k| 1.0 / (n * grid.weight(k))).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn probabilities(&self, grid: &StateGrid) -> Vec<f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| v * grid.weight(k))
            .collect()
    }

    pub fn total_mass(&self, grid: &StateGrid) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| v * grid.weight(k))
            .sum()
    }

    /// Convex combination `α·self + (1−α)·other`.
    pub fn mix(&self, other: &Density, alpha: f64) -> Density {
        Density {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                .collect(),
        }
    }

    /// Wraps values without the unit-mass check; used by solvers that
    /// preserve mass by construction.
    pub(crate) fn from_values_unchecked(values: Vec<f64>) -> Self {
        Density { values }
    }
}
