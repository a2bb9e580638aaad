//! Time-indexed record of a forward simulation.

use crate::hjb::PolicyField;
use crate::model::{Density, PriceVector, StateGrid};

/// Realized path of a forward run. Entries indexed by date `n` are dated
/// `n·dt`; `policies[n]` is the policy executed on `[n·dt, (n+1)·dt)`.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub prices: Vec<PriceVector>,
    /// Beliefs held at each date, before that date's update.
    pub thetas: Vec<Vec<f64>>,
    pub densities: Vec<Density>,
    pub policies: Vec<PolicyField>,
    /// `p̂_{t; t−dt} − p_t`, absent at the first date.
    pub forecast_errors: Vec<Option<PriceVector>>,
    /// `‖p_t − P*(m_t, Z_t)‖∞`.
    pub clearing_residuals: Vec<f64>,
    /// Aggregate state; all zeros without common noise.
    pub z: Vec<f64>,
    /// Whether the forecast made at the date hit the price box.
    pub clipped: Vec<bool>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_clearing_residual(&self) -> f64 {
        self.clearing_residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Largest deviation of total mass from one over all stored densities.
    pub fn max_mass_drift(&self, grid: &StateGrid) -> f64 {
        self.densities
            .iter()
            .map(|m| (m.total_mass(grid) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_density_entry(&self) -> f64 {
        self.densities
            .iter()
            .flat_map(|m| m.values().iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// Sup-norm of the forecast errors, per date (NaN where absent).
    pub fn forecast_error_norms(&self) -> Vec<f64> {
        self.forecast_errors
            .iter()
            .map(|e| e.map_or(f64::NAN, |e| e.sup_norm()))
            .collect()
    }

    /// Sup-norm distance between the price paths of two runs.
    pub fn price_distance(&self, other: &[PriceVector]) -> f64 {
        self.prices
            .iter()
            .zip(other)
            .map(|(a, b)| a.sub(*b).sup_norm())
            .fold(0.0, f64::max)
    }
}
