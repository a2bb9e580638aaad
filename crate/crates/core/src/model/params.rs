use crate::error::{Error, Result};

use super::prices::Technology;

/// Exogenous income process for the second individual state.
#[derive(Debug, Clone, PartialEq)]
pub enum IncomeProcess {
    /// Continuous-time two-state Markov chain between `y_lo` and `y_hi`.
    TwoState {
        y_lo: f64,
        y_hi: f64,
        rate_up: f64,
        rate_down: f64,
    },
    /// Ornstein-Uhlenbeck income `dy = κ(ȳ − y)dt + √(2ν_y) dB`, discretized on
    /// `n_nodes` points of `[lower, upper]` with reflecting ends.
    OuDiffusion {
        mean_reversion: f64,
        long_run_mean: f64,
        intensity: f64,
        lower: f64,
        upper: f64,
        n_nodes: usize,
    },
}

impl IncomeProcess {
    pub fn validate(&self) -> Result<()> {
        match *self {
            IncomeProcess::TwoState {
                y_lo,
                y_hi,
                rate_up,
                rate_down,
            } => {
                if !(y_lo > 0.0 && y_hi > y_lo && y_hi.is_finite()) {
                    return Err(Error::invalid(
                        "model.income.y_lo",
                        format!("need 0 < y_lo < y_hi, got ({y_lo}, {y_hi})"),
                    ));
                }
                if !(rate_up > 0.0 && rate_up.is_finite()) {
                    return Err(Error::invalid("model.income.rate_up", "must be > 0"));
                }
                if !(rate_down > 0.0 && rate_down.is_finite()) {
                    return Err(Error::invalid("model.income.rate_down", "must be > 0"));
                }
            }
            IncomeProcess::OuDiffusion {
                mean_reversion,
                long_run_mean,
                intensity,
                lower,
                upper,
                n_nodes,
            } => {
                if !(mean_reversion > 0.0) {
                    return Err(Error::invalid(
                        "model.income.mean_reversion",
                        "must be > 0",
                    ));
                }
                if !(intensity >= 0.0) {
                    return Err(Error::invalid("model.income.intensity", "must be >= 0"));
                }
                if !(lower > 0.0 && upper > lower && upper.is_finite()) {
                    return Err(Error::invalid(
                        "model.income.lower",
                        "need 0 < lower < upper < inf",
                    ));
                }
                if !(lower..=upper).contains(&long_run_mean) {
                    return Err(Error::invalid(
                        "model.income.long_run_mean",
                        "must lie inside [lower, upper]",
                    ));
                }
                if n_nodes < 3 {
                    return Err(Error::invalid("model.income.n_nodes", "need at least 3"));
                }
            }
        }
        Ok(())
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, IncomeProcess::TwoState { .. })
    }
}

/// Model parameters. `crra` is the utility curvature; the discrete-time
/// discount factor lives with the discrete models and is unrelated.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub rho: f64,
    pub crra: f64,
    /// Diffusion intensity on the wealth axis.
    pub nu: f64,
    /// Common-noise intensity of the aggregate state.
    pub beta: f64,
    pub horizon: f64,
    pub dt: f64,
    pub income: IncomeProcess,
    pub production_scale: f64,
}

impl ModelParams {
    /// Conventional desk calibration. The production scale only sets the
    /// level of capital (the equilibrium interest rate does not depend on
    /// it with this technology); it is chosen so that the stationary wealth
    /// distribution lives well inside a 50-unit wealth grid.
    pub fn default_calibration() -> Self {
        ModelParams {
            rho: 0.05,
            crra: 2.0,
            nu: 0.0,
            beta: 0.0,
            horizon: 100.0,
            dt: 1.0,
            income: IncomeProcess::TwoState {
                y_lo: 0.5,
                y_hi: 1.5,
                rate_up: 0.25,
                rate_down: 0.25,
            },
            production_scale: 0.18,
        }
    }

    pub fn technology(&self) -> Technology {
        Technology::new(self.production_scale)
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::invalid("model.rho", "must be finite and >= 0"));
        }
        if !(self.crra > 0.0 && self.crra.is_finite()) {
            return Err(Error::invalid("model.crra", "must be > 0"));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::invalid("model.nu", "must be >= 0"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("model.beta", "must be >= 0"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("model.horizon", "must be > 0"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("model.dt", "must be > 0"));
        }
        if !(self.production_scale > 0.0 && self.production_scale.is_finite()) {
            return Err(Error::invalid("model.production_scale", "must be > 0"));
        }
        self.income.validate()
    }

    /// Stationary solvers need strict discounting.
    pub fn require_discounting(&self) -> Result<()> {
        if self.rho > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(
                "model.rho",
                "infinite-horizon problems need rho > 0",
            ))
        }
    }
}
