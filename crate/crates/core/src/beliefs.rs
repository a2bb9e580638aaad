//! Price forecasting: predictors, perceived laws of motion and the learning
//! rules that update their parameters from realized prices.
//!
//! Beliefs are formed over a coordinate vector rather than over the raw
//! price pair. With [`PriceChart::Independent`] the coordinates are
//! `(rate, wage)`; with [`PriceChart::RateFrontier`] agents forecast the
//! interest rate only and read the wage off the factor-price frontier at the
//! current productivity.

use crate::error::{check_len, Error, Result};
use crate::model::{PriceVector, Technology};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceChart {
    Independent,
    RateFrontier,
}

impl PriceChart {
    pub fn dim(self) -> usize {
        match self {
            PriceChart::Independent => 2,
            PriceChart::RateFrontier => 1,
        }
    }

    pub fn to_coords(self, p: PriceVector) -> Vec<f64> {
        match self {
            PriceChart::Independent => vec![p.rate, p.wage],
            PriceChart::RateFrontier => vec![p.rate],
        }
    }

    pub fn to_prices(self, coords: &[f64], z: f64, tech: &Technology) -> Result<PriceVector> {
        check_len("price coordinates", self.dim(), coords.len())?;
        match self {
            PriceChart::Independent => Ok(PriceVector {
                rate: coords[0],
                wage: coords[1],
            }),
            PriceChart::RateFrontier => Ok(PriceVector {
                rate: coords[0],
                wage: tech.frontier_wage(coords[0], z)?,
            }),
        }
    }
}

/// Parametric perceived law of motion `ṗ = μ_p(p, z; θ)`, applied to each
/// price coordinate separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlmFamily {
    /// `θ₀ + θ₁·p` (plus `θ₂·z` when `with_z`), per coordinate; `θ` is laid
    /// out coordinate-major.
    Linear { with_z: bool },
    /// `speed·(θ − p) + z_loading·z`, with `θ` the perceived long-run level.
    Anchored { speed: f64, z_loading: f64 },
}

impl PlmFamily {
    pub fn params_per_coord(self) -> usize {
        match self {
            PlmFamily::Linear { with_z: false } => 2,
            PlmFamily::Linear { with_z: true } => 3,
            PlmFamily::Anchored { .. } => 1,
        }
    }

    pub fn theta_dim(self, chart: PriceChart) -> usize {
        self.params_per_coord() * chart.dim()
    }

    pub fn validate(self) -> Result<()> {
        if let PlmFamily::Anchored { speed, z_loading } = self {
            if !(speed >= 0.0 && speed.is_finite()) {
                return Err(Error::invalid("beliefs.speed", "must be finite and >= 0"));
            }
            if !z_loading.is_finite() {
                return Err(Error::invalid("beliefs.z_loading", "must be finite"));
            }
        }
        Ok(())
    }

    /// Drift of the level-type family is zero exactly at `p = θ` when `z = 0`.
    pub fn is_level(self) -> bool {
        matches!(self, PlmFamily::Anchored { .. })
    }

    /// Parameters under which the price `p` is a rest point at `z = 0`.
    pub fn consistent_theta(self, p: &[f64]) -> Vec<f64> {
        match self {
            PlmFamily::Linear { with_z } => p
                .iter()
                .flat_map(|&pi| {
                    let mut v = vec![pi, -1.0];
                    if with_z {
                        v.push(0.0);
                    }
                    v
                })
                .collect(),
            PlmFamily::Anchored { .. } => p.to_vec(),
        }
    }
}

/// `μ_p(p, z; θ)`.
pub fn plm_drift(family: PlmFamily, p: &[f64], z: f64, theta: &[f64]) -> Result<Vec<f64>> {
    let per = family.params_per_coord();
    check_len("theta", per * p.len(), theta.len())?;
    Ok(match family {
        PlmFamily::Linear { with_z } => p
            .iter()
            .enumerate()
            .map(|(i, &pi)| {
                let t = &theta[per * i..per * (i + 1)];
                t[0] + t[1] * pi + if with_z { t[2] * z } else { 0.0 }
            })
            .collect(),
        PlmFamily::Anchored { speed, z_loading } => p
            .iter()
            .zip(theta)
            .map(|(pi, th)| speed * (th - pi) + z_loading * z)
            .collect(),
    })
}

/// Box that predicted price coordinates are clipped to.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PriceBox {
    pub fn unbounded(dim: usize) -> Self {
        PriceBox {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    /// `[(1 − frac)·c, (1 + frac)·c]` around a positive center.
    pub fn around(center: &[f64], frac: f64) -> Self {
        PriceBox {
            lower: center.iter().map(|c| c * (1.0 - frac)).collect(),
            upper: center.iter().map(|c| c * (1.0 + frac)).collect(),
        }
    }

    /// Clips in place; reports whether anything moved.
    pub fn clip(&self, p: &mut [f64]) -> bool {
        let mut clipped = false;
        for ((v, lo), hi) in p.iter_mut().zip(&self.lower).zip(&self.upper) {
            if !v.is_finite() || *v < *lo || *v > *hi {
                clipped = true;
                *v = if v.is_nan() { *lo } else { v.clamp(*lo, *hi) };
            }
        }
        clipped
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    /// Externally supplied price path, indexed by date step.
    PerfectForesight(Vec<PriceVector>),
    ConstantCurrent,
    /// Flat forecast at the learned level `θ`; `smoothing` is the gain used
    /// when no rule is given explicitly.
    AdaptiveLevel { smoothing: f64 },
    ParametricPlm { family: PlmFamily, price_box: PriceBox },
}

impl Predictor {
    pub fn validate(&self) -> Result<()> {
        match self {
            Predictor::AdaptiveLevel { smoothing } if !(*smoothing > 0.0) => Err(Error::invalid(
                "beliefs.smoothing",
                "adaptive smoothing must be > 0",
            )),
            Predictor::ParametricPlm { family, .. } => family.validate(),
            _ => Ok(()),
        }
    }
}

/// Forecast `p̂_{s;t}` on the dates `t, t+dt, …, t + steps·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedPath {
    pub prices: Vec<PriceVector>,
    pub clipped: bool,
}

/// Context for a forecast made at date index `step`.
#[derive(Debug, Clone, Copy)]
pub struct ForecastContext<'a> {
    pub step: usize,
    pub steps: usize,
    pub dt: f64,
    pub z: f64,
    pub chart: PriceChart,
    pub tech: &'a Technology,
}

fn rk4(family: PlmFamily, p: &[f64], z: f64, theta: &[f64], h: f64) -> Result<Vec<f64>> {
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + s * y).collect()
    };
    let k1 = plm_drift(family, p, z, theta)?;
    let k2 = plm_drift(family, &add(p, &k1, 0.5 * h), z, theta)?;
    let k3 = plm_drift(family, &add(p, &k2, 0.5 * h), z, theta)?;
    let k4 = plm_drift(family, &add(p, &k3, h), z, theta)?;
    Ok(p.iter()
        .enumerate()
        .map(|(i, x)| x + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Integrates the PLM from `p0` for `steps` steps of size `dt` with frozen
/// `θ` and `z`; returns coordinate paths and whether the box clipped.
pub fn integrate_plm(
    family: PlmFamily,
    p0: &[f64],
    z: f64,
    theta: &[f64],
    steps: usize,
    dt: f64,
    price_box: &PriceBox,
) -> Result<(Vec<Vec<f64>>, bool)> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut clipped = false;
    let mut p = p0.to_vec();
    out.push(p.clone());
    for _ in 0..steps {
        p = rk4(family, &p, z, theta, dt)?;
        clipped |= price_box.clip(&mut p);
        out.push(p.clone());
    }
    Ok((out, clipped))
}

/// Perceived price path on `[t, T]` given the current price and frozen
/// beliefs. The first entry is always the current price.
pub fn predict_price_path(
    pred: &Predictor,
    current: PriceVector,
    theta: &[f64],
    ctx: &ForecastContext,
) -> Result<PredictedPath> {
    let n = ctx.steps.saturating_sub(ctx.step);
    let mut clipped = false;
    let mut prices = match pred {
        Predictor::PerfectForesight(path) => {
            if path.len() < ctx.steps.max(1) {
                return Err(Error::Shape {
                    what: "perfect-foresight path",
                    expected: ctx.steps,
                    found: path.len(),
                });
            }
            (ctx.step..=ctx.steps)
                .map(|s| path[s.min(path.len() - 1)])
                .collect()
        }
        Predictor::ConstantCurrent => vec![current; n + 1],
        Predictor::AdaptiveLevel { .. } => {
            check_len("theta", ctx.chart.dim(), theta.len())?;
            let level = ctx.chart.to_prices(theta, ctx.z, ctx.tech)?;
            vec![level; n + 1]
        }
        Predictor::ParametricPlm { family, price_box } => {
            let p0 = ctx.chart.to_coords(current);
            let (coords, c) = integrate_plm(*family, &p0, ctx.z, theta, n, ctx.dt, price_box)?;
            clipped = c;
            coords
                .iter()
                .map(|c| ctx.chart.to_prices(c, ctx.z, ctx.tech))
                .collect::<Result<_>>()?
        }
    };
    prices[0] = current;
    Ok(PredictedPath { prices, clipped })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRule {
    /// `θ ← θ + dt/(t + t₀)·(p − θ)`.
    DecreasingGain { t0: f64 },
    /// `θ ← θ + dt·α·(p − θ)`.
    ConstantGain { gain: f64 },
    /// Least-squares fit of the linear PLM to observed price changes.
    RecursiveLeastSquares { regularization: f64 },
    /// Beliefs never move.
    Frozen,
}

impl LearningRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LearningRule::DecreasingGain { t0 } if !(t0 > 0.0 && t0.is_finite()) => {
                Err(Error::invalid("beliefs.t0", "must be > 0"))
            }
            LearningRule::ConstantGain { gain } if !(gain > 0.0 && gain <= 1.0) => {
                Err(Error::invalid("beliefs.gain", "must lie in (0, 1]"))
            }
            LearningRule::RecursiveLeastSquares { regularization } if !(regularization >= 0.0) => {
                Err(Error::invalid("beliefs.regularization", "must be >= 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_level(&self) -> bool {
        matches!(
            self,
            LearningRule::DecreasingGain { .. } | LearningRule::ConstantGain { .. } | LearningRule::Frozen
        )
    }

    /// `L(p, θ)` at time `t` for level rules; `None` for least squares.
    pub fn level_drift(&self, p: &[f64], theta: &[f64], t: f64) -> Option<Vec<f64>> {
        let gain = match *self {
            LearningRule::DecreasingGain { t0 } => 1.0 / (t + t0),
            LearningRule::ConstantGain { gain } => gain,
            LearningRule::Frozen => 0.0,
            LearningRule::RecursiveLeastSquares { .. } => return None,
        };
        Some(p.iter().zip(theta).map(|(p, th)| gain * (p - th)).collect())
    }
}

/// Belief parameters plus least-squares sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub theta: Vec<f64>,
    /// Per coordinate, the regressor moment matrix (row-major, `r × r`).
    pub moments: Vec<Vec<f64>>,
    /// Per coordinate, the regressor–response cross moments.
    pub cross: Vec<Vec<f64>>,
    pub clock: f64,
    pub previous: Option<Vec<f64>>,
    pub previous_z: f64,
    pub identified: bool,
}

impl BeliefState {
    pub fn new(theta: Vec<f64>) -> Self {
        BeliefState {
            theta,
            moments: Vec::new(),
            cross: Vec::new(),
            clock: 0.0,
            previous: None,
            previous_z: 0.0,
            identified: true,
        }
    }
}

/// Symmetric solve for the tiny least-squares systems (r ≤ 3); `None` when
/// the matrix is numerically singular.
fn solve_small(a: &[f64], b: &[f64], r: usize) -> Option<Vec<f64>> {
    let mut m: Vec<f64> = a.to_vec();
    let mut x = b.to_vec();
    let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    for k in 0..r {
        let p = (k..r).max_by(|&i, &j| m[i * r + k].abs().total_cmp(&m[j * r + k].abs()))?;
        if m[p * r + k].abs() <= 1e-10 * scale {
            return None;
        }
        if p != k {
            for j in 0..r {
                m.swap(k * r + j, p * r + j);
            }
            x.swap(k, p);
        }
        for i in k + 1..r {
            let l = m[i * r + k] / m[k * r + k];
            for j in k..r {
                m[i * r + j] -= l * m[k * r + j];
            }
            x[i] -= l * x[k];
        }
    }
    for i in (0..r).rev() {
        let s: f64 = (i + 1..r).map(|j| m[i * r + j] * x[j]).sum();
        x[i] = (x[i] - s) / m[i * r + i];
    }
    Some(x)
}

/// One learning update from the observed price coordinates at the current
/// clock; advances the clock by `dt`.
pub fn update_beliefs(
    rule: &LearningRule,
    family: Option<PlmFamily>,
    belief: &BeliefState,
    observed: &[f64],
    z: f64,
    dt: f64,
) -> Result<BeliefState> {
    let mut next = belief.clone();
    match *rule {
        LearningRule::Frozen => {}
        LearningRule::DecreasingGain { .. } | LearningRule::ConstantGain { .. } => {
            check_len("theta", observed.len(), belief.theta.len())?;
            let drift = rule
                .level_drift(observed, &belief.theta, belief.clock)
                .expect("level rule");
            for (th, d) in next.theta.iter_mut().zip(drift) {
                *th += dt * d;
            }
        }
        LearningRule::RecursiveLeastSquares { regularization } => {
            let with_z = match family {
                Some(PlmFamily::Linear { with_z }) => with_z,
                _ => {
                    return Err(Error::invalid(
                        "beliefs.rule",
                        "least-squares learning needs the linear PLM family",
                    ))
                }
            };
            let r = if with_z { 3 } else { 2 };
            check_len("theta", r * observed.len(), belief.theta.len())?;
            if next.moments.is_empty() {
                next.moments = vec![vec![0.0; r * r]; observed.len()];
                next.cross = vec![vec![0.0; r]; observed.len()];
            }
            if let Some(prev) = &belief.previous {
                let mut all_identified = true;
                for i in 0..observed.len() {
                    let x: Vec<f64> = if with_z {
                        vec![1.0, prev[i], belief.previous_z]
                    } else {
                        vec![1.0, prev[i]]
                    };
                    let y = (observed[i] - prev[i]) / dt;
                    for a in 0..r {
                        for b in 0..r {
                            next.moments[i][a * r + b] += dt * x[a] * x[b];
                        }
                        next.cross[i][a] += dt * x[a] * y;
                    }
                    let mut reg = next.moments[i].clone();
                    for a in 0..r {
                        reg[a * r + a] += regularization;
                    }
                    match solve_small(&reg, &next.cross[i], r) {
                        Some(sol) => next.theta[r * i..r * (i + 1)].copy_from_slice(&sol),
                        None => all_identified = false,
                    }
                }
                next.identified = all_identified;
            } else {
                next.identified = false;
            }
        }
    }
    next.previous = Some(observed.to_vec());
    next.previous_z = z;
    next.clock += dt;
    Ok(next)
}
