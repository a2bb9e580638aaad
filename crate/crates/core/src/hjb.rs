//! Implicit upwind finite differences for the consumption-savings HJB
//! equation on the wealth × income grid.
//!
//! A backward step takes the policy from the one-sided gradients of the
//! next slice (no policy iteration inside a step) and then solves the
//! linear system `(ρ + 1/dt)u − 𝒜_π u = U(c) + u_next/dt`. The generator
//! assembled here is the one the density solver transposes.

use crate::error::{check_len, Error, Result};
use crate::linalg::{BandedLu, BandedMatrix, SparseMatrix};
use crate::model::{IncomeProcess, ModelParams, PriceVector, StateGrid};

/// Flow utility with constant relative risk aversion `crra`.
#[inline]
pub fn utility(c: f64, crra: f64) -> f64 {
    if crra == 1.0 {
        c.ln()
    } else if crra == 2.0 {
        -1.0 / c
    } else {
        c.powf(1.0 - crra) / (1.0 - crra)
    }
}

#[inline]
pub fn marginal_utility(c: f64, crra: f64) -> f64 {
    if crra == 1.0 {
        1.0 / c
    } else {
        c.powf(-crra)
    }
}

/// Inverts `U'(c) = λ`.
pub fn optimal_consumption(lambda: f64, crra: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::NonPositiveMarginal(lambda));
    }
    Ok(if crra == 1.0 {
        1.0 / lambda
    } else if crra == 2.0 {
        1.0 / lambda.sqrt()
    } else {
        lambda.powf(-1.0 / crra)
    })
}

/// `max_c U(c) + λ(r·a + w·y − c)`.
pub fn hamiltonian(wealth: f64, income: f64, lambda: f64, p: PriceVector, crra: f64) -> Result<f64> {
    let resources = p.resources(wealth, income);
    if !resources.is_finite() {
        return Err(Error::Domain(format!("non-finite resources {resources}")));
    }
    let c = optimal_consumption(lambda, crra)?;
    Ok(utility(c, crra) + lambda * (resources - c))
}

/// Value slice at a given date.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    pub values: Vec<f64>,
    pub time: f64,
}

impl ValueField {
    pub fn new(values: Vec<f64>, time: f64) -> Self {
        ValueField { values, time }
    }

    pub fn sup_distance(&self, other: &ValueField) -> f64 {
        sup_distance(&self.values, &other.values)
    }

    /// Largest violation of monotonicity (negative wealth differences) and
    /// of concavity (positive slope increments), over all income states.
    pub fn shape_violations(&self, grid: &StateGrid) -> (f64, f64) {
        let (mut mono, mut conc) = (0.0f64, 0.0f64);
        let a = grid.wealth();
        for j in 0..grid.n_income() {
            let v = |i: usize| self.values[grid.index(i, j)];
            for i in 1..grid.n_wealth() {
                mono = mono.max(v(i - 1) - v(i));
            }
            for i in 1..grid.n_wealth() - 1 {
                let left = (v(i) - v(i - 1)) / (a[i] - a[i - 1]);
                let right = (v(i + 1) - v(i)) / (a[i + 1] - a[i]);
                conc = conc.max(right - left);
            }
        }
        (mono, conc)
    }
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Consumption and the implied wealth drift at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyField {
    pub consumption: Vec<f64>,
    pub drift: Vec<f64>,
}

impl PolicyField {
    /// Policy that consumes `consumption` at prices `p`.
    pub fn from_consumption(consumption: Vec<f64>, p: PriceVector, grid: &StateGrid) -> Self {
        let drift = consumption
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let (i, j) = grid.split(k);
                p.resources(grid.wealth()[i], grid.income()[j]) - c
            })
            .collect();
        PolicyField { consumption, drift }
    }

    pub fn len(&self) -> usize {
        self.consumption.len()
    }

    pub fn is_empty(&self) -> bool {
        self.consumption.is_empty()
    }
}

/// Discretized generator: a sparse matrix whose rows sum to zero and whose
/// off-diagonal entries are nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionOperator {
    pub matrix: SparseMatrix,
}

impl TransitionOperator {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(u)
    }

    pub fn apply_transpose(&self, m: &[f64]) -> Vec<f64> {
        self.matrix.mul_transpose_vec(m)
    }

    pub fn max_row_sum(&self) -> f64 {
        self.matrix
            .row_sums()
            .into_iter()
            .map(f64::abs)
            .fold(0.0, f64::max)
    }

    pub fn min_off_diagonal(&self) -> f64 {
        self.matrix
            .triplets()
            .filter(|(r, c, _)| r != c)
            .map(|(_, _, v)| v)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Boundary behaviour when assembling drift terms.
#[derive(Clone, Copy, PartialEq)]
enum Boundary {
    /// Negative drift at zero wealth is an error.
    Strict,
    /// Outflow through either wealth boundary is dropped.
    Reflect,
}

fn assemble(
    grid: &StateGrid,
    income: &IncomeProcess,
    drift: &[f64],
    diffusion: &dyn Fn(usize) -> f64,
    boundary: Boundary,
) -> Result<SparseMatrix> {
    let trip = assemble_triplets(grid, income, drift, diffusion, boundary)?;
    Ok(SparseMatrix::from_triplets(grid.len(), trip))
}

/// Entries of a generator with per-node wealth drift and wealth diffusion,
/// plus the income-process coupling. Rows come out in increasing order with
/// sorted columns.
fn assemble_triplets(
    grid: &StateGrid,
    income: &IncomeProcess,
    drift: &[f64],
    diffusion: &dyn Fn(usize) -> f64,
    boundary: Boundary,
) -> Result<Vec<(usize, usize, f64)>> {
    let n = grid.len();
    let ny = grid.n_income();
    let na = grid.n_wealth();
    let y = grid.income();
    let mut trip = Vec::with_capacity(5 * n);
    for k in 0..n {
        let (i, j) = grid.split(k);
        let (hb, hf) = grid.wealth_steps(i);
        let s = drift[k];
        if i == 0 && s < 0.0 && boundary == Boundary::Strict {
            return Err(Error::StateConstraint { node: k, drift: s });
        }
        let nu = diffusion(k);
        // Wealth-axis rates to the lower and upper neighbour.
        let (mut down, mut up) = (0.0, 0.0);
        if i + 1 < na && s > 0.0 {
            up += s / hf;
        }
        if i > 0 && s < 0.0 {
            down += -s / hb;
        }
        if nu > 0.0 {
            let span = hb + hf;
            if i > 0 {
                down += 2.0 * nu / (hb * span);
            }
            if i + 1 < na {
                up += 2.0 * nu / (hf * span);
            }
        }
        // Income-axis rates.
        let (mut y_down, mut y_up) = (0.0, 0.0);
        match *income {
            IncomeProcess::TwoState {
                rate_up, rate_down, ..
            } => {
                if ny == 2 {
                    if j == 0 {
                        y_up = rate_up;
                    } else {
                        y_down = rate_down;
                    }
                }
            }
            IncomeProcess::OuDiffusion {
                mean_reversion,
                long_run_mean,
                intensity,
                ..
            } => {
                let gb = if j > 0 { y[j] - y[j - 1] } else { 0.0 };
                let gf = if j + 1 < ny { y[j + 1] - y[j] } else { 0.0 };
                let mu = mean_reversion * (long_run_mean - y[j]);
                if j + 1 < ny && mu > 0.0 {
                    y_up += mu / gf;
                }
                if j > 0 && mu < 0.0 {
                    y_down += -mu / gb;
                }
                let span = gb + gf;
                if j > 0 {
                    y_down += 2.0 * intensity / (gb * span);
                }
                if j + 1 < ny {
                    y_up += 2.0 * intensity / (gf * span);
                }
            }
        }
        let diag = -(down + up + y_down + y_up);
        if i > 0 {
            trip.push((k, k - ny, down));
        }
        if j > 0 {
            trip.push((k, k - 1, y_down));
        }
        trip.push((k, k, diag));
        if j + 1 < ny {
            trip.push((k, k + 1, y_up));
        }
        if i + 1 < na {
            trip.push((k, k + ny, up));
        }
    }
    Ok(trip)
}

/// Generator of the controlled state process under `policy`: upwind drift
/// and central diffusion on wealth, switching or diffusion on income.
pub fn build_generator(
    policy: &PolicyField,
    grid: &StateGrid,
    params: &ModelParams,
) -> Result<TransitionOperator> {
    check_len("policy", grid.len(), policy.len())?;
    let nu = params.nu;
    let matrix = assemble(grid, &params.income, &policy.drift, &|_| nu, Boundary::Strict)?;
    Ok(TransitionOperator { matrix })
}

/// Generator built from perceived wealth dynamics `(μ̂, ν̂)`, evaluated at
/// each node and its consumption. Used only in value computations.
pub fn build_perceived_generator(
    perceived_drift: &dyn Fn(usize, f64) -> f64,
    perceived_diffusion: &dyn Fn(usize, f64) -> f64,
    policy: &PolicyField,
    grid: &StateGrid,
    params: &ModelParams,
) -> Result<TransitionOperator> {
    check_len("policy", grid.len(), policy.len())?;
    let mut nus = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let v = perceived_diffusion(k, policy.consumption[k]);
        if !(v >= 0.0) {
            return Err(Error::Domain(format!(
                "perceived diffusion {v} at node {k} is negative"
            )));
        }
        nus.push(v);
    }
    let drift: Vec<f64> = (0..grid.len())
        .map(|k| perceived_drift(k, policy.consumption[k]))
        .collect();
    let matrix = assemble(grid, &params.income, &drift, &|k| nus[k], Boundary::Reflect)?;
    Ok(TransitionOperator { matrix })
}

/// Perceived own-state dynamics for the value step: the wealth drift is the
/// budget drift plus `drift_bias(node)` and the wealth diffusion is
/// `diffusion(node)`. The bias does not depend on consumption, so the
/// first-order condition keeps its closed form.
pub struct PerceivedDynamics<'a> {
    pub drift_bias: &'a dyn Fn(usize) -> f64,
    pub diffusion: &'a dyn Fn(usize) -> f64,
}

/// Upwind policy from the one-sided wealth gradients of `v` at prices `p`.
///
/// At the top node the forward gradient is replaced by the marginal utility
/// of resources (no saving beyond the grid), at zero wealth the backward
/// gradient likewise (no borrowing). Nodes where neither one-sided drift is
/// active consume their resources.
pub fn upwind_policy(
    v: &[f64],
    p: PriceVector,
    grid: &StateGrid,
    params: &ModelParams,
    drift_bias: Option<&dyn Fn(usize) -> f64>,
) -> Result<PolicyField> {
    check_len("value", grid.len(), v.len())?;
    let n = grid.len();
    let ny = grid.n_income();
    let na = grid.n_wealth();
    let gamma = params.crra;
    let mut consumption = Vec::with_capacity(n);
    let mut drift = Vec::with_capacity(n);
    for k in 0..n {
        let (i, j) = grid.split(k);
        let res = p.resources(grid.wealth()[i], grid.income()[j]);
        if !(res > 0.0) {
            return Err(Error::Domain(format!(
                "non-positive resources {res} at node {k} (prices {p:?})"
            )));
        }
        let bias = drift_bias.map_or(0.0, |f| f(k));
        let (hb, hf) = grid.wealth_steps(i);
        let at_top = i + 1 == na;
        let at_bottom = i == 0;
        // One-sided consumption choices; a non-positive gradient means the
        // first-order condition fails and the branch falls back to the
        // zero-drift bound.
        let branch = |grad: f64| -> f64 {
            match optimal_consumption(grad, gamma) {
                Ok(c) => c,
                Err(_) => f64::INFINITY,
            }
        };
        let c_f = if at_top {
            res + bias
        } else {
            branch((v[k + ny] - v[k]) / hf)
        };
        let c_b = if at_bottom {
            res + bias
        } else {
            branch((v[k] - v[k - ny]) / hb)
        };
        let s_f = res + bias - c_f;
        let s_b = res + bias - c_b;
        let fwd = s_f > 0.0;
        let bwd = s_b < 0.0 && c_b.is_finite();
        let c = match (fwd, bwd) {
            (true, true) => {
                // Non-concave spot: take the branch with the larger
                // Hamiltonian.
                let lf = (v[k + ny] - v[k]) / hf;
                let lb = (v[k] - v[k - ny]) / hb;
                let hf_val = utility(c_f, gamma) + lf * s_f;
                let hb_val = utility(c_b, gamma) + lb * s_b;
                if hf_val >= hb_val {
                    c_f
                } else {
                    c_b
                }
            }
            (true, false) => c_f,
            (false, true) => c_b,
            (false, false) => res + bias,
        };
        let c = if c > 0.0 && c.is_finite() { c } else { res };
        consumption.push(c);
        drift.push(res - c);
    }
    Ok(PolicyField { consumption, drift })
}

/// Linear system of one implicit step, factored.
pub(crate) struct StepSystem {
    pub lu: BandedLu,
    /// `U(c) + u_next/dt`.
    pub rhs: Vec<f64>,
    pub policy: PolicyField,
}

/// Builds and factors `(ρ + 1/dt + extra_diag)I − 𝒜_π`.
pub(crate) fn step_system(
    u_next: &[f64],
    p: PriceVector,
    dt: f64,
    grid: &StateGrid,
    params: &ModelParams,
    extra_diag: f64,
    perceived: Option<&PerceivedDynamics>,
) -> Result<StepSystem> {
    let bias = perceived.map(|d| d.drift_bias);
    let policy = upwind_policy(u_next, p, grid, params, bias)?;
    let shift = params.rho + 1.0 / dt + extra_diag;
    let m = match perceived {
        None => {
            let nu = params.nu;
            let trip =
                assemble_triplets(grid, &params.income, &policy.drift, &|_| nu, Boundary::Strict)?;
            BandedMatrix::from_triplets(grid.len(), grid.n_income(), &trip, shift, -1.0)
        }
        Some(d) => {
            let drift_bias = d.drift_bias;
            let diffusion = d.diffusion;
            let drift = |k: usize, _c: f64| policy.drift[k] + drift_bias(k);
            let op = build_perceived_generator(&drift, &|k, _| diffusion(k), &policy, grid, params)?;
            BandedMatrix::shifted(&op.matrix, shift, -1.0, false)
        }
    };
    let lu = m.factor()?;
    let rhs = policy
        .consumption
        .iter()
        .zip(u_next)
        .map(|(c, u)| utility(*c, params.crra) + u / dt)
        .collect();
    Ok(StepSystem { lu, rhs, policy })
}

/// One backward-Euler step from `u_next` (at `s + dt`) to `s` at prices `p`.
pub fn hjb_backward_step(
    u_next: &ValueField,
    p: PriceVector,
    dt: f64,
    grid: &StateGrid,
    params: &ModelParams,
    perceived: Option<&PerceivedDynamics>,
) -> Result<(ValueField, PolicyField)> {
    if !(dt > 0.0) {
        return Err(Error::invalid("model.dt", "must be > 0"));
    }
    let sys = step_system(&u_next.values, p, dt, grid, params, 0.0, perceived)?;
    let values = sys.lu.solve(&sys.rhs);
    Ok((ValueField::new(values, u_next.time - dt), sys.policy))
}

/// Tolerances for the stationary HJB iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct HjbConfig {
    pub pseudo_dt: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for HjbConfig {
    fn default() -> Self {
        HjbConfig {
            pseudo_dt: 1000.0,
            tolerance: 1e-11,
            max_iter: 2000,
        }
    }
}

/// `ρu − U(c) − 𝒜_π u` with the upwind policy of `u` itself.
pub fn stationary_residual(
    u: &[f64],
    p: PriceVector,
    grid: &StateGrid,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    let policy = upwind_policy(u, p, grid, params, None)?;
    let op = build_generator(&policy, grid, params)?;
    let au = op.apply(u);
    Ok(u.iter()
        .zip(&au)
        .zip(&policy.consumption)
        .map(|((u, a), c)| params.rho * u - utility(*c, params.crra) - a)
        .collect())
}

/// Initial guess: consume resources forever.
pub fn hand_to_mouth_value(p: PriceVector, grid: &StateGrid, params: &ModelParams) -> Vec<f64> {
    (0..grid.len())
        .map(|k| {
            let (i, j) = grid.split(k);
            let res = p.resources(grid.wealth()[i], grid.income()[j]).max(1e-10);
            utility(res, params.crra) / params.rho
        })
        .collect()
}

/// Infinite-horizon HJB at constant prices.
pub fn solve_stationary_hjb(
    p: PriceVector,
    grid: &StateGrid,
    params: &ModelParams,
    config: &HjbConfig,
) -> Result<(ValueField, PolicyField, TransitionOperator)> {
    solve_stationary_hjb_from(p, grid, params, config, None)
}

/// As [`solve_stationary_hjb`], warm-started from `guess`.
pub fn solve_stationary_hjb_from(
    p: PriceVector,
    grid: &StateGrid,
    params: &ModelParams,
    config: &HjbConfig,
    guess: Option<&[f64]>,
) -> Result<(ValueField, PolicyField, TransitionOperator)> {
    params.require_discounting()?;
    let mut u = match guess {
        Some(g) => {
            check_len("value guess", grid.len(), g.len())?;
            g.to_vec()
        }
        None => hand_to_mouth_value(p, grid, params),
    };
    let mut history = Vec::new();
    for _ in 0..config.max_iter {
        let sys = step_system(&u, p, config.pseudo_dt, grid, params, 0.0, None)?;
        let next = sys.lu.solve(&sys.rhs);
        let change = sup_distance(&next, &u);
        let scale = next.iter().map(|v| v.abs()).fold(1.0, f64::max);
        u = next;
        history.push(change);
        if change <= config.tolerance * scale {
            let policy = upwind_policy(&u, p, grid, params, None)?;
            let op = build_generator(&policy, grid, params)?;
            return Ok((ValueField::new(u, f64::INFINITY), policy, op));
        }
    }
    Err(Error::Convergence {
        what: "stationary HJB",
        iterations: config.max_iter,
        last: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// Backward sweep against `price_path`, where `price_path[n]` drives the
/// step from slice `n + 1` to slice `n`. Returns `price_path.len() + 1`
/// value slices (the last one is `terminal`) and one policy per step.
pub fn solve_hjb_path(
    price_path: &[PriceVector],
    terminal: &ValueField,
    dt: f64,
    grid: &StateGrid,
    params: &ModelParams,
) -> Result<(Vec<ValueField>, Vec<PolicyField>)> {
    check_len("terminal value", grid.len(), terminal.values.len())?;
    let n = price_path.len();
    let mut values = vec![terminal.clone()];
    let mut policies = Vec::with_capacity(n);
    for s in (0..n).rev() {
        let (u, pol) = hjb_backward_step(values.last().unwrap(), price_path[s], dt, grid, params, None)
            .map_err(|e| e.at_date(terminal.time - (n - s) as f64 * dt))?;
        values.push(u);
        policies.push(pol);
    }
    values.reverse();
    policies.reverse();
    Ok((values, policies))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::linspace;

    fn small_grid() -> (StateGrid, ModelParams) {
        let params = ModelParams::default_calibration();
        let grid = StateGrid::uniform(20.0, 41, &params.income).unwrap();
        (grid, params)
    }

    #[test]
    fn consumption_foc_closed_forms() {
        assert!((optimal_consumption(4.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(optimal_consumption(1.0, 3.7).unwrap(), 1.0);
        assert_eq!(optimal_consumption(4.0, 1.0).unwrap(), 0.25);
        assert!(matches!(
            optimal_consumption(0.0, 2.0),
            Err(Error::NonPositiveMarginal(_))
        ));
    }

    #[test]
    fn hamiltonian_closed_form() {
        let p = PriceVector { rate: 0.0, wage: 1.0 };
        let h = hamiltonian(0.0, 1.0, 4.0, p, 2.0).unwrap();
        assert!(h.abs() < 1e-15);
        // Resources equal to the optimal consumption: H = U(c*).
        let p = PriceVector { rate: 0.1, wage: 0.5 };
        let c = optimal_consumption(2.0, 2.0).unwrap();
        let income = (c - 0.1 * 1.0) / 0.5;
        let h = hamiltonian(1.0, income, 2.0, p, 2.0).unwrap();
        assert!((h - utility(c, 2.0)).abs() < 1e-14);
    }

    #[test]
    fn pure_diffusion_stencil() {
        let (grid, mut params) = small_grid();
        params.nu = 0.3;
        let p = PriceVector { rate: 0.03, wage: 1.0 };
        let consumption = (0..grid.len())
            .map(|k| {
                let (i, j) = grid.split(k);
                p.resources(grid.wealth()[i], grid.income()[j])
            })
            .collect();
        let pol = PolicyField::from_consumption(consumption, p, &grid);
        let op = build_generator(&pol, &grid, &params).unwrap();
        let h = grid.wealth()[1];
        let k = grid.index(5, 0);
        let c = 0.3 / (h * h);
        assert!((op.matrix.get(k, k - 2) - c).abs() < 1e-12);
        assert!((op.matrix.get(k, k + 2) - c).abs() < 1e-12);
        assert!((op.matrix.get(k, k) + 2.0 * c + 0.25).abs() < 1e-12);
        assert!(op.max_row_sum() < 1e-14);
    }

    #[test]
    fn positive_drift_uses_forward_difference() {
        let (grid, params) = small_grid();
        let p = PriceVector { rate: 0.03, wage: 1.0 };
        let consumption: Vec<f64> = (0..grid.len())
            .map(|k| {
                let (i, j) = grid.split(k);
                p.resources(grid.wealth()[i], grid.income()[j]) - 0.2
            })
            .collect();
        let pol = PolicyField::from_consumption(consumption, p, &grid);
        let op = build_generator(&pol, &grid, &params).unwrap();
        let h = grid.wealth()[1];
        let k = grid.index(7, 1);
        assert!((op.matrix.get(k, k + 2) - 0.2 / h).abs() < 1e-12);
        assert_eq!(op.matrix.get(k, k - 2), 0.0);
        assert!((op.matrix.get(k, k) + 0.2 / h + 0.25).abs() < 1e-12);
    }

    #[test]
    fn negative_drift_at_zero_wealth_is_rejected() {
        let (grid, params) = small_grid();
        let p = PriceVector { rate: 0.03, wage: 1.0 };
        let consumption: Vec<f64> = (0..grid.len())
            .map(|k| {
                let (i, j) = grid.split(k);
                p.resources(grid.wealth()[i], grid.income()[j]) + 0.1
            })
            .collect();
        let pol = PolicyField::from_consumption(consumption, p, &grid);
        assert!(matches!(
            build_generator(&pol, &grid, &params),
            Err(Error::StateConstraint { node: 0, .. })
        ));
    }

    #[test]
    fn perceived_generator_reduces_to_actual() {
        let (grid, mut params) = small_grid();
        params.nu = 0.05;
        let p = PriceVector { rate: 0.03, wage: 1.0 };
        let v: Vec<f64> = hand_to_mouth_value(p, &grid, &params);
        let pol = upwind_policy(&v, p, &grid, &params, None).unwrap();
        let actual = build_generator(&pol, &grid, &params).unwrap();
        let perceived = build_perceived_generator(
            &|k, _| pol.drift[k],
            &|_, _| 0.05,
            &pol,
            &grid,
            &params,
        )
        .unwrap();
        assert_eq!(actual, perceived);
        assert!(build_perceived_generator(&|_, _| 0.0, &|_, _| -1.0, &pol, &grid, &params).is_err());
    }

    #[test]
    fn myopic_limit() {
        let (grid, mut params) = small_grid();
        params.rho = 1e6;
        let p = PriceVector { rate: 0.03, wage: 1.0 };
        // Zero continuation value: the flow reward dominates.
        let u_next = ValueField::new(vec![0.0; grid.len()], 1.0);
        let (u, pol) = hjb_backward_step(&u_next, p, 1.0, &grid, &params, None).unwrap();
        for k in 0..grid.len() {
            let target = utility(pol.consumption[k], params.crra) / params.rho;
            assert!(((u.values[k] - target) / target).abs() < 1e-4);
        }
    }

    #[test]
    fn stationary_solution_is_a_fixed_point() {
        let (grid, params) = small_grid();
        let p = PriceVector { rate: 0.03, wage: 1.0 };
        let (u, _, op) = solve_stationary_hjb(p, &grid, &params, &HjbConfig::default()).unwrap();
        assert!(op.max_row_sum() < 1e-13);
        let res = stationary_residual(&u.values, p, &grid, &params).unwrap();
        assert!(res.iter().all(|r| r.abs() < 1e-8));
        let u_next = ValueField::new(u.values.clone(), 10.0);
        let (u_s, _) = hjb_backward_step(&u_next, p, 0.5, &grid, &params, None).unwrap();
        assert!(u_s.sup_distance(&u_next) < 1e-10);
        let (mono, conc) = u.shape_violations(&grid);
        assert!(mono <= 1e-8 && conc <= 1e-8, "{mono} {conc}");
    }

    #[test]
    fn nonuniform_grid_is_supported() {
        let params = ModelParams::default_calibration();
        let wealth: Vec<f64> = linspace(0.0, 1.0, 30).iter().map(|s| 20.0 * s * s).collect();
        let grid = StateGrid::new(wealth, vec![0.5, 1.5], true).unwrap();
        let p = PriceVector { rate: 0.03, wage: 1.0 };
        let (u, _, op) = solve_stationary_hjb(p, &grid, &params, &HjbConfig::default()).unwrap();
        assert!(op.min_off_diagonal() >= 0.0);
        let res = stationary_residual(&u.values, p, &grid, &params).unwrap();
        assert!(res.iter().all(|r| r.abs() < 1e-8));
    }

    #[test]
    fn log_utility_branch() {
        let (grid, mut params) = small_grid();
        params.crra = 1.0;
        let p = PriceVector { rate: 0.03, wage: 1.0 };
        let (u, pol, _) = solve_stationary_hjb(p, &grid, &params, &HjbConfig::default()).unwrap();
        assert!(u.values.iter().all(|v| v.is_finite()));
        assert!(pol.consumption.iter().all(|c| *c > 0.0));
    }
}
