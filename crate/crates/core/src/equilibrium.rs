//! Rational-expectations benchmarks: the stationary competitive
//! equilibrium and perfect-foresight transition paths.

use crate::error::{check_len, Error, Result};
use crate::fokker_planck::{fp_forward_step, stationary_density, stationary_probabilities};
use crate::linalg::SparseMatrix;
use crate::hjb::{
    build_generator, solve_hjb_path, solve_stationary_hjb_from, HjbConfig, PolicyField,
    TransitionOperator, ValueField,
};
use crate::model::{
    aggregate_moments, market_clearing_residual, Density, ModelParams, PriceVector, StateGrid,
};

/// Mean of the stationary income distribution, computed from the income
/// block of the generator the solvers use.
pub fn stationary_mean_income(grid: &StateGrid, params: &ModelParams) -> Result<f64> {
    let p = PriceVector {
        rate: 0.0,
        wage: 1.0,
    };
    let consumption = (0..grid.len())
        .map(|k| grid.income()[grid.split(k).1])
        .collect();
    let policy = PolicyField::from_consumption(consumption, p, grid);
    let op = build_generator(&policy, grid, params)?;
    let ny = grid.n_income();
    let block: Vec<(usize, usize, f64)> = op
        .matrix
        .triplets()
        .filter(|&(r, c, _)| r < ny && c < ny)
        .collect();
    let income_op = TransitionOperator {
        matrix: SparseMatrix::from_triplets(ny, block),
    };
    let q = stationary_probabilities(&income_op)?;
    Ok(q.iter().zip(grid.income()).map(|(q, y)| q * y).sum())
}

/// One evaluation of aggregate saving during the bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionPoint {
    pub capital: f64,
    pub rate: f64,
    pub saving: f64,
}

#[derive(Debug, Clone)]
pub struct StationaryEquilibrium {
    pub prices: PriceVector,
    pub density: Density,
    pub value: ValueField,
    pub policy: PolicyField,
    pub operator: TransitionOperator,
    pub capital: f64,
    pub labor: f64,
    pub trace: Vec<BisectionPoint>,
}

impl StationaryEquilibrium {
    /// Whether recorded saving rose with the interest rate along the
    /// bisection trace. Diagnostic only.
    pub fn saving_monotone_in_rate(&self) -> bool {
        let mut pts = self.trace.clone();
        pts.sort_by(|a, b| a.rate.total_cmp(&b.rate));
        pts.windows(2).all(|w| w[1].saving >= w[0].saving - 1e-9)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumConfig {
    pub hjb: HjbConfig,
    /// Relative width at which bisection on capital stops.
    pub capital_tolerance: f64,
    pub max_bisections: usize,
    /// Initial bracket on the interest rate, as fractions of `ρ`. The lower
    /// end is halved until saving falls short of capital.
    pub rate_bracket: (f64, f64),
    pub max_bracket_expansions: usize,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        EquilibriumConfig {
            hjb: HjbConfig::default(),
            capital_tolerance: 1e-13,
            max_bisections: 200,
            rate_bracket: (0.5, 0.999),
            max_bracket_expansions: 8,
        }
    }
}

struct SavingEval {
    saving: f64,
    prices: PriceVector,
    value: ValueField,
    policy: PolicyField,
    operator: TransitionOperator,
    density: Density,
}

fn saving_at(
    capital: f64,
    labor: f64,
    grid: &StateGrid,
    params: &ModelParams,
    config: &EquilibriumConfig,
    guess: Option<&[f64]>,
) -> Result<SavingEval> {
    let prices = params.technology().prices(capital, labor, 0.0)?;
    let (value, policy, operator) = solve_stationary_hjb_from(prices, grid, params, &config.hjb, guess)?;
    let density = stationary_density(&operator, grid)?;
    let saving = aggregate_moments(&density, grid)?.0;
    Ok(SavingEval {
        saving,
        prices,
        value,
        policy,
        operator,
        density,
    })
}

/// Stationary equilibrium by bisection on aggregate capital: at capital
/// `K` prices are `P*(K, L̄, 0)` and households save `S(K)`; the
/// equilibrium solves `S(K) = K`.
pub fn solve_stationary_equilibrium(
    grid: &StateGrid,
    params: &ModelParams,
    config: &EquilibriumConfig,
) -> Result<StationaryEquilibrium> {
    params.validate()?;
    params.require_discounting()?;
    let labor = stationary_mean_income(grid, params)?;
    let tech = params.technology();
    let capital_at_rate = |r: f64| tech.capital_labor_ratio(r, 0.0) * labor;
    let (mut lo_frac, hi_frac) = config.rate_bracket;
    // Low capital = high rate = high saving.
    let mut k_lo = capital_at_rate(hi_frac * params.rho);
    let mut k_hi = capital_at_rate(lo_frac * params.rho);
    let mut trace = Vec::new();

    let eval = |k: f64, guess: Option<&[f64]>, trace: &mut Vec<BisectionPoint>| {
        let e = saving_at(k, labor, grid, params, config, guess)?;
        trace.push(BisectionPoint {
            capital: k,
            rate: e.prices.rate,
            saving: e.saving,
        });
        Ok::<SavingEval, Error>(e)
    };

    let lo = eval(k_lo, None, &mut trace)?;
    let mut hi = eval(k_hi, None, &mut trace)?;
    let mut expansions = 0;
    while hi.saving - k_hi >= 0.0 && expansions < config.max_bracket_expansions {
        lo_frac *= 0.5;
        k_hi = capital_at_rate(lo_frac * params.rho);
        hi = eval(k_hi, None, &mut trace)?;
        expansions += 1;
    }
    let (ex_lo, ex_hi) = (lo.saving - k_lo, hi.saving - k_hi);
    if !(ex_lo > 0.0 && ex_hi < 0.0) {
        return Err(Error::Calibration(format!(
            "no sign change of excess saving on the rate bracket: S(K)-K = {ex_lo:e} at r = {}, {ex_hi:e} at r = {}",
            lo.prices.rate, hi.prices.rate
        )));
    }
    let mut best = lo;
    let mut best_k = k_lo;
    for _ in 0..config.max_bisections {
        if (k_hi - k_lo) <= config.capital_tolerance * k_hi {
            break;
        }
        let k_mid = 0.5 * (k_lo + k_hi);
        let mid = eval(k_mid, Some(&best.value.values), &mut trace)?;
        if mid.saving - k_mid > 0.0 {
            k_lo = k_mid;
        } else {
            k_hi = k_mid;
        }
        best = mid;
        best_k = k_mid;
    }
    if (k_hi - k_lo) > config.capital_tolerance * k_hi {
        return Err(Error::Convergence {
            what: "stationary equilibrium bisection",
            iterations: config.max_bisections,
            last: (k_hi - k_lo) / k_hi,
            history: trace.iter().map(|p| p.saving - p.capital).collect(),
        });
    }
    Ok(StationaryEquilibrium {
        prices: best.prices,
        density: best.density,
        value: best.value,
        policy: best.policy,
        operator: best.operator,
        capital: best_k,
        labor,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionConfig {
    pub steps: usize,
    pub damping: f64,
    pub max_damping: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig {
            steps: 100,
            damping: 0.1,
            max_damping: 0.5,
            tolerance: 1e-7,
            max_iter: 2000,
        }
    }
}

/// Converged perfect-foresight path. `prices[n]` and `densities[n]` are
/// dated `n·dt`; `policies[n]` is the policy used on `[n·dt, (n+1)·dt)`.
#[derive(Debug, Clone)]
pub struct TransitionPath {
    pub prices: Vec<PriceVector>,
    pub densities: Vec<Density>,
    pub policies: Vec<PolicyField>,
    pub values: Vec<ValueField>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

impl TransitionPath {
    pub fn max_clearing_residual(&self, grid: &StateGrid, params: &ModelParams) -> Result<f64> {
        let mut worst = 0.0f64;
        for (p, m) in self.prices.iter().zip(&self.densities) {
            worst = worst.max(market_clearing_residual(*p, m, 0.0, grid, params)?.sup_norm());
        }
        Ok(worst)
    }
}

/// Forward chain of densities under a sequence of policies.
pub(crate) fn forward_densities(
    m0: &Density,
    policies: &[PolicyField],
    dt: f64,
    grid: &StateGrid,
    params: &ModelParams,
) -> Result<Vec<Density>> {
    let mut out = Vec::with_capacity(policies.len() + 1);
    out.push(m0.clone());
    for (n, pol) in policies.iter().enumerate() {
        let op = build_generator(pol, grid, params).map_err(|e| e.at_date(n as f64 * dt))?;
        let next = fp_forward_step(out.last().unwrap(), &op, dt, grid)
            .map_err(|e| e.at_date(n as f64 * dt))?;
        out.push(next);
    }
    Ok(out)
}

/// Perfect-foresight transition from `m0` back toward the stationary
/// equilibrium, whose value serves as terminal condition. Iterates on the
/// capital path with adaptive damping.
pub fn solve_perfect_foresight_transition(
    m0: &Density,
    eq: &StationaryEquilibrium,
    grid: &StateGrid,
    params: &ModelParams,
    config: &TransitionConfig,
) -> Result<TransitionPath> {
    solve_transition_from(m0, eq, grid, params, config, None)
}

/// As [`solve_perfect_foresight_transition`] with an initial capital path
/// (length `steps + 1`).
pub fn solve_transition_from(
    m0: &Density,
    eq: &StationaryEquilibrium,
    grid: &StateGrid,
    params: &ModelParams,
    config: &TransitionConfig,
    initial_capital: Option<&[f64]>,
) -> Result<TransitionPath> {
    check_len("density", grid.len(), m0.len())?;
    let n = config.steps;
    let dt = params.dt;
    let tech = params.technology();
    // Income marginals evolve exogenously; record them once.
    let labor: Vec<f64> = {
        let zero_policy: Vec<PolicyField> = (0..n)
            .map(|_| {
                let c = (0..grid.len())
                    .map(|k| {
                        let (i, j) = grid.split(k);
                        eq.prices.resources(grid.wealth()[i], grid.income()[j])
                    })
                    .collect();
                PolicyField::from_consumption(c, eq.prices, grid)
            })
            .collect();
        forward_densities(m0, &zero_policy, dt, grid, params)?
            .iter()
            .map(|m| aggregate_moments(m, grid).map(|x| x.1))
            .collect::<Result<_>>()?
    };
    let mut capital: Vec<f64> = match initial_capital {
        Some(k) => {
            check_len("initial capital path", n + 1, k.len())?;
            k.to_vec()
        }
        None => vec![eq.capital; n + 1],
    };
    let terminal = ValueField::new(eq.value.values.clone(), n as f64 * dt);
    let mut omega = config.damping;
    let mut history: Vec<f64> = Vec::new();
    for iter in 0..config.max_iter {
        let prices: Vec<PriceVector> = capital
            .iter()
            .zip(&labor)
            .map(|(k, l)| tech.prices(*k, *l, 0.0))
            .collect::<Result<_>>()?;
        let (values, policies) = solve_hjb_path(&prices[..n], &terminal, dt, grid, params)?;
        let densities = forward_densities(m0, &policies, dt, grid, params)?;
        let implied: Vec<f64> = densities
            .iter()
            .map(|m| aggregate_moments(m, grid).map(|x| x.0))
            .collect::<Result<_>>()?;
        let mut residual = 0.0f64;
        for (m, p) in densities.iter().zip(&prices) {
            residual =
                residual.max(market_clearing_residual(*p, m, 0.0, grid, params)?.sup_norm());
        }
        if residual < config.tolerance {
            history.push(residual);
            return Ok(TransitionPath {
                prices,
                densities,
                policies,
                values,
                iterations: iter + 1,
                residual_history: history,
            });
        }
        if let Some(&prev) = history.last() {
            if residual < prev {
                omega = (omega * 1.1).min(config.max_damping);
            } else {
                omega = (omega * 0.5).max(1e-3);
            }
        }
        history.push(residual);
        for (k, target) in capital.iter_mut().zip(&implied) {
            *k = (1.0 - omega) * *k + omega * target;
        }
        // The initial capital is known exactly.
        capital[0] = implied[0];
    }
    Err(Error::Convergence {
        what: "perfect-foresight transition",
        iterations: config.max_iter,
        last: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}
