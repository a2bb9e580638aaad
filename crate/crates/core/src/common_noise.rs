//! Aggregate shocks and the forward learning simulation with common noise.
//!
//! Agents value the future on `(x, z, p)` for their current PLM parameters,
//! solved by the aggregate engine in [`crate::augmented`]. Those solves are
//! cached by `θ` and redone only once beliefs have moved far enough, so the
//! only values ever computed are for the beliefs actually held along the
//! realized path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::augmented::{
    price_axis, AggregateAxes, AggregateDynamics, AugmentedConfig, AugmentedProblem,
    AugmentedValue,
};
use crate::beliefs::{plm_drift, update_beliefs, BeliefState, LearningRule, PlmFamily, PriceChart};
use crate::error::{check_len, Error, Result};
use crate::fokker_planck::fp_forward_step;
use crate::hjb::build_generator;
use crate::model::{
    linspace, market_clearing_residual, price_functional, Density, ModelParams, PriceVector,
    StateGrid,
};
use crate::trajectory::Trajectory;

/// Simulated path of the common shock.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatePath {
    pub seed: u64,
    pub times: Vec<f64>,
    pub z: Vec<f64>,
    /// Steps at which the reflecting clamp changed the Euler update.
    pub clamped: usize,
}

/// Euler-Maruyama for `dZ = √(2β) dW` from `z0`, optionally reflected into
/// `bounds`.
pub fn simulate_aggregate_path(
    seed: u64,
    steps: usize,
    dt: f64,
    beta: f64,
    z0: f64,
    bounds: Option<(f64, f64)>,
) -> Result<AggregatePath> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid("model.beta", "must be finite and >= 0"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("model.dt", "must be > 0"));
    }
    if let Some((lo, hi)) = bounds {
        if !(lo <= z0 && z0 <= hi) {
            return Err(Error::invalid("common_noise.z0", "must lie within the z bounds"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (2.0 * beta * dt).sqrt();
    let mut z = Vec::with_capacity(steps + 1);
    z.push(z0);
    let mut clamped = 0;
    for _ in 0..steps {
        let xi: f64 = StandardNormal.sample(&mut rng);
        let mut next = z.last().unwrap() + scale * xi;
        if let Some((lo, hi)) = bounds {
            if next > hi || next < lo {
                clamped += 1;
                next = if next > hi { 2.0 * hi - next } else { 2.0 * lo - next };
                next = next.clamp(lo, hi);
            }
        }
        z.push(next);
    }
    Ok(AggregatePath {
        seed,
        times: (0..=steps).map(|n| n as f64 * dt).collect(),
        z,
        clamped,
    })
}

/// Symmetric `z` axis spanning `±width_sd·√(2β·horizon)`; a single node at
/// zero when there is no noise.
pub fn z_axis(beta: f64, horizon: f64, n: usize, width_sd: f64) -> Vec<f64> {
    let half = width_sd * (2.0 * beta * horizon).sqrt();
    if half > 0.0 && n > 1 {
        linspace(-half, half, n)
    } else {
        vec![0.0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommonNoiseConfig {
    pub steps: usize,
    pub chart: PriceChart,
    pub family: PlmFamily,
    pub rule: LearningRule,
    pub sigma_p: f64,
    /// Re-solve when `‖θ − θ_cached‖∞ > threshold·‖θ_cached‖∞`; zero
    /// re-solves at every date.
    pub cache_threshold: f64,
    pub price_nodes: usize,
    /// Half-width of each price axis relative to the reference price.
    pub price_span: f64,
    pub z_nodes: usize,
    pub z_width_sd: f64,
    pub solver: AugmentedConfig,
}

impl CommonNoiseConfig {
    pub fn new(steps: usize, gain: f64) -> Self {
        CommonNoiseConfig {
            steps,
            chart: PriceChart::RateFrontier,
            family: PlmFamily::Anchored {
                speed: 0.5,
                z_loading: 0.0,
            },
            rule: LearningRule::ConstantGain { gain },
            sigma_p: 0.0,
            cache_threshold: 0.01,
            price_nodes: 21,
            price_span: 0.3,
            z_nodes: 11,
            z_width_sd: 3.0,
            solver: AugmentedConfig {
                stride: 25,
                tolerance: 1e-11,
                max_sweeps: 1000,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        self.family.validate()?;
        if !(self.cache_threshold >= 0.0 && self.cache_threshold.is_finite()) {
            return Err(Error::invalid("common_noise.cache_threshold", "must be finite and >= 0"));
        }
        if self.price_nodes < 2 {
            return Err(Error::invalid("common_noise.price_nodes", "need at least 2"));
        }
        if !(self.price_span > 0.0 && self.price_span < 1.0) {
            return Err(Error::invalid("common_noise.price_span", "must lie in (0, 1)"));
        }
        if self.z_nodes == 0 {
            return Err(Error::invalid("common_noise.z_nodes", "need at least 1"));
        }
        Ok(())
    }
}

/// One extended-HJB solve triggered during the run.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheRecord {
    pub step: usize,
    pub theta: Vec<f64>,
    pub sweeps: usize,
    pub max_cfl: f64,
}

#[derive(Debug, Clone)]
pub struct LearningRun {
    pub trajectory: Trajectory,
    pub aggregate: AggregatePath,
    pub solves: Vec<CacheRecord>,
    pub warnings: Vec<String>,
}

/// Worst per-date violations of the forward invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    pub max_mass_drift: f64,
    pub min_density_entry: f64,
    /// `max_t ‖p_t − P*(m_t, Z_t)‖∞`.
    pub max_price_inconsistency: f64,
}

impl LearningRun {
    pub fn check_invariants(&self, grid: &StateGrid, params: &ModelParams) -> Result<InvariantReport> {
        let traj = &self.trajectory;
        let mut worst: f64 = 0.0;
        for ((m, &z), &p) in traj.densities.iter().zip(&traj.z).zip(&traj.prices) {
            worst = worst.max(price_functional(m, z, grid, params)?.sub(p).sup_norm());
        }
        Ok(InvariantReport {
            max_mass_drift: traj.max_mass_drift(grid),
            min_density_entry: traj.min_density_entry(),
            max_price_inconsistency: worst,
        })
    }
}

fn needs_solve(cached: Option<&[f64]>, theta: &[f64], threshold: f64) -> bool {
    let Some(old) = cached else { return true };
    if threshold == 0.0 {
        return true;
    }
    let moved = old
        .iter()
        .zip(theta)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let size = old.iter().map(|a| a.abs()).fold(0.0, f64::max);
    moved > threshold * size
}

/// Forward learning simulation with common noise. `reference` centers the
/// price axes (normally the no-noise stationary price) and `terminal` is
/// the wealth-income value at the horizon, shared by all aggregate nodes.
#[allow(clippy::too_many_arguments)]
pub fn run_learning_simulation(
    m0: &Density,
    z0: f64,
    belief0: &BeliefState,
    seed: u64,
    reference: PriceVector,
    grid: &StateGrid,
    params: &ModelParams,
    terminal: &[f64],
    config: &CommonNoiseConfig,
) -> Result<LearningRun> {
    params.validate()?;
    config.validate()?;
    check_len("density", grid.len(), m0.len())?;
    check_len("terminal value", grid.len(), terminal.len())?;
    check_len("theta", config.family.theta_dim(config.chart), belief0.theta.len())?;
    if !config.rule.is_level() && !matches!(config.family, PlmFamily::Linear { .. }) {
        return Err(Error::invalid(
            "beliefs.rule",
            "least-squares learning needs the linear PLM family",
        ));
    }
    let dt = params.dt;
    let n = config.steps;
    let horizon = n as f64 * dt;
    let z_nodes = z_axis(params.beta, horizon, config.z_nodes, config.z_width_sd);
    let bounds = (z_nodes[0], *z_nodes.last().unwrap());
    if !(bounds.0 <= z0 && z0 <= bounds.1) {
        return Err(Error::invalid("common_noise.z0", "must lie on the z grid range"));
    }
    let aggregate = simulate_aggregate_path(seed, n, dt, params.beta, z0, Some(bounds))?;
    let axes = AggregateAxes {
        z: z_nodes,
        prices: config
            .chart
            .to_coords(reference)
            .into_iter()
            .map(|c| price_axis(c, config.price_span, config.price_nodes))
            .collect(),
        thetas: Vec::new(),
    };
    let mut warnings = Vec::new();
    if config.cache_threshold == 0.0 {
        warnings.push("cache threshold is zero: the extended HJB is re-solved at every date".into());
    }
    let tech = params.technology();
    let mut traj = Trajectory {
        dt,
        ..Trajectory::default()
    };
    let mut solves = Vec::new();
    let mut cache: Option<(Vec<f64>, AugmentedValue)> = None;
    let mut density = m0.clone();
    let mut belief = belief0.clone();
    let mut previous_forecast: Option<PriceVector> = None;
    for step in 0..=n {
        let t = step as f64 * dt;
        let at = |e: Error| e.at_date(t);
        let z = aggregate.z[step];
        let price = price_functional(&density, z, grid, params).map_err(at)?;
        traj.times.push(t);
        traj.prices.push(price);
        traj.z.push(z);
        traj.thetas.push(belief.theta.clone());
        traj.clearing_residuals.push(
            market_clearing_residual(price, &density, z, grid, params)
                .map_err(at)?
                .sup_norm(),
        );
        traj.forecast_errors.push(previous_forecast.map(|f| f.sub(price)));
        traj.densities.push(density.clone());
        if step == n {
            traj.clipped.push(false);
            break;
        }
        let coords = config.chart.to_coords(price);
        let problem = AugmentedProblem {
            grid,
            params,
            axes: axes.clone(),
            dynamics: AggregateDynamics {
                chart: config.chart,
                family: config.family,
                theta: Some(belief.theta.clone()),
                sigma_p: config.sigma_p,
                beta: params.beta,
                learning: None,
                clock0: 0.0,
            },
            terminal: terminal.to_vec(),
            steps: n,
            config: config.solver.clone(),
        };
        let fresh = needs_solve(
            cache.as_ref().map(|c| c.0.as_slice()),
            &belief.theta,
            config.cache_threshold,
        );
        if fresh {
            let value = problem
                .solve_warm(step + 1, cache.as_ref().map(|c| &c.1))
                .map_err(at)?;
            solves.push(CacheRecord {
                step,
                theta: belief.theta.clone(),
                sweeps: value.sweeps,
                max_cfl: value.max_cfl,
            });
            cache = Some((belief.theta.clone(), value));
        } else {
            let (theta_c, value) = cache.as_mut().expect("cache present");
            // Slices come from the cached beliefs, not the current ones.
            let cached_problem = AugmentedProblem {
                dynamics: AggregateDynamics {
                    theta: Some(theta_c.clone()),
                    ..problem.dynamics.clone()
                },
                ..problem
            };
            cached_problem.refine(value, step + 1).map_err(at)?;
        }
        let value = &cache.as_ref().unwrap().1;
        let mut point = vec![z];
        point.extend_from_slice(&coords);
        let clipped = coords
            .iter()
            .zip(&axes.prices)
            .any(|(c, ax)| *c < ax[0] || *c > *ax.last().unwrap());
        let policy = value
            .policy_at(step + 1, &point, price, grid, params)
            .map_err(at)?;
        let op = build_generator(&policy, grid, params).map_err(at)?;
        density = fp_forward_step(&density, &op, dt, grid).map_err(at)?;
        // One-step PLM forecast, holding z at its current value.
        let drift = plm_drift(config.family, &coords, z, &belief.theta).map_err(at)?;
        let ahead: Vec<f64> = coords.iter().zip(&drift).map(|(c, d)| c + dt * d).collect();
        previous_forecast = config.chart.to_prices(&ahead, z, &tech).ok();
        belief = update_beliefs(&config.rule, Some(config.family), &belief, &coords, z, dt)
            .map_err(at)?;
        traj.policies.push(policy);
        traj.clipped.push(clipped);
    }
    Ok(LearningRun {
        trajectory: traj,
        aggregate,
        solves,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_beta_path_is_constant() {
        let p = simulate_aggregate_path(3, 50, 0.1, 0.0, 0.25, None).unwrap();
        assert!(p.z.iter().all(|&z| z == 0.25));
    }

    #[test]
    fn same_seed_same_path() {
        let a = simulate_aggregate_path(11, 100, 0.1, 0.3, 0.0, Some((-1.0, 1.0))).unwrap();
        let b = simulate_aggregate_path(11, 100, 0.1, 0.3, 0.0, Some((-1.0, 1.0))).unwrap();
        assert_eq!(a, b);
        let c = simulate_aggregate_path(12, 100, 0.1, 0.3, 0.0, Some((-1.0, 1.0))).unwrap();
        assert_ne!(a.z, c.z);
    }

    #[test]
    fn clamp_keeps_path_in_bounds() {
        let p = simulate_aggregate_path(5, 1000, 0.1, 1.0, 0.0, Some((-0.5, 0.5))).unwrap();
        assert!(p.clamped > 0);
        assert!(p.z.iter().all(|z| (-0.5..=0.5).contains(z)));
    }

    #[test]
    fn z_axis_contains_zero() {
        let ax = z_axis(0.01, 100.0, 11, 3.0);
        assert_eq!(ax.len(), 11);
        assert!(ax[5].abs() < 1e-15);
        assert_eq!(z_axis(0.0, 100.0, 11, 3.0), vec![0.0]);
    }

    #[test]
    fn cache_rule() {
        assert!(needs_solve(None, &[1.0], 0.01));
        assert!(!needs_solve(Some(&[1.0]), &[1.005], 0.01));
        assert!(needs_solve(Some(&[1.0]), &[1.02], 0.01));
        assert!(needs_solve(Some(&[1.0]), &[1.0], 0.0));
    }
}
