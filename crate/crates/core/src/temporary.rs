//! Temporary equilibrium: at every date agents re-solve a backward HJB
//! against the price path they currently forecast, act on the resulting
//! policy at the actual price, and the density moves with the true
//! generator of that policy. One forward pass, no fixed-point iteration.

use crate::beliefs::{
    predict_price_path, update_beliefs, BeliefState, ForecastContext, LearningRule, PlmFamily,
    PriceChart, Predictor,
};
use crate::error::{check_len, Error, Result};
use crate::fokker_planck::fp_forward_step;
use crate::hjb::{build_generator, hjb_backward_step, upwind_policy, PolicyField, ValueField};
use crate::model::{
    market_clearing_residual, price_functional, Density, ModelParams, PriceVector, StateGrid,
};
use crate::trajectory::Trajectory;

/// How a population forms and revises forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefSpec {
    pub predictor: Predictor,
    pub rule: LearningRule,
    pub chart: PriceChart,
}

impl BeliefSpec {
    pub fn family(&self) -> Option<PlmFamily> {
        match &self.predictor {
            Predictor::ParametricPlm { family, .. } => Some(*family),
            _ => None,
        }
    }

    pub fn validate(&self, theta_len: usize) -> Result<()> {
        self.predictor.validate()?;
        self.rule.validate()?;
        let expected = match (&self.predictor, self.family()) {
            (_, Some(f)) => Some(f.theta_dim(self.chart)),
            (Predictor::AdaptiveLevel { .. }, None) => Some(self.chart.dim()),
            _ => None,
        };
        if let Some(d) = expected {
            check_len("theta", d, theta_len)?;
        }
        if self.rule.is_level() {
            if let Some(f) = self.family() {
                if !f.is_level() && self.rule != LearningRule::Frozen {
                    return Err(Error::invalid(
                        "beliefs.rule",
                        "level learning rules need a level-type PLM (anchored) or the adaptive predictor",
                    ));
                }
            }
            if matches!(self.predictor, Predictor::ConstantCurrent | Predictor::PerfectForesight(_))
                && self.rule != LearningRule::Frozen
                && theta_len != self.chart.dim()
            {
                return Err(Error::invalid(
                    "beliefs.theta0",
                    "level learning needs one level per price coordinate",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporaryConfig {
    pub steps: usize,
    /// Backward solves beyond the first step use `inner_stride·dt`.
    pub inner_stride: usize,
}

impl TemporaryConfig {
    pub fn new(steps: usize) -> Self {
        TemporaryConfig {
            steps,
            inner_stride: 1,
        }
    }
}

/// Value at `t + dt` implied by the perceived path `path` (where `path[0]`
/// is dated `t` and `path[j]` drives the step that ends at `t + (j+1)·dt`).
pub fn continuation_value(
    path: &[PriceVector],
    terminal: &ValueField,
    dt: f64,
    stride: usize,
    grid: &StateGrid,
    params: &ModelParams,
) -> Result<ValueField> {
    let remaining = path.len().saturating_sub(1);
    let stride = stride.max(1);
    let mut u = terminal.clone();
    // Slice `i` is dated `t + i·dt`; stop at `i = 1`.
    let mut i = remaining;
    while i > 1 {
        let h = stride.min(i - 1);
        let (next, _) = hjb_backward_step(&u, path[i - h], h as f64 * dt, grid, params, None)?;
        u = next;
        i -= h;
    }
    Ok(u)
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub price: PriceVector,
    pub policy: PolicyField,
    pub next_density: Density,
    pub next_belief: BeliefState,
    /// `p̂_{t+dt; t}`.
    pub forecast_next: Option<PriceVector>,
    pub clipped: bool,
    pub clearing_residual: f64,
}

/// Policy of one population at date `step`, given the current price.
fn population_policy(
    price: PriceVector,
    belief: &BeliefState,
    step: usize,
    spec: &BeliefSpec,
    grid: &StateGrid,
    params: &ModelParams,
    terminal: &ValueField,
    config: &TemporaryConfig,
) -> Result<(PolicyField, Option<PriceVector>, bool)> {
    let tech = params.technology();
    let ctx = ForecastContext {
        step,
        steps: config.steps,
        dt: params.dt,
        z: 0.0,
        chart: spec.chart,
        tech: &tech,
    };
    let forecast = predict_price_path(&spec.predictor, price, &belief.theta, &ctx)?;
    let u_next = continuation_value(
        &forecast.prices,
        terminal,
        params.dt,
        config.inner_stride,
        grid,
        params,
    )?;
    let policy = upwind_policy(&u_next.values, price, grid, params, None)?;
    Ok((policy, forecast.prices.get(1).copied(), forecast.clipped))
}

/// One date of the temporary-equilibrium system.
#[allow(clippy::too_many_arguments)]
pub fn temporary_equilibrium_step(
    m_t: &Density,
    belief: &BeliefState,
    step: usize,
    spec: &BeliefSpec,
    grid: &StateGrid,
    params: &ModelParams,
    terminal: &ValueField,
    config: &TemporaryConfig,
) -> Result<StepOutcome> {
    let t = step as f64 * params.dt;
    let annotate = |e: Error| e.at_date(t);
    if step >= config.steps {
        return Err(Error::Domain(format!(
            "step {step} is not before the horizon ({} steps)",
            config.steps
        )));
    }
    let price = price_functional(m_t, 0.0, grid, params).map_err(annotate)?;
    let (policy, forecast_next, clipped) =
        population_policy(price, belief, step, spec, grid, params, terminal, config)
            .map_err(annotate)?;
    let op = build_generator(&policy, grid, params).map_err(annotate)?;
    let next_density = fp_forward_step(m_t, &op, params.dt, grid).map_err(annotate)?;
    let coords = spec.chart.to_coords(price);
    let next_belief =
        update_beliefs(&spec.rule, spec.family(), belief, &coords, 0.0, params.dt).map_err(annotate)?;
    let clearing_residual = market_clearing_residual(price, m_t, 0.0, grid, params)
        .map_err(annotate)?
        .sup_norm();
    Ok(StepOutcome {
        price,
        policy,
        next_density,
        next_belief,
        forecast_next,
        clipped,
        clearing_residual,
    })
}

/// One belief type in a heterogeneous population.
#[derive(Debug, Clone)]
pub struct BeliefType {
    /// Population share.
    pub weight: f64,
    /// Density of the type conditional on membership (unit mass).
    pub density: Density,
    pub belief: BeliefState,
    pub spec: BeliefSpec,
}

#[derive(Debug, Clone)]
pub struct HeterogeneousTrajectory {
    pub aggregate: Trajectory,
    /// `type_thetas[j][n]`.
    pub type_thetas: Vec<Vec<Vec<f64>>>,
    /// `type_densities[j][n]`.
    pub type_densities: Vec<Vec<Density>>,
    pub type_policies: Vec<Vec<PolicyField>>,
}

fn mix_densities(types: &[(f64, &Density)]) -> Density {
    let n = types[0].1.len();
    let mut v = vec![0.0; n];
    for (w, m) in types {
        for (acc, x) in v.iter_mut().zip(m.values()) {
            *acc += w * x;
        }
    }
    Density::from_values_unchecked(v)
}

/// Temporary equilibrium with finitely many belief types. Each type keeps
/// its own beliefs and conditional density; prices come from the
/// population aggregate.
pub fn run_heterogeneous_beliefs(
    types: &[BeliefType],
    grid: &StateGrid,
    params: &ModelParams,
    terminal: &ValueField,
    config: &TemporaryConfig,
) -> Result<HeterogeneousTrajectory> {
    params.validate()?;
    if types.is_empty() {
        return Err(Error::invalid("beliefs.types", "need at least one belief type"));
    }
    let total: f64 = types.iter().map(|t| t.weight).sum();
    if types.iter().any(|t| !(t.weight > 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(
            "beliefs.types",
            "type weights must be positive and sum to one",
        ));
    }
    for ty in types {
        ty.spec.validate(ty.belief.theta.len())?;
        check_len("density", grid.len(), ty.density.len())?;
    }
    let dt = params.dt;
    let n = config.steps;
    let mut densities: Vec<Density> = types.iter().map(|t| t.density.clone()).collect();
    let mut beliefs: Vec<BeliefState> = types.iter().map(|t| t.belief.clone()).collect();
    let mut out = HeterogeneousTrajectory {
        aggregate: Trajectory {
            dt,
            ..Trajectory::default()
        },
        type_thetas: vec![Vec::new(); types.len()],
        type_densities: vec![Vec::new(); types.len()],
        type_policies: vec![Vec::new(); types.len()],
    };
    let mut previous_forecast: Option<PriceVector> = None;
    for step in 0..=n {
        let t = step as f64 * dt;
        let weighted: Vec<(f64, &Density)> =
            types.iter().map(|t| t.weight).zip(densities.iter()).collect();
        let aggregate = mix_densities(&weighted);
        let price = price_functional(&aggregate, 0.0, grid, params).map_err(|e| e.at_date(t))?;
        let traj = &mut out.aggregate;
        traj.times.push(t);
        traj.prices.push(price);
        traj.z.push(0.0);
        traj.clearing_residuals.push(
            market_clearing_residual(price, &aggregate, 0.0, grid, params)
                .map_err(|e| e.at_date(t))?
                .sup_norm(),
        );
        traj.forecast_errors
            .push(previous_forecast.map(|f| f.sub(price)));
        let dim = beliefs[0].theta.len();
        let mean_theta: Vec<f64> = (0..dim)
            .map(|i| {
                types
                    .iter()
                    .zip(&beliefs)
                    .map(|(ty, b)| ty.weight * b.theta.get(i).copied().unwrap_or(f64::NAN))
                    .sum()
            })
            .collect();
        traj.thetas.push(mean_theta);
        traj.densities.push(aggregate);
        for (j, b) in beliefs.iter().enumerate() {
            out.type_thetas[j].push(b.theta.clone());
            out.type_densities[j].push(densities[j].clone());
        }
        if step == n {
            traj.clipped.push(false);
            break;
        }
        let mut clipped_any = false;
        let mut forecast_mix: Option<PriceVector> = Some(PriceVector {
            rate: 0.0,
            wage: 0.0,
        });
        let mut aggregate_policy: Option<PolicyField> = None;
        for (j, ty) in types.iter().enumerate() {
            let (policy, forecast_next, clipped) = population_policy(
                price, &beliefs[j], step, &ty.spec, grid, params, terminal, config,
            )
            .map_err(|e| e.at_date(t))?;
            clipped_any |= clipped;
            forecast_mix = match (forecast_mix, forecast_next) {
                (Some(acc), Some(f)) => Some(PriceVector {
                    rate: acc.rate + ty.weight * f.rate,
                    wage: acc.wage + ty.weight * f.wage,
                }),
                _ => None,
            };
            let op = build_generator(&policy, grid, params).map_err(|e| e.at_date(t))?;
            densities[j] = fp_forward_step(&densities[j], &op, dt, grid).map_err(|e| e.at_date(t))?;
            let coords = ty.spec.chart.to_coords(price);
            beliefs[j] = update_beliefs(&ty.spec.rule, ty.spec.family(), &beliefs[j], &coords, 0.0, dt)
                .map_err(|e| e.at_date(t))?;
            if types.len() == 1 {
                aggregate_policy = Some(policy.clone());
            }
            out.type_policies[j].push(policy);
        }
        if let Some(p) = aggregate_policy {
            out.aggregate.policies.push(p);
        }
        out.aggregate.clipped.push(clipped_any);
        previous_forecast = forecast_mix;
    }
    Ok(out)
}

/// Temporary equilibrium for a single population.
pub fn run_temporary_equilibrium(
    m0: &Density,
    belief0: &BeliefState,
    spec: &BeliefSpec,
    grid: &StateGrid,
    params: &ModelParams,
    terminal: &ValueField,
    config: &TemporaryConfig,
) -> Result<Trajectory> {
    let ty = BeliefType {
        weight: 1.0,
        density: m0.clone(),
        belief: belief0.clone(),
        spec: spec.clone(),
    };
    Ok(run_heterogeneous_beliefs(&[ty], grid, params, terminal, config)?.aggregate)
}
