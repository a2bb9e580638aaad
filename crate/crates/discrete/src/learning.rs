//! Adaptive learning in the discrete model.
//!
//! Each period agents form a perceived price kernel from their current
//! beliefs, solve the finite-horizon Bellman problem under it and act on the
//! first-period policy at the realized price. The population moves by the
//! Chapman-Kolmogorov step, the aggregate state is drawn from `T_z`, and
//! beliefs are updated from the observed price.

use mfgl_core::beliefs::{update_beliefs, BeliefState, LearningRule, PlmFamily};
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bellman::{bellman_backward, BellmanSolution, TieBreak};
use crate::error::{check_len, check_stochastic, Error, Result};
use crate::kernel::{quantile_nodes, PerceivedPriceKernel};
use crate::model::DiscreteModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Forecast {
    /// Today's price is expected to persist.
    ConstantCurrent,
    /// Prices are expected around the perceived level `θ`.
    Level,
    /// `p′ − p = θ₀ + θ₁·p` plus noise.
    Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningConfig {
    pub periods: usize,
    pub forecast: Forecast,
    pub rule: LearningRule,
    /// Perceived forecast noise.
    pub sigma: f64,
    /// Price nodes for the level and VAR kernels (sorted).
    pub nodes: Vec<f64>,
    pub ties: TieBreak,
    /// Relative belief change below which the previous Bellman solution is
    /// reused; 0 re-solves every period.
    pub cache_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningPath {
    /// `prices[t]`, `t < periods`.
    pub prices: Vec<f64>,
    /// `z[t]`, `t <= periods`.
    pub z: Vec<usize>,
    /// `histograms[t]`, `t <= periods`.
    pub histograms: Vec<Vec<f64>>,
    /// Beliefs before the update of period `t`, `t <= periods`.
    pub thetas: Vec<Vec<f64>>,
    /// `policies[t][x][a]`.
    pub policies: Vec<Vec<Vec<f64>>>,
    /// Number of Bellman solves.
    pub solves: usize,
}

fn kernel_for(forecast: Forecast, config: &LearningConfig, theta: &[f64], p: f64) -> PerceivedPriceKernel {
    match forecast {
        Forecast::ConstantCurrent => PerceivedPriceKernel::Degenerate { nodes: vec![p] },
        Forecast::Level => PerceivedPriceKernel::Var {
            nodes: config.nodes.clone(),
            intercept: theta[0],
            slope: 0.0,
            sigma: config.sigma,
        },
        Forecast::Var => PerceivedPriceKernel::Var {
            nodes: config.nodes.clone(),
            intercept: theta[0],
            slope: 1.0 + theta[1],
            sigma: config.sigma,
        },
    }
}

fn validate(model: &DiscreteModel, m0: &[f64], z0: usize, belief0: &BeliefState, config: &LearningConfig) -> Result<()> {
    model.validate()?;
    if model.horizon == 0 {
        return Err(Error::invalid("discrete.horizon", "agents need at least one decision period"));
    }
    check_len("histogram", model.n_x, m0.len())?;
    check_stochastic("histogram", 0, m0)?;
    if z0 >= model.n_z {
        return Err(Error::invalid("z0", "aggregate state out of range"));
    }
    config.rule.validate()?;
    if !(config.cache_threshold >= 0.0) {
        return Err(Error::invalid("learning.cache_threshold", "must be >= 0"));
    }
    match config.forecast {
        Forecast::ConstantCurrent => {}
        Forecast::Level => {
            check_len("theta", 1, belief0.theta.len())?;
            if !config.rule.is_level() {
                return Err(Error::invalid("learning.rule", "level forecasts need a level learning rule"));
            }
        }
        Forecast::Var => {
            check_len("theta", 2, belief0.theta.len())?;
            if config.rule.is_level() && !matches!(config.rule, LearningRule::Frozen) {
                return Err(Error::invalid("learning.rule", "VAR forecasts are learned by least squares"));
            }
        }
    }
    if config.forecast != Forecast::ConstantCurrent && config.nodes.is_empty() {
        return Err(Error::invalid("learning.nodes", "need price nodes for the perceived kernel"));
    }
    Ok(())
}

/// Simulates `config.periods` periods of learning from `(m0, z0)`.
pub fn run_discrete_learning(
    model: &DiscreteModel,
    m0: &[f64],
    z0: usize,
    seed: u64,
    belief0: &BeliefState,
    config: &LearningConfig,
) -> Result<LearningPath> {
    validate(model, m0, z0, belief0, config)?;
    let family = (config.forecast == Forecast::Var).then_some(PlmFamily::Linear { with_z: false });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z_draw: Vec<WeightedIndex<f64>> = model
        .tz
        .iter()
        .map(|row| WeightedIndex::new(row).expect("validated row"))
        .collect();
    let mut m = m0.to_vec();
    let mut z = z0;
    let mut belief = belief0.clone();
    let mut cache: Option<(Vec<f64>, PerceivedPriceKernel, BellmanSolution)> = None;
    let mut path = LearningPath {
        prices: Vec::with_capacity(config.periods),
        z: vec![z0],
        histograms: vec![m.clone()],
        thetas: vec![belief.theta.clone()],
        policies: Vec::with_capacity(config.periods),
        solves: 0,
    };
    for _ in 0..config.periods {
        let p = model.price(&m, z);
        let reuse = config.forecast != Forecast::ConstantCurrent
            && cache.as_ref().is_some_and(|(th, _, _)| {
                th.iter()
                    .zip(&belief.theta)
                    .all(|(a, b)| (a - b).abs() <= config.cache_threshold * a.abs().max(1.0))
            });
        if !reuse {
            let kernel = kernel_for(config.forecast, config, &belief.theta, p);
            let sol = bellman_backward(model, &kernel, config.ties)?;
            path.solves += 1;
            cache = Some((belief.theta.clone(), kernel, sol));
        }
        let (_, kernel, sol) = cache.as_ref().expect("solved above");
        let policy = sol.decide(model, kernel, 0, z, p, config.ties)?;
        m = model.push_forward(&m, z, &policy);
        belief = update_beliefs(&config.rule, family, &belief, &[p], 0.0, 1.0)?;
        z = z_draw[z].sample(&mut rng);
        path.prices.push(p);
        path.policies.push(policy);
        path.z.push(z);
        path.histograms.push(m.clone());
        path.thetas.push(belief.theta.clone());
    }
    Ok(path)
}

/// Price nodes at the quantiles of a pilot run in which agents expect
/// today's price to persist.
pub fn pilot_price_nodes(
    model: &DiscreteModel,
    m0: &[f64],
    z0: usize,
    seed: u64,
    periods: usize,
    n_nodes: usize,
    spread: f64,
) -> Result<Vec<f64>> {
    let config = LearningConfig {
        periods,
        forecast: Forecast::ConstantCurrent,
        rule: LearningRule::Frozen,
        sigma: 0.0,
        nodes: Vec::new(),
        ties: TieBreak::LowestIndex,
        cache_threshold: 0.0,
    };
    let path = run_discrete_learning(model, m0, z0, seed, &BeliefState::new(Vec::new()), &config)?;
    quantile_nodes(&path.prices, n_nodes, spread)
}
