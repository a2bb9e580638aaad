//! The acceptance battery. Each criterion runs its own experiment, times
//! it, and reports a single pass/fail with the measured quantities.

use std::path::Path;
use std::time::Instant;

use mfgl_core::augmented::{price_axis, solve_extended_hjb, solve_internalized_hjb, solve_price_space_hjb, AugmentedConfig};
use mfgl_core::beliefs::{update_beliefs, BeliefState, LearningRule, PlmFamily, PriceChart, Predictor};
use mfgl_core::common_noise::{run_learning_simulation, CommonNoiseConfig, LearningRun};
use mfgl_core::equilibrium::{
    solve_perfect_foresight_transition, solve_stationary_equilibrium, EquilibriumConfig, StationaryEquilibrium,
    TransitionConfig,
};
use mfgl_core::fokker_planck::fp_forward_step;
use mfgl_core::hjb::{build_generator, solve_hjb_path, stationary_residual, PolicyField, ValueField};
use mfgl_core::model::market_clearing_residual;
use mfgl_core::temporary::{run_temporary_equilibrium, BeliefSpec, TemporaryConfig};
use mfgl_core::{Density, ModelParams, PriceVector, StateGrid};
use mfgl_discrete::{
    bellman_backward, induced_tree_kernel, master_oracle, mrp_value_bruteforce, DiscreteModel,
    MarkovRewardProcess, OracleOptions, Quadratic, TieBreak,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::run::{run, Command};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "criterion {:>2} {}: {} ({}; {:.1} s)",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail,
            self.seconds
        )
    }
}

type Check = (bool, String);

fn timed(id: usize, name: &'static str, limit: f64, f: impl FnOnce() -> Result<Check, String>) -> Outcome {
    let start = Instant::now();
    let result = f();
    let seconds = start.elapsed().as_secs_f64();
    let (ok, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    let in_time = seconds < limit;
    Outcome {
        id,
        name,
        passed: ok && in_time,
        detail: if in_time { detail } else { format!("{detail}; over the {limit} s budget") },
        seconds,
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn setup(n_wealth: usize) -> Result<(StateGrid, ModelParams), String> {
    let params = ModelParams::default_calibration();
    let grid = StateGrid::uniform(50.0, n_wealth, &params.income).map_err(e)?;
    Ok((grid, params))
}

fn equilibrium(grid: &StateGrid, params: &ModelParams) -> Result<StationaryEquilibrium, String> {
    solve_stationary_equilibrium(grid, params, &EquilibriumConfig::default()).map_err(e)
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn adjoint_consistency() -> Outcome {
    timed(1, "adjoint consistency", 5.0, || {
        let (grid, mut params) = setup(200)?;
        let p = PriceVector { rate: 0.04, wage: 1.1 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            params.nu = rng.gen_range(0.0..0.05);
            let c = (0..grid.len())
                .map(|k| {
                    let (i, j) = grid.split(k);
                    let f: f64 = rng.gen_range(0.2..1.8);
                    let f = if i == 0 { f.min(1.0) } else { f };
                    f * p.resources(grid.wealth()[i], grid.income()[j])
                })
                .collect();
            let policy = PolicyField::from_consumption(c, p, &grid);
            let op = build_generator(&policy, &grid, &params).map_err(e)?;
            let u: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let m: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let au = op.apply(&u);
            let lhs: f64 = au.iter().zip(&m).map(|(a, b)| a * b).sum();
            let rhs: f64 = u.iter().zip(op.apply_transpose(&m)).map(|(a, b)| a * b).sum();
            let scale: f64 = au.iter().zip(&m).map(|(a, b)| (a * b).abs()).sum();
            worst = worst.max((lhs - rhs).abs() / scale);
        }
        Ok((worst <= 1e-12, format!("worst relative gap {worst:.2e} over 100 policies")))
    })
}

pub fn mass_conservation() -> Outcome {
    let prep = setup(200).and_then(|(grid, params)| Ok((equilibrium(&grid, &params)?, grid)));
    timed(2, "mass conservation and sign", 10.0, || {
        let (eq, grid) = prep?;
        let mut m = Density::uniform_probabilities(&grid);
        let (mut drift, mut min): (f64, f64) = (0.0, f64::INFINITY);
        for _ in 0..1000 {
            m = fp_forward_step(&m, &eq.operator, 0.1, &grid).map_err(e)?;
            drift = drift.max((m.total_mass(&grid) - 1.0).abs());
            min = min.min(m.values().iter().copied().fold(f64::INFINITY, f64::min));
        }
        Ok((
            drift < 1e-10 && min >= 0.0,
            format!("mass drift {drift:.2e}, min entry {min:.2e} over 1000 steps"),
        ))
    })
}

pub fn stationary_equilibrium() -> Outcome {
    timed(3, "stationary equilibrium", 30.0, || {
        let (grid, params) = setup(200)?;
        let eq = equilibrium(&grid, &params)?;
        let clearing = market_clearing_residual(eq.prices, &eq.density, 0.0, &grid, &params).map_err(e)?.sup_norm();
        let hjb = stationary_residual(&eq.value.values, eq.prices, &grid, &params).map_err(e)?;
        let hjb = hjb.iter().map(|r| r.abs()).fold(0.0, f64::max);
        let (mono, conc) = eq.value.shape_violations(&grid);
        Ok((
            clearing < 1e-6 && hjb < 1e-8 && mono <= 1e-8 && conc <= 1e-8,
            format!("clearing {clearing:.2e}, HJB residual {hjb:.2e}, monotone {mono:.1e}, concave {conc:.1e}"),
        ))
    })
}

pub fn rational_recovery() -> Outcome {
    timed(4, "rational-expectations recovery", 180.0, || {
        let (grid, params) = setup(100)?;
        let eq = equilibrium(&grid, &params)?;
        let q = eq.density.probabilities(&grid);
        let mut poorer = vec![0.0; q.len()];
        for (k, qk) in q.iter().enumerate() {
            let (i, j) = grid.split(k);
            poorer[grid.index(i * 3 / 4, j)] += qk;
        }
        let m0 = Density::from_probabilities(&grid, &poorer).map_err(e)?;
        let cfg = TransitionConfig { steps: 100, tolerance: 1e-10, ..TransitionConfig::default() };
        let path = solve_perfect_foresight_transition(&m0, &eq, &grid, &params, &cfg).map_err(e)?;
        let spec = BeliefSpec {
            predictor: Predictor::PerfectForesight(path.prices.clone()),
            rule: LearningRule::Frozen,
            chart: PriceChart::Independent,
        };
        let terminal = ValueField::new(eq.value.values.clone(), 100.0 * params.dt);
        let traj = run_temporary_equilibrium(&m0, &BeliefState::new(vec![]), &spec, &grid, &params, &terminal, &TemporaryConfig::new(100))
            .map_err(e)?;
        let d = traj.price_distance(&path.prices);
        Ok((d < 1e-6 && traj.len() == 101, format!("price sup-norm gap {d:.2e} over 100 steps")))
    })
}

pub fn learning_convergence() -> Outcome {
    timed(5, "learning convergence", 30.0, || {
        let (grid, params) = setup(200)?;
        let p_bar = equilibrium(&grid, &params)?.prices.rate;
        // Decreasing gain against the constant price, dt = 1. With t0 = 10 the
        // gap is gap0·10/(t+10), so the doubling ratio is (t+10)/(2t+10).
        let rule = LearningRule::DecreasingGain { t0: 10.0 };
        let mut b = BeliefState::new(vec![2.0 * p_bar]);
        let mut gaps = vec![(b.theta[0] - p_bar).abs()];
        for _ in 0..1600 {
            b = update_beliefs(&rule, None, &b, &[p_bar], 0.0, 1.0).map_err(e)?;
            gaps.push((b.theta[0] - p_bar).abs());
        }
        let worst_ratio = [25usize, 50, 100, 200, 400, 800]
            .iter()
            .map(|&t| gaps[2 * t] / gaps[t])
            .fold(0.0, f64::max);
        // Constant gain: exponential smoothing at dt = 1e-3.
        let (alpha, dt) = (0.5, 1e-3);
        let rule = LearningRule::ConstantGain { gain: alpha };
        let theta0 = 1.5 * p_bar;
        let mut b = BeliefState::new(vec![theta0]);
        let mut worst_cg: f64 = 0.0;
        for n in 1..=10_000 {
            b = update_beliefs(&rule, None, &b, &[p_bar], 0.0, dt).map_err(e)?;
            let exact = p_bar + (theta0 - p_bar) * (-alpha * n as f64 * dt).exp();
            worst_cg = worst_cg.max((b.theta[0] - exact).abs() / p_bar);
        }
        Ok((
            gaps.iter().all(|g| *g > 0.0) && worst_ratio <= 0.75 && worst_cg < 1e-3,
            format!("worst doubling ratio {worst_ratio:.3} after t = 25; constant-gain relative gap {worst_cg:.2e}"),
        ))
    })
}

pub fn cross_solver() -> Outcome {
    timed(6, "cross-solver consistency", 120.0, || {
        const STEPS: usize = 30;
        let (grid, params) = setup(100)?;
        let eq = equilibrium(&grid, &params)?;
        let r = eq.prices.rate;
        let terminal = eq.value.values;
        let grid = grid.with_price_nodes(vec![price_axis(r, 0.2, 11)]).map_err(e)?;
        let tech = params.technology();
        let config = AugmentedConfig::default();
        let chart = PriceChart::RateFrontier;
        let nodes = grid.price_nodes()[0].clone();
        let np = nodes.len();

        let still = PlmFamily::Linear { with_z: false };
        let ps0 = solve_price_space_hjb(&[0.0, 0.0], chart, still, &grid, &params, &terminal, STEPS, &config).map_err(e)?;
        let mut a: f64 = 0.0;
        for (w, &p) in nodes.iter().enumerate() {
            let price = chart.to_prices(&[p], 0.0, &tech).map_err(e)?;
            let term = ValueField::new(terminal.clone(), STEPS as f64 * params.dt);
            let (values, _) = solve_hjb_path(&vec![price; STEPS], &term, params.dt, &grid, &params).map_err(e)?;
            a = a.max(sup(ps0.node_slice(0, w).map_err(e)?, &values[0].values));
        }

        let anchored = PlmFamily::Anchored { speed: 0.5, z_loading: 0.0 };
        let ps = solve_price_space_hjb(&[r], chart, anchored, &grid, &params, &terminal, STEPS, &config).map_err(e)?;
        let zgrid = grid.clone().with_z_nodes(vec![-0.1, 0.0, 0.1]).map_err(e)?;
        let ext = solve_extended_hjb(&[r], chart, anchored, 0.0, &zgrid, &params, &terminal, STEPS, &config).map_err(e)?;
        let mut b: f64 = 0.0;
        for w in 0..np {
            b = b.max(sup(ext.node_slice(0, np + w).map_err(e)?, ps.node_slice(0, w).map_err(e)?));
        }

        let thetas = price_axis(r, 0.1, 3);
        let tgrid = grid.clone().with_theta_nodes(vec![thetas.clone()]).map_err(e)?;
        let int = solve_internalized_hjb(chart, anchored, LearningRule::Frozen, 0.0, &tgrid, &params, &terminal, STEPS, &config)
            .map_err(e)?;
        let mut c: f64 = 0.0;
        for (k, th) in thetas.iter().enumerate() {
            let fixed = solve_price_space_hjb(&[*th], chart, anchored, &grid, &params, &terminal, STEPS, &config).map_err(e)?;
            for w in 0..np {
                let node = w * thetas.len() + k;
                c = c.max(sup(int.node_slice(0, node).map_err(e)?, fixed.node_slice(0, w).map_err(e)?));
            }
        }
        Ok((
            a < 1e-8 && b < 1e-8 && c < 1e-10,
            format!("price-space vs constant {a:.1e}, extended vs price-space {b:.1e}, internalized vs price-space {c:.1e}"),
        ))
    })
}

/// Same model with the price slope shared by every action, no curvature,
/// and the first action's transitions for all actions.
fn linear_variant(model: &DiscreteModel) -> DiscreteModel {
    let mut m = model.clone();
    for per_z in &mut m.tx {
        let first = per_z[0].clone();
        for mat in per_z.iter_mut() {
            *mat = first.clone();
        }
    }
    for q in m.reward.iter_mut().flatten().flatten() {
        *q = Quadratic::new(q.c0, 1.0, 0.0);
    }
    for q in m.terminal.iter_mut().flatten() {
        q.c2 = 0.0;
    }
    m
}

fn tree_gap(model: &DiscreteModel, m0: &[f64], resolution: usize) -> Result<f64, String> {
    let sol = master_oracle(model, &OracleOptions::new(resolution)).map_err(e)?;
    let mut gap: f64 = 0.0;
    for z0 in 0..model.n_z {
        let tree = induced_tree_kernel(model, &sol, m0, z0, 200).map_err(e)?;
        let bell = bellman_backward(model, &tree.kernel, TieBreak::LowestIndex).map_err(e)?;
        for x in 0..model.n_x {
            let oracle = sol.value_at(0, x, z0, m0).map_err(e)?;
            gap = gap.max((oracle - bell.value(0, x, z0, tree.root)).abs());
        }
    }
    Ok(gap)
}

pub fn discrete_recovery() -> Outcome {
    timed(7, "discrete rational recovery", 60.0, || {
        let cfg = RunConfig::default();
        let model = cfg.discrete_model();
        let m0 = &cfg.discrete.m0;
        let nonlinear = tree_gap(&model, m0, 101)?;
        let linear_model = linear_variant(&model);
        let linear = tree_gap(&linear_model, m0, 101)?;
        Ok((
            nonlinear < 1e-3 && linear < 1e-12 && linear_model.is_linear(),
            format!("tree gap {nonlinear:.2e} at resolution 101; linear variant {linear:.1e}"),
        ))
    })
}

fn mrp_gap(mrp: &MarkovRewardProcess, m0s: &[Vec<f64>], resolution: usize) -> Result<f64, String> {
    let sol = master_oracle(&mrp.to_model(), &OracleOptions::new(resolution)).map_err(e)?;
    let mut gap: f64 = 0.0;
    for m0 in m0s {
        for x in 0..mrp.n_x {
            for z in 0..mrp.n_z {
                let exact = mrp_value_bruteforce(mrp, x, z, m0).map_err(e)?;
                gap = gap.max((sol.value_at(0, x, z, m0).map_err(e)? - exact).abs());
            }
        }
    }
    Ok(gap)
}

pub fn mrp_cross_oracle() -> Outcome {
    timed(8, "MRP cross-oracle", 60.0, || {
        let cfg = RunConfig::default();
        let quadratic = cfg.mrp();
        let mut linear = quadratic.clone();
        for q in linear.reward.iter_mut().chain(linear.terminal.iter_mut()).flatten() {
            q.c2 = 0.0;
        }
        let m0s = &cfg.mrp.m0;
        let lin = mrp_gap(&linear, m0s, 101)?;
        let coarse = mrp_gap(&quadratic, m0s, 101)?;
        let fine = mrp_gap(&quadratic, m0s, 201)?;
        let ratio = coarse / fine;
        Ok((
            lin < 1e-12 && (3.0..5.0).contains(&ratio),
            format!("linear gap {lin:.1e}; quadratic gaps {coarse:.2e} (101) and {fine:.2e} (201), ratio {ratio:.2}"),
        ))
    })
}

fn cache_consistent(run: &LearningRun, threshold: f64) -> bool {
    let solve_steps: Vec<usize> = run.solves.iter().map(|s| s.step).collect();
    let thetas = &run.trajectory.thetas;
    let mut cached: Option<&[f64]> = None;
    let steps = thetas.len() - 1;
    for (step, theta) in thetas.iter().enumerate().take(steps) {
        let moved = cached.map(|c| {
            let d = c.iter().zip(theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            d > threshold * c.iter().map(|a| a.abs()).fold(0.0, f64::max)
        });
        let should_solve = threshold == 0.0 || moved.unwrap_or(true);
        if should_solve != solve_steps.contains(&step) {
            return false;
        }
        if should_solve {
            cached = Some(theta);
        }
    }
    true
}

pub fn common_noise() -> Outcome {
    timed(9, "common-noise structural check", 600.0, || {
        let cn = RunConfig::default().common_noise;
        let (grid, base) = setup(200)?;
        let params = ModelParams { dt: cn.dt, beta: cn.beta, ..base };
        let eq = equilibrium(&grid, &ModelParams { beta: 0.0, ..params.clone() })?;
        let belief = BeliefState::new(vec![eq.prices.rate * cn.theta0_scale]);
        let go = |threshold: f64| {
            let cfg = CommonNoiseConfig {
                cache_threshold: threshold,
                price_nodes: 21,
                z_nodes: 11,
                ..CommonNoiseConfig::new(500, cn.gain)
            };
            run_learning_simulation(&eq.density, 0.0, &belief, 7, eq.prices, &grid, &params, &eq.value.values, &cfg)
                .map_err(e)
        };
        let default_threshold = CommonNoiseConfig::new(500, cn.gain).cache_threshold;
        let cached = go(default_threshold)?;
        let fresh = go(0.0)?;
        let mut ok = true;
        let mut detail = Vec::new();
        for (label, run, thr) in [("default", &cached, default_threshold), ("threshold 0", &fresh, 0.0)] {
            let inv = run.check_invariants(&grid, &params).map_err(e)?;
            let good = inv.max_mass_drift < 1e-10
                && inv.min_density_entry >= 0.0
                && inv.max_price_inconsistency < 1e-12
                && run.trajectory.len() == 501
                && cache_consistent(run, thr);
            ok &= good;
            detail.push(format!(
                "{label}: {} solves, mass drift {:.1e}, price inconsistency {:.1e}",
                run.solves.len(),
                inv.max_mass_drift,
                inv.max_price_inconsistency
            ));
        }
        ok &= fresh.solves.len() == 500 && cached.solves.len() < 500;
        let dev = fresh
            .trajectory
            .prices
            .iter()
            .zip(&cached.trajectory.prices)
            .map(|(a, b)| (a.rate - b.rate).abs() / a.rate)
            .fold(0.0, f64::max);
        // Cached beliefs are off by at most the threshold in relative terms,
        // and so are the prices they induce.
        ok &= dev <= default_threshold;
        detail.push(format!("cached vs fresh relative rate gap {dev:.2e} (bound {default_threshold})"));
        Ok((ok, detail.join("; ")))
    })
}

/// Reduced sizes; the code paths are those of the full runs.
pub fn small_config() -> RunConfig {
    let mut c = RunConfig::default();
    c.seed = 12345;
    c.grid.n_wealth = 40;
    c.transition.steps = 10;
    c.temporary.steps = 10;
    c.common_noise.steps = 10;
    c.common_noise.price_nodes = 7;
    c.common_noise.z_nodes = 5;
    c.common_noise.stride = 5;
    c.discrete.master.resolution = 21;
    c.discrete.master.tolerance = 0.0;
    c.discrete.learning.periods = 40;
    c.discrete.learning.pilot_periods = 40;
    c.mrp.resolution = 21;
    c.mrp.mc_paths = 500;
    c.output.density_every = 5;
    c
}

fn csv_files(dir: &Path) -> std::io::Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|x| x == "csv") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            out.push((name, std::fs::read(&path)?));
        }
    }
    out.sort();
    Ok(out)
}

pub fn determinism() -> Outcome {
    timed(10, "determinism", 600.0, || {
        let cfg = small_config();
        let root = tempfile::tempdir().map_err(e)?;
        let mut files = 0;
        for cmd in Command::RUNNERS {
            let mut runs = Vec::new();
            for k in 0..2 {
                let dir = root.path().join(format!("{}-{k}", cmd.name()));
                run(cmd, &cfg, &dir, 1).map_err(|err| format!("{}: {err}", cmd.name()))?;
                runs.push(csv_files(&dir).map_err(e)?);
            }
            if runs[0].is_empty() || runs[0] != runs[1] {
                return Ok((false, format!("{} outputs differ between runs", cmd.name())));
            }
            files += runs[0].len();
        }
        Ok((true, format!("{} subcommands, {files} CSV files byte-identical across two runs", Command::RUNNERS.len())))
    })
}

pub fn run_all() -> Vec<Outcome> {
    vec![
        adjoint_consistency(),
        mass_conservation(),
        stationary_equilibrium(),
        rational_recovery(),
        learning_convergence(),
        cross_solver(),
        discrete_recovery(),
        mrp_cross_oracle(),
        common_noise(),
        determinism(),
    ]
}
