//! Subcommand runners. Each one builds its inputs from the configuration,
//! calls the solvers and persists the results through [`RunDir`].

use std::path::Path;

use mfgl_core::beliefs::{BeliefState, LearningRule, PlmFamily, PriceBox, Predictor};
use mfgl_core::common_noise::{run_learning_simulation, CommonNoiseConfig};
use mfgl_core::augmented::AugmentedConfig;
use mfgl_core::equilibrium::{
    solve_perfect_foresight_transition, solve_stationary_equilibrium, EquilibriumConfig,
    StationaryEquilibrium, TransitionConfig,
};
use mfgl_core::hjb::{stationary_residual, ValueField};
use mfgl_core::model::market_clearing_residual;
use mfgl_core::temporary::{run_temporary_equilibrium, BeliefSpec, TemporaryConfig};
use mfgl_core::trajectory::Trajectory;
use mfgl_core::{Density, ModelParams, StateGrid};
use mfgl_discrete::{
    bellman_backward, induced_tree_kernel, master_oracle, mrp_value_bruteforce, mrp_value_monte_carlo,
    pilot_price_nodes, run_discrete_learning, Forecast, LearningConfig, OracleOptions,
};
use serde_json::{json, Value};

use crate::config::{rule_from, ForecastKind, PredictorKind, RunConfig};
use crate::error::CliError;
use crate::output::{num, substream, RunDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "kebab-case")]
pub enum Command {
    Stationary,
    Transition,
    TemporaryEq,
    CommonNoise,
    DiscreteLearn,
    DiscreteMaster,
    Mrp,
    Suite,
}

impl Command {
    pub const RUNNERS: [Command; 7] = [
        Command::Stationary,
        Command::Transition,
        Command::TemporaryEq,
        Command::CommonNoise,
        Command::DiscreteLearn,
        Command::DiscreteMaster,
        Command::Mrp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Stationary => "stationary",
            Command::Transition => "transition",
            Command::TemporaryEq => "temporary-eq",
            Command::CommonNoise => "common-noise",
            Command::DiscreteLearn => "discrete-learn",
            Command::DiscreteMaster => "discrete-master",
            Command::Mrp => "mrp",
            Command::Suite => "suite",
        }
    }
}

/// Runs `command` into `out_dir`. On failure the directory keeps whatever
/// was written and the manifest records the error.
pub fn run(command: Command, config: &RunConfig, out_dir: &Path, threads: usize) -> Result<Value, CliError> {
    let mut dir = RunDir::create(out_dir, command.name(), config, threads)?;
    let result = match command {
        Command::Stationary => stationary(config, &mut dir),
        Command::Transition => transition(config, &mut dir),
        Command::TemporaryEq => temporary(config, &mut dir),
        Command::CommonNoise => common_noise(config, &mut dir),
        Command::DiscreteLearn => discrete_learn(config, &mut dir),
        Command::DiscreteMaster => discrete_master(config, &mut dir),
        Command::Mrp => mrp(config, &mut dir),
        Command::Suite => suite(&mut dir),
    };
    match result {
        Ok(summary) => dir.finish(summary),
        Err(e) => {
            dir.fail(&e)?;
            Err(e)
        }
    }
}

fn grid_for(config: &RunConfig, params: &ModelParams) -> Result<StateGrid, CliError> {
    Ok(StateGrid::uniform(config.grid.a_max, config.grid.n_wealth, &params.income)?)
}

fn equilibrium(config: &RunConfig, grid: &StateGrid, params: &ModelParams) -> Result<StationaryEquilibrium, CliError> {
    let eq_cfg = EquilibriumConfig {
        capital_tolerance: config.equilibrium.capital_tolerance,
        max_bisections: config.equilibrium.max_bisections,
        ..EquilibriumConfig::default()
    };
    Ok(solve_stationary_equilibrium(grid, params, &eq_cfg)?)
}

/// Moves the mass at wealth node `i` to `floor(i·scale)`.
fn compressed(m: &Density, grid: &StateGrid, scale: f64) -> Result<Density, CliError> {
    let q = m.probabilities(grid);
    let mut out = vec![0.0; q.len()];
    for (k, qk) in q.iter().enumerate() {
        let (i, j) = grid.split(k);
        out[grid.index((i as f64 * scale).floor() as usize, j)] += qk;
    }
    Ok(Density::from_probabilities(grid, &out)?)
}

fn mass_drift(densities: &[Density], grid: &StateGrid) -> f64 {
    densities.iter().map(|m| (m.total_mass(grid) - 1.0).abs()).fold(0.0, f64::max)
}

fn min_entry(densities: &[Density]) -> f64 {
    densities
        .iter()
        .flat_map(|m| m.values().iter().copied())
        .fold(f64::INFINITY, f64::min)
}

fn snapshots(dir: &mut RunDir, config: &RunConfig, densities: &[Density], grid: &StateGrid) -> Result<(), CliError> {
    let every = config.output.density_every;
    if every == 0 {
        return Ok(());
    }
    for (n, m) in densities.iter().enumerate() {
        if n % every == 0 || n + 1 == densities.len() {
            dir.density(n, m, grid)?;
        }
    }
    Ok(())
}

fn stationary(config: &RunConfig, dir: &mut RunDir) -> Result<Value, CliError> {
    let params = config.params();
    let grid = grid_for(config, &params)?;
    let eq = equilibrium(config, &grid, &params)?;
    let clearing = market_clearing_residual(eq.prices, &eq.density, 0.0, &grid, &params)?;
    let hjb = stationary_residual(&eq.value.values, eq.prices, &grid, &params)?;
    let hjb_max = hjb.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let (mono, conc) = eq.value.shape_violations(&grid);
    dir.csv(
        "prices.csv",
        &["rate", "wage", "capital", "labor"],
        [vec![num(eq.prices.rate), num(eq.prices.wage), num(eq.capital), num(eq.labor)]],
    )?;
    dir.csv(
        "clearing_residuals.csv",
        &["rate_residual", "wage_residual"],
        [vec![num(clearing.rate), num(clearing.wage)]],
    )?;
    dir.csv(
        "value.csv",
        &["wealth", "income", "value", "consumption", "drift", "hjb_residual"],
        (0..grid.len()).map(|k| {
            let (i, j) = grid.split(k);
            vec![
                num(grid.wealth()[i]),
                num(grid.income()[j]),
                num(eq.value.values[k]),
                num(eq.policy.consumption[k]),
                num(eq.policy.drift[k]),
                num(hjb[k]),
            ]
        }),
    )?;
    dir.density(0, &eq.density, &grid)?;
    Ok(json!({
        "rate": eq.prices.rate,
        "wage": eq.prices.wage,
        "capital": eq.capital,
        "clearing_residual_max": clearing.sup_norm(),
        "hjb_residual_max": hjb_max,
        "monotonicity_violation": mono,
        "concavity_violation": conc,
        "mass_drift": (eq.density.total_mass(&grid) - 1.0).abs(),
    }))
}

fn transition(config: &RunConfig, dir: &mut RunDir) -> Result<Value, CliError> {
    let params = config.params();
    let grid = grid_for(config, &params)?;
    let eq = equilibrium(config, &grid, &params)?;
    let m0 = compressed(&eq.density, &grid, config.transition.wealth_scale)?;
    let t = &config.transition;
    let cfg = TransitionConfig {
        steps: t.steps,
        damping: t.damping,
        tolerance: t.tolerance,
        max_iter: t.max_iter,
        ..TransitionConfig::default()
    };
    let path = solve_perfect_foresight_transition(&m0, &eq, &grid, &params, &cfg)?;
    let residuals: Vec<f64> = path
        .prices
        .iter()
        .zip(&path.densities)
        .map(|(p, m)| market_clearing_residual(*p, m, 0.0, &grid, &params).map(|r| r.sup_norm()))
        .collect::<Result<_, _>>()?;
    dir.csv(
        "prices.csv",
        &["t", "rate", "wage"],
        path.prices
            .iter()
            .enumerate()
            .map(|(n, p)| vec![num(n as f64 * params.dt), num(p.rate), num(p.wage)]),
    )?;
    dir.csv(
        "clearing_residuals.csv",
        &["t", "residual"],
        residuals.iter().enumerate().map(|(n, r)| vec![num(n as f64 * params.dt), num(*r)]),
    )?;
    dir.csv(
        "residual_history.csv",
        &["iteration", "residual"],
        path.residual_history.iter().enumerate().map(|(k, r)| vec![k.to_string(), num(*r)]),
    )?;
    snapshots(dir, config, &path.densities, &grid)?;
    Ok(json!({
        "iterations": path.iterations,
        "clearing_residual_max": residuals.iter().copied().fold(0.0, f64::max),
        "mass_drift": mass_drift(&path.densities, &grid),
        "min_density_entry": min_entry(&path.densities),
        "stationary_rate": eq.prices.rate,
    }))
}

fn write_trajectory(dir: &mut RunDir, config: &RunConfig, traj: &Trajectory, grid: &StateGrid) -> Result<(), CliError> {
    dir.csv(
        "prices.csv",
        &["t", "z", "rate", "wage"],
        (0..traj.len()).map(|n| {
            vec![num(traj.times[n]), num(traj.z[n]), num(traj.prices[n].rate), num(traj.prices[n].wage)]
        }),
    )?;
    let dim = traj.thetas.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((0..dim).map(|i| format!("theta_{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    dir.csv(
        "theta.csv",
        &header,
        traj.thetas.iter().zip(&traj.times).map(|(th, t)| {
            std::iter::once(num(*t)).chain(th.iter().map(|v| num(*v))).collect::<Vec<_>>()
        }),
    )?;
    dir.csv(
        "forecast_errors.csv",
        &["t", "rate_error", "wage_error"],
        traj.forecast_errors.iter().zip(&traj.times).map(|(e, t)| match e {
            Some(e) => vec![num(*t), num(e.rate), num(e.wage)],
            None => vec![num(*t), String::new(), String::new()],
        }),
    )?;
    dir.csv(
        "clearing_residuals.csv",
        &["t", "residual", "clipped"],
        (0..traj.len()).map(|n| {
            vec![
                num(traj.times[n]),
                num(traj.clearing_residuals[n]),
                u8::from(traj.clipped.get(n).copied().unwrap_or(false)).to_string(),
            ]
        }),
    )?;
    snapshots(dir, config, &traj.densities, grid)
}

fn temporary(config: &RunConfig, dir: &mut RunDir) -> Result<Value, CliError> {
    let params = config.params();
    let grid = grid_for(config, &params)?;
    let eq = equilibrium(config, &grid, &params)?;
    let m0 = compressed(&eq.density, &grid, config.transition.wealth_scale)?;
    let te = &config.temporary;
    let chart = te.chart.chart();
    let coords = chart.to_coords(eq.prices);
    let scaled: Vec<f64> = coords.iter().map(|c| c * te.theta0_scale).collect();
    let mut rational = None;
    let (predictor, default_theta) = match te.predictor {
        PredictorKind::PerfectForesight => {
            let cfg = TransitionConfig {
                steps: te.steps,
                tolerance: config.transition.tolerance,
                damping: config.transition.damping,
                max_iter: config.transition.max_iter,
                ..TransitionConfig::default()
            };
            let path = solve_perfect_foresight_transition(&m0, &eq, &grid, &params, &cfg)?;
            let p = Predictor::PerfectForesight(path.prices.clone());
            rational = Some(path.prices);
            (p, Vec::new())
        }
        PredictorKind::ConstantCurrent => {
            let theta = if te.rule() == LearningRule::Frozen { Vec::new() } else { scaled.clone() };
            (Predictor::ConstantCurrent, theta)
        }
        PredictorKind::AdaptiveLevel => (Predictor::AdaptiveLevel { smoothing: te.gain }, scaled.clone()),
        PredictorKind::Plm => {
            let family = te.plm_family();
            let theta = match family {
                PlmFamily::Linear { .. } => family.consistent_theta(&scaled),
                PlmFamily::Anchored { .. } => scaled.clone(),
            };
            let price_box = PriceBox::around(&coords, te.price_box);
            (Predictor::ParametricPlm { family, price_box }, theta)
        }
    };
    let theta0 = if te.theta0.is_empty() { default_theta } else { te.theta0.clone() };
    let spec = BeliefSpec {
        predictor,
        rule: te.rule(),
        chart,
    };
    spec.validate(theta0.len())?;
    let terminal = ValueField::new(eq.value.values.clone(), te.steps as f64 * params.dt);
    let cfg = TemporaryConfig {
        steps: te.steps,
        inner_stride: te.inner_stride,
    };
    let traj = run_temporary_equilibrium(&m0, &BeliefState::new(theta0), &spec, &grid, &params, &terminal, &cfg)?;
    write_trajectory(dir, config, &traj, &grid)?;
    let mut summary = json!({
        "clearing_residual_max": traj.max_clearing_residual(),
        "mass_drift": traj.max_mass_drift(&grid),
        "min_density_entry": traj.min_density_entry(),
        "clipped_dates": traj.clipped.iter().filter(|c| **c).count(),
        "stationary_rate": eq.prices.rate,
    });
    if let Some(path) = rational {
        let sup = traj.price_distance(&path);
        summary["recovery_supnorm"] = json!(sup);
        summary["recovery_threshold"] = json!(te.recovery_threshold);
        summary["recovery_pass"] = json!(sup < te.recovery_threshold);
    }
    Ok(summary)
}

fn common_noise(config: &RunConfig, dir: &mut RunDir) -> Result<Value, CliError> {
    let cn = &config.common_noise;
    let params = ModelParams {
        dt: cn.dt,
        beta: cn.beta,
        ..config.params()
    };
    let grid = grid_for(config, &params)?;
    let eq = equilibrium(config, &grid, &ModelParams { beta: 0.0, ..params.clone() })?;
    let cfg = CommonNoiseConfig {
        family: PlmFamily::Anchored {
            speed: cn.speed,
            z_loading: 0.0,
        },
        rule: LearningRule::ConstantGain { gain: cn.gain },
        cache_threshold: cn.cache_threshold,
        price_nodes: cn.price_nodes,
        price_span: cn.price_span,
        z_nodes: cn.z_nodes,
        z_width_sd: cn.z_width_sd,
        solver: AugmentedConfig {
            stride: cn.stride,
            tolerance: cn.tolerance,
            max_sweeps: cn.max_sweeps,
        },
        ..CommonNoiseConfig::new(cn.steps, cn.gain)
    };
    let belief = BeliefState::new(vec![eq.prices.rate * cn.theta0_scale]);
    let seed = substream(config.seed, "common_noise.z_path");
    let run = run_learning_simulation(
        &eq.density,
        cn.z0,
        &belief,
        seed,
        eq.prices,
        &grid,
        &params,
        &eq.value.values,
        &cfg,
    )?;
    let inv = run.check_invariants(&grid, &params)?;
    write_trajectory(dir, config, &run.trajectory, &grid)?;
    dir.csv(
        "z_path.csv",
        &["t", "z"],
        run.aggregate.times.iter().zip(&run.aggregate.z).map(|(t, z)| vec![num(*t), num(*z)]),
    )?;
    dir.csv(
        "hjb_cache.csv",
        &["step", "theta", "sweeps", "max_cfl"],
        run.solves.iter().map(|s| {
            vec![s.step.to_string(), num(s.theta[0]), s.sweeps.to_string(), num(s.max_cfl)]
        }),
    )?;
    dir.json(
        "hjb_cache.json",
        &json!({
            "threshold": cn.cache_threshold,
            "solves": run.solves.len(),
            "steps": cn.steps,
            "solve_steps": run.solves.iter().map(|s| s.step).collect::<Vec<_>>(),
        }),
    )?;
    Ok(json!({
        "mass_drift": inv.max_mass_drift,
        "min_density_entry": inv.min_density_entry,
        "price_inconsistency": inv.max_price_inconsistency,
        "solves": run.solves.len(),
        "clamped_steps": run.aggregate.clamped,
        "z_path_seed": seed,
        "warnings": run.warnings,
    }))
}

fn discrete_learn(config: &RunConfig, dir: &mut RunDir) -> Result<Value, CliError> {
    let model = config.discrete_model();
    let d = &config.discrete;
    let l = &d.learning;
    let forecast = match l.forecast {
        ForecastKind::ConstantCurrent => Forecast::ConstantCurrent,
        ForecastKind::Level => Forecast::Level,
        ForecastKind::Var => Forecast::Var,
    };
    let nodes = if forecast == Forecast::ConstantCurrent {
        Vec::new()
    } else {
        pilot_price_nodes(
            &model,
            &d.m0,
            d.z0,
            substream(config.seed, "discrete.pilot"),
            l.pilot_periods,
            l.price_nodes,
            1e-6,
        )?
    };
    let cfg = LearningConfig {
        periods: l.periods,
        forecast,
        rule: rule_from(l.rule, l.gain, l.t0, l.regularization),
        sigma: l.sigma,
        nodes: nodes.clone(),
        ties: config.ties(),
        cache_threshold: l.cache_threshold,
    };
    let theta0 = if forecast == Forecast::ConstantCurrent { Vec::new() } else { l.theta0.clone() };
    let path = run_discrete_learning(
        &model,
        &d.m0,
        d.z0,
        substream(config.seed, "discrete.z_path"),
        &BeliefState::new(theta0),
        &cfg,
    )?;
    dir.csv("price_nodes.csv", &["node", "price"], nodes.iter().enumerate().map(|(j, p)| vec![j.to_string(), num(*p)]))?;
    dir.csv(
        "prices.csv",
        &["t", "z", "price"],
        path.prices.iter().enumerate().map(|(t, p)| vec![t.to_string(), path.z[t].to_string(), num(*p)]),
    )?;
    let dim = path.thetas.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((0..dim).map(|i| format!("theta_{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    dir.csv(
        "theta.csv",
        &header,
        path.thetas.iter().enumerate().map(|(t, th)| {
            std::iter::once(t.to_string()).chain(th.iter().map(|v| num(*v))).collect::<Vec<_>>()
        }),
    )?;
    let mut header = vec!["t".to_string(), "z".to_string()];
    header.extend((0..model.n_x).map(|x| format!("m_{x}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    dir.csv(
        "histograms.csv",
        &header,
        path.histograms.iter().enumerate().map(|(t, m)| {
            [t.to_string(), path.z[t].to_string()].into_iter().chain(m.iter().map(|v| num(*v))).collect::<Vec<_>>()
        }),
    )?;
    dir.csv(
        "policies.csv",
        &["t", "x", "a", "probability"],
        path.policies.iter().enumerate().flat_map(|(t, pol)| {
            pol.iter().enumerate().flat_map(move |(x, row)| {
                row.iter().enumerate().map(move |(a, p)| vec![t.to_string(), x.to_string(), a.to_string(), num(*p)])
            })
        }),
    )?;
    Ok(json!({
        "periods": l.periods,
        "solves": path.solves,
        "final_price": path.prices.last(),
        "final_theta": path.thetas.last(),
    }))
}

fn discrete_master(config: &RunConfig, dir: &mut RunDir) -> Result<Value, CliError> {
    let model = config.discrete_model();
    let d = &config.discrete;
    let opts = OracleOptions {
        resolution: d.master.resolution,
        tolerance: (d.master.tolerance > 0.0).then_some(d.master.tolerance),
        max_iter: d.master.max_iter,
    };
    let sol = master_oracle(&model, &opts)?;
    let n = sol.lattice.len();
    let mut header = vec!["t".to_string(), "x".to_string(), "z".to_string(), "node".to_string()];
    header.extend((0..model.n_x).map(|x| format!("m_{x}")));
    header.push("value".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let nodes: Vec<Vec<f64>> = (0..n).map(|i| sol.lattice.node(i)).collect();
    let mut rows = Vec::new();
    for (t, vals) in sol.values.iter().enumerate() {
        for x in 0..model.n_x {
            for z in 0..model.n_z {
                for (i, m) in nodes.iter().enumerate() {
                    let mut row = vec![t.to_string(), x.to_string(), z.to_string(), i.to_string()];
                    row.extend(m.iter().map(|v| num(*v)));
                    row.push(num(vals[(x * model.n_z + z) * n + i]));
                    rows.push(row);
                }
            }
        }
    }
    dir.csv("values.csv", &header, rows)?;
    let mut rows = Vec::new();
    for (t, per_t) in sol.policy.iter().enumerate() {
        for z in 0..model.n_z {
            for i in 0..n {
                for (x, row) in per_t[z * n + i].iter().enumerate() {
                    for (a, p) in row.iter().enumerate() {
                        rows.push(vec![t.to_string(), z.to_string(), i.to_string(), x.to_string(), a.to_string(), num(*p)]);
                    }
                }
            }
        }
    }
    dir.csv("policy.csv", &["t", "z", "node", "x", "a", "probability"], rows)?;
    // Along the realized event tree from the configured start.
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for z0 in 0..model.n_z {
        let tree = induced_tree_kernel(&model, &sol, &d.m0, z0, d.master.max_iter)?;
        let bell = bellman_backward(&model, &tree.kernel, config.ties())?;
        for x in 0..model.n_x {
            let a = sol.value_at(0, x, z0, &d.m0)?;
            let b = bell.value(0, x, z0, tree.root);
            worst = worst.max((a - b).abs());
            rows.push(vec![z0.to_string(), x.to_string(), num(a), num(b), num((a - b).abs())]);
        }
    }
    dir.csv("tree_check.csv", &["z0", "x", "oracle", "bellman", "gap"], rows)?;
    Ok(json!({
        "resolution": d.master.resolution,
        "tree_gap_max": worst,
        "cycled_nodes": sol.cycled.len(),
        "error_estimate": sol.error_estimate,
        "linear": model.is_linear(),
        "warnings": sol.warnings,
    }))
}

fn mrp(config: &RunConfig, dir: &mut RunDir) -> Result<Value, CliError> {
    let r = &config.mrp;
    let process = config.mrp();
    let sol = master_oracle(&process.to_model(), &OracleOptions::new(r.resolution))?;
    let seed = substream(config.seed, "mrp.monte_carlo");
    let mut header = vec!["case".to_string(), "x".to_string(), "z".to_string()];
    header.extend((0..r.n_x).map(|x| format!("m_{x}")));
    header.extend(["bruteforce", "oracle", "mc_mean", "mc_std_error"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    let (mut oracle_gap, mut mc_z): (f64, f64) = (0.0, 0.0);
    let mut over_budget = false;
    for (case, m0) in r.m0.iter().enumerate() {
        for x in 0..r.n_x {
            for z in 0..r.n_z {
                let exact = match mrp_value_bruteforce(&process, x, z, m0) {
                    Ok(v) => Some(v),
                    Err(mfgl_discrete::Error::Budget { .. }) => {
                        over_budget = true;
                        None
                    }
                    Err(e) => return Err(e.into()),
                };
                let oracle = sol.value_at(0, x, z, m0)?;
                let stream = seed.wrapping_add((case * r.n_x * r.n_z + x * r.n_z + z) as u64);
                let mc = mrp_value_monte_carlo(&process, x, z, m0, r.mc_paths, stream)?;
                if let Some(v) = exact {
                    oracle_gap = oracle_gap.max((oracle - v).abs());
                    if mc.std_error > 0.0 {
                        mc_z = mc_z.max((mc.mean - v).abs() / mc.std_error);
                    }
                }
                let mut row = vec![case.to_string(), x.to_string(), z.to_string()];
                row.extend(m0.iter().map(|v| num(*v)));
                row.push(exact.map(num).unwrap_or_default());
                row.extend([num(oracle), num(mc.mean), num(mc.std_error)]);
                rows.push(row);
            }
        }
    }
    dir.csv("values.csv", &header, rows)?;
    Ok(json!({
        "oracle_gap_max": oracle_gap,
        "monte_carlo_max_z": mc_z,
        "enumeration_over_budget": over_budget,
        "resolution": r.resolution,
        "linear": process.to_model().is_linear(),
    }))
}

fn suite(dir: &mut RunDir) -> Result<Value, CliError> {
    let outcomes = crate::acceptance::run_all();
    dir.csv(
        "acceptance.csv",
        &["criterion", "name", "passed"],
        outcomes.iter().map(|o| vec![o.id.to_string(), o.name.to_string(), o.passed.to_string()]),
    )?;
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let summary = json!({
        "passed": outcomes.len() - failed,
        "failed": failed,
        "criteria": outcomes.iter().map(|o| json!({
            "id": o.id,
            "name": o.name,
            "passed": o.passed,
            "detail": o.detail,
            "seconds": o.seconds,
        })).collect::<Vec<_>>(),
    });
    if failed > 0 {
        dir.json("summary.json", &summary)?;
        return Err(CliError::Numerical(format!("{failed} acceptance criteria failed")));
    }
    Ok(summary)
}
