mod common;

use mfgl_core::beliefs::{BeliefState, LearningRule};
use mfgl_discrete::*;
use proptest::prelude::*;

fn level_config(periods: usize, rule: LearningRule, nodes: Vec<f64>) -> LearningConfig {
    LearningConfig {
        periods,
        forecast: Forecast::Level,
        rule,
        sigma: 0.1,
        nodes,
        ties: TieBreak::LowestIndex,
        cache_threshold: 0.0,
    }
}

/// One aggregate state, so prices follow the population alone.
fn single_aggregate(linear: bool) -> DiscreteModel {
    let mut m = common::two_by_two(4, linear);
    m.n_z = 1;
    m.tz = vec![vec![1.0]];
    m.tx.truncate(1);
    m.price_map.intercept.truncate(1);
    m.price_map.loadings.truncate(1);
    for per_x in m.reward.iter_mut() {
        per_x.truncate(1);
    }
    for per_x in m.terminal.iter_mut() {
        per_x.truncate(1);
    }
    m
}

proptest! {
    #[test]
    fn chapman_preserves_mass_and_sign(
        w in prop::collection::vec(0.0f64..1.0, 2),
        mix in prop::collection::vec(0.0f64..1.0, 2),
        z in 0usize..2,
    ) {
        let model = common::two_by_two(1, false);
        let total: f64 = w.iter().sum::<f64>().max(1e-9);
        let m = Histogram::new(vec![w[0] / total, 1.0 - w[0] / total]).unwrap();
        let policy: Vec<Vec<f64>> = mix.iter().map(|q| vec![*q, 1.0 - q]).collect();
        let next = chapman_step(&m, &policy, z, &model).unwrap();
        prop_assert!((next.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        prop_assert!(next.as_slice().iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn stationary_histogram_is_a_fixed_point() {
    // Two-state chain with exit rates a and b: stationary (b, a)/(a + b).
    let model = single_aggregate(true);
    let policy = pure_policy(&[0, 0], 2);
    let a = model.tx[0][0][0][1];
    let b = model.tx[0][0][1][0];
    let pi = Histogram::new(vec![b / (a + b), a / (a + b)]).unwrap();
    let next = chapman_step(&pi, &policy, 0, &model).unwrap();
    for (u, v) in next.as_slice().iter().zip(pi.as_slice()) {
        assert!((u - v).abs() < 1e-15);
    }
    // The learning simulation at the fixed point sees a constant price.
    let config = LearningConfig {
        forecast: Forecast::ConstantCurrent,
        ..level_config(30, LearningRule::Frozen, Vec::new())
    };
    let path = run_discrete_learning(&model, pi.as_slice(), 0, 5, &BeliefState::new(Vec::new()), &config).unwrap();
    let p0 = path.prices[0];
    assert!(path.prices.iter().all(|p| (p - p0).abs() < 1e-14));
    assert_eq!(path.solves, 30);
}

#[test]
fn runs_are_reproducible_from_the_seed() {
    let model = common::two_by_two(3, false);
    let nodes = pilot_price_nodes(&model, &[0.5, 0.5], 0, 3, 200, 9, 1e-6).unwrap();
    assert!(nodes.windows(2).all(|w| w[0] < w[1]));
    let config = level_config(150, LearningRule::DecreasingGain { t0: 1.0 }, nodes);
    let b0 = BeliefState::new(vec![0.8]);
    let a = run_discrete_learning(&model, &[0.5, 0.5], 0, 42, &b0, &config).unwrap();
    let b = run_discrete_learning(&model, &[0.5, 0.5], 0, 42, &b0, &config).unwrap();
    assert_eq!(a, b);
    let c = run_discrete_learning(&model, &[0.5, 0.5], 0, 43, &b0, &config).unwrap();
    assert_ne!(a.z, c.z);
    for m in &a.histograms {
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12 && m.iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn decreasing_gain_error_halves_with_time() {
    // Passive transitions: prices converge geometrically whatever agents
    // believe, and the level belief is their running mean.
    let model = single_aggregate(true);
    let nodes: Vec<f64> = (0..21).map(|k| 0.5 + 0.05 * k as f64).collect();
    let config = level_config(801, LearningRule::DecreasingGain { t0: 1.0 }, nodes);
    let path = run_discrete_learning(&model, &[1.0, 0.0], 0, 1, &BeliefState::new(vec![0.6]), &config).unwrap();
    let a = model.tx[0][0][0][1];
    let b = model.tx[0][0][1][0];
    let p_star = model.price(&[b / (a + b), a / (a + b)], 0);
    let gap = |t: usize| (path.thetas[t][0] - p_star).abs();
    for t in [50, 100, 200, 400] {
        let ratio = gap(2 * t) / gap(t);
        assert!(ratio <= 0.75, "t {t}: ratio {ratio}");
    }
}

#[test]
fn cache_threshold_trades_solves_for_accuracy() {
    let model = common::two_by_two(3, false);
    let nodes: Vec<f64> = (0..15).map(|k| 0.1 * k as f64).collect();
    let exact = level_config(200, LearningRule::DecreasingGain { t0: 1.0 }, nodes);
    let cached = LearningConfig {
        cache_threshold: 1e-2,
        ..exact.clone()
    };
    let b0 = BeliefState::new(vec![0.9]);
    let a = run_discrete_learning(&model, &[0.5, 0.5], 0, 9, &b0, &exact).unwrap();
    let b = run_discrete_learning(&model, &[0.5, 0.5], 0, 9, &b0, &cached).unwrap();
    assert_eq!(a.solves, 200);
    assert!(b.solves < a.solves / 2, "{} solves", b.solves);
    assert_eq!(a.z, b.z);
    let worst = a.prices.iter().zip(&b.prices).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 0.05, "{worst}");
}

#[test]
fn var_forecasts_need_least_squares() {
    let model = common::two_by_two(2, false);
    let mut config = level_config(5, LearningRule::DecreasingGain { t0: 1.0 }, vec![0.0, 1.0]);
    config.forecast = Forecast::Var;
    let b0 = BeliefState::new(vec![0.0, 0.0]);
    assert!(run_discrete_learning(&model, &[0.5, 0.5], 0, 1, &b0, &config).is_err());
    config.rule = LearningRule::RecursiveLeastSquares { regularization: 1e-6 };
    config.nodes = (0..11).map(|k| 0.15 * k as f64).collect();
    let path = run_discrete_learning(&model, &[0.5, 0.5], 0, 1, &b0, &config).unwrap();
    assert!(path.thetas.iter().flatten().all(|v| v.is_finite()));
}
