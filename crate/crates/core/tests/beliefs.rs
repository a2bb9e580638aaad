use mfgl_core::beliefs::*;
use mfgl_core::{PriceVector, Technology};
use proptest::prelude::*;

fn run_level(rule: LearningRule, theta0: f64, obs: impl Fn(f64) -> f64, dt: f64, steps: usize) -> Vec<f64> {
    let mut b = BeliefState::new(vec![theta0]);
    let mut out = vec![theta0];
    for n in 0..steps {
        b = update_beliefs(&rule, None, &b, &[obs(n as f64 * dt)], 0.0, dt).unwrap();
        out.push(b.theta[0]);
    }
    out
}

#[test]
fn decreasing_gain_tracks_half_of_a_ramp() {
    // θ' = (t − θ)/(t + t0) integrates to θ = (t²/2 + t0·θ0)/(t + t0).
    let (t0, theta0, dt) = (1.0, 0.3, 1e-3);
    let path = run_level(LearningRule::DecreasingGain { t0 }, theta0, |t| t, dt, 20_000);
    for (n, th) in path.iter().enumerate().step_by(1000) {
        let t = n as f64 * dt;
        let exact = (0.5 * t * t + t0 * theta0) / (t + t0);
        assert!((th - exact).abs() < 2e-3, "t = {t}: {th} vs {exact}");
    }
    let t = 20.0;
    assert!((path[20_000] / (t / 2.0) - 1.0).abs() < 0.06);
}

#[test]
fn constant_gain_matches_its_closed_form() {
    let (gain, pbar, theta0, dt) = (0.5, 0.04, 0.06, 1e-3);
    let path = run_level(LearningRule::ConstantGain { gain }, theta0, |_| pbar, dt, 10_000);
    for (n, th) in path.iter().enumerate() {
        let t = n as f64 * dt;
        let cont = pbar + (theta0 - pbar) * (-gain * t).exp();
        let disc = pbar + (theta0 - pbar) * (1.0 - gain * dt).powi(n as i32);
        assert!((th - disc).abs() < 1e-14);
        assert!((th - cont).abs() < 1e-3 * (theta0 - pbar).abs());
    }
}

#[test]
fn decreasing_gain_halves_the_gap_when_time_doubles() {
    let (pbar, dt) = (0.045, 0.01);
    let path = run_level(LearningRule::DecreasingGain { t0: 1.0 }, 0.06, |_| pbar, dt, 40_000);
    for t in [10usize, 25, 50, 100, 200] {
        let n = (t as f64 / dt) as usize;
        let ratio = (path[2 * n] - pbar).abs() / (path[n] - pbar).abs();
        assert!(ratio <= 0.75, "t = {t}: {ratio}");
    }
}

#[test]
fn rk4_is_fourth_order() {
    let lin = PlmFamily::Linear { with_z: false };
    let err = |steps: usize| {
        let dt = 2.0 / steps as f64;
        let (p, _) = integrate_plm(lin, &[1.0], 0.0, &[0.0, -1.0], steps, dt, &PriceBox::unbounded(1)).unwrap();
        (p[steps][0] - (-2.0f64).exp()).abs()
    };
    let (e1, e2) = (err(20), err(40));
    assert!(e2 < 1e-7);
    let order = (e1 / e2).log2();
    assert!((order - 4.0).abs() < 0.2, "order {order}");
}

#[test]
fn perfect_foresight_returns_the_supplied_tail() {
    let path: Vec<PriceVector> = (0..=10)
        .map(|n| PriceVector { rate: 0.03 + 0.001 * n as f64, wage: 1.0 + 0.01 * n as f64 })
        .collect();
    let tech = Technology::new(0.18);
    let ctx = ForecastContext { step: 4, steps: 10, dt: 1.0, z: 0.0, chart: PriceChart::Independent, tech: &tech };
    let out = predict_price_path(&Predictor::PerfectForesight(path.clone()), path[4], &[], &ctx).unwrap();
    assert_eq!(out.prices, path[4..].to_vec());
    assert!(!out.clipped);
}

#[test]
fn frontier_chart_round_trips() {
    let tech = Technology::new(0.18);
    let p = tech.prices(3.9, 1.0, 0.2).unwrap();
    let coords = PriceChart::RateFrontier.to_coords(p);
    let back = PriceChart::RateFrontier.to_prices(&coords, 0.2, &tech).unwrap();
    assert!((back.wage - p.wage).abs() < 1e-12 * p.wage);
}

proptest! {
    #[test]
    fn consistent_parameters_make_prices_rest_points(
        p in prop::collection::vec(0.01f64..2.0, 1..3),
        speed in 0.0f64..2.0,
        with_z in any::<bool>(),
    ) {
        for family in [PlmFamily::Linear { with_z }, PlmFamily::Anchored { speed, z_loading: 0.3 }] {
            let theta = family.consistent_theta(&p);
            let d = plm_drift(family, &p, 0.0, &theta).unwrap();
            prop_assert!(d.iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn level_updates_never_overshoot(
        theta in -1.0f64..1.0,
        obs in -1.0f64..1.0,
        gain in 0.01f64..1.0,
        dt in 0.01f64..1.0,
    ) {
        let b = BeliefState::new(vec![theta]);
        let next = update_beliefs(&LearningRule::ConstantGain { gain }, None, &b, &[obs], 0.0, dt).unwrap();
        prop_assert!((next.theta[0] - obs).abs() <= (theta - obs).abs() + 1e-15);
        let frozen = update_beliefs(&LearningRule::Frozen, None, &b, &[obs], 0.0, dt).unwrap();
        prop_assert_eq!(frozen.theta[0], theta);
    }
}
