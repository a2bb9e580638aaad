mod common;

use mfgl_discrete::*;

const M0: [f64; 2] = [0.35, 0.65];

/// Gap between the oracle value at the start and the Bellman value under
/// the event tree the oracle's own equilibrium generates.
fn tree_gap(model: &DiscreteModel, resolution: usize) -> f64 {
    let sol = master_oracle(model, &OracleOptions::new(resolution)).unwrap();
    let mut gap: f64 = 0.0;
    for z0 in 0..model.n_z {
        let tree = induced_tree_kernel(model, &sol, &M0, z0, 200).unwrap();
        assert_eq!(tree.states.len(), 1 + 2 + 4 + 8);
        let bell = bellman_backward(model, &tree.kernel, TieBreak::LowestIndex).unwrap();
        for x in 0..model.n_x {
            let oracle = sol.value_at(0, x, z0, &M0).unwrap();
            gap = gap.max((oracle - bell.value(0, x, z0, tree.root)).abs());
        }
    }
    gap
}

#[test]
fn oracle_matches_bellman_on_the_induced_tree() {
    let model = common::two_by_two(3, false);
    let gap = tree_gap(&model, 101);
    assert!(gap < 1e-3, "gap {gap:e}");
}

#[test]
fn linear_rewards_make_the_oracle_exact() {
    let model = common::two_by_two(3, true);
    assert!(model.is_linear());
    let gap = tree_gap(&model, 11);
    assert!(gap < 1e-12, "gap {gap:e}");
}

#[test]
fn within_date_equilibrium_is_a_best_response() {
    let model = common::two_by_two(3, false);
    let sol = master_oracle(&model, &OracleOptions::new(21)).unwrap();
    for t in 0..3 {
        for z in 0..2 {
            let eq = sol.equilibrium_at(&model, t, z, &M0, 200).unwrap();
            assert!(eq.pure);
            let next = model.push_forward(&M0, z, &eq.policy);
            assert!(next.iter().zip(&eq.next).all(|(a, b)| (a - b).abs() < 1e-15));
            for x in 0..2 {
                let best = eq.q[x].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let chosen: f64 = eq.policy[x].iter().zip(&eq.q[x]).map(|(p, q)| p * q).sum();
                assert!((best - chosen).abs() < 1e-12);
            }
        }
    }
    assert_eq!(sol.cycled.is_empty(), sol.warnings.is_empty());
}

#[test]
fn mrp_one_period_by_hand() {
    let mut mrp = common::mrp(1, false);
    mrp.n_z = 1;
    mrp.tz = vec![vec![1.0]];
    mrp.a.truncate(1);
    mrp.price_map.intercept.truncate(1);
    mrp.price_map.loadings.truncate(1);
    for r in mrp.reward.iter_mut().chain(mrp.terminal.iter_mut()) {
        r.truncate(1);
    }
    // m0 = (0.5, 0.5): p0 = 1 + 2·0.5 = 2, m1 = (0.55, 0.45), p1 = 1.9.
    // From x = 0: r = 2 + 3·4 = 14; g(1.9) = 1.9 + 3.61 = 5.51 at x = 0 and
    // -1.9 + 0.5·3.61 = -0.095 at x = 1.
    let expected = 14.0 + 0.95 * (0.7 * 5.51 + 0.3 * -0.095);
    let v = mrp_value_bruteforce(&mrp, 0, 0, &[0.5, 0.5]).unwrap();
    assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
    let sol = master_oracle(&mrp.to_model(), &OracleOptions::new(101)).unwrap();
    assert!((sol.value_at(0, 0, 0, &[0.5, 0.5]).unwrap() - expected).abs() < 1e-3);
}

fn mrp_gap(mrp: &MarkovRewardProcess, resolution: usize) -> f64 {
    let sol = master_oracle(&mrp.to_model(), &OracleOptions::new(resolution)).unwrap();
    let mut gap: f64 = 0.0;
    for m0 in [[0.5, 0.5], [0.13, 0.87], [1.0, 0.0]] {
        for x in 0..2 {
            for z in 0..2 {
                let exact = mrp_value_bruteforce(mrp, x, z, &m0).unwrap();
                gap = gap.max((sol.value_at(0, x, z, &m0).unwrap() - exact).abs());
            }
        }
    }
    gap
}

#[test]
fn linear_mrp_oracle_is_exact() {
    let mrp = common::mrp(6, true);
    let gap = mrp_gap(&mrp, 11);
    assert!(gap < 1e-12, "gap {gap:e}");
}

#[test]
fn quadratic_mrp_oracle_is_second_order() {
    let mrp = common::mrp(6, false);
    let coarse = mrp_gap(&mrp, 101);
    let fine = mrp_gap(&mrp, 201);
    let ratio = coarse / fine;
    assert!(coarse > 0.0 && (3.0..5.0).contains(&ratio), "{coarse:e} {fine:e} ratio {ratio}");
}

#[test]
fn monte_carlo_brackets_the_enumeration() {
    let mrp = common::mrp(6, false);
    let exact = mrp_value_bruteforce(&mrp, 1, 0, &M0).unwrap();
    let est = mrp_value_monte_carlo(&mrp, 1, 0, &M0, 20_000, 11).unwrap();
    assert!((est.mean - exact).abs() < 3.0 * est.std_error, "{est:?} vs {exact}");
    let again = mrp_value_monte_carlo(&mrp, 1, 0, &M0, 20_000, 11).unwrap();
    assert_eq!(est, again);
}

#[test]
fn long_horizons_exceed_the_enumeration_budget() {
    let mrp = common::mrp(25, false);
    assert!(matches!(mrp_value_bruteforce(&mrp, 0, 0, &M0), Err(Error::Budget { .. })));
    assert!(mrp_value_monte_carlo(&mrp, 0, 0, &M0, 100, 1).is_ok());
}

#[test]
fn crowding_game_falls_back_to_damped_mixing() {
    // Action a sends the agent to state a; being in state 1 pays 1 - 2·(share in 1).
    let go = |to: usize| {
        let mut row = vec![0.0; 2];
        row[to] = 1.0;
        vec![row.clone(), row]
    };
    let model = DiscreteModel {
        n_x: 2,
        n_act: 2,
        n_z: 1,
        tz: vec![vec![1.0]],
        tx: vec![vec![go(0), go(1)]],
        reward: vec![vec![vec![Quadratic::constant(0.0); 2]]; 2],
        terminal: vec![vec![Quadratic::constant(0.0)], vec![Quadratic::new(1.0, -2.0, 0.0)]],
        discount: 1.0,
        price_map: PriceMap {
            intercept: vec![0.0],
            loadings: vec![vec![0.0, 1.0]],
        },
        horizon: 1,
    };
    let sol = master_oracle(&model, &OracleOptions::new(11)).unwrap();
    assert_eq!(sol.cycled.len(), sol.lattice.len());
    assert!(!sol.warnings.is_empty());
    let eq = sol.equilibrium_at(&model, 0, 0, &M0, 200).unwrap();
    assert!(!eq.pure);
    assert!((eq.next[1] - 0.5).abs() < 0.02, "{:?}", eq.next);
}
