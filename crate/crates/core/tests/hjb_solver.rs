mod common;

use mfgl_core::hjb::*;
use mfgl_core::{ModelParams, PriceVector, StateGrid};
use proptest::prelude::*;

fn resources(grid: &StateGrid, p: PriceVector, k: usize) -> f64 {
    let (i, j) = grid.split(k);
    p.resources(grid.wealth()[i], grid.income()[j])
}

/// Policy consuming `frac[k]·resources` (capped at resources on the
/// borrowing limit).
fn policy_from_fractions(grid: &StateGrid, p: PriceVector, frac: &[f64]) -> PolicyField {
    let c = (0..grid.len())
        .map(|k| {
            let (i, _) = grid.split(k);
            let f = if i == 0 { frac[k].min(1.0) } else { frac[k] };
            f * resources(grid, p, k)
        })
        .collect();
    PolicyField::from_consumption(c, p, grid)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const P: PriceVector = PriceVector {
    rate: 0.04,
    wage: 1.1,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn generator_adjoint_identity(
        frac in prop::collection::vec(0.2f64..1.8, 400),
        u in prop::collection::vec(-10.0f64..10.0, 400),
        m in prop::collection::vec(0.0f64..1.0, 400),
        nu in 0.0f64..0.05,
    ) {
        let (grid, mut params) = common::default_setup(200);
        params.nu = nu;
        let policy = policy_from_fractions(&grid, P, &frac);
        let op = build_generator(&policy, &grid, &params).unwrap();
        let lhs = dot(&op.apply(&u), &m);
        let rhs = dot(&u, &op.apply_transpose(&m));
        let scale = op.apply(&u).iter().zip(&m).map(|(a, b)| (a * b).abs()).sum::<f64>();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300));
    }

    #[test]
    fn generator_rows_and_signs(
        frac in prop::collection::vec(0.2f64..1.8, 80),
        nu in 0.0f64..0.5,
    ) {
        let params = ModelParams { nu, ..ModelParams::default_calibration() };
        let grid = StateGrid::uniform(10.0, 40, &params.income).unwrap();
        let policy = policy_from_fractions(&grid, P, &frac);
        let op = build_generator(&policy, &grid, &params).unwrap();
        let scale: f64 = op.matrix.triplets().map(|t| t.2.abs()).fold(1.0, f64::max);
        prop_assert!(op.max_row_sum() <= 1e-14 * scale);
        prop_assert!(op.min_off_diagonal() >= 0.0);
    }

    #[test]
    fn hamiltonian_dominates_sampled_consumption(
        wealth in 0.0f64..20.0,
        income in 0.3f64..2.0,
        lambda in 0.05f64..20.0,
        rate in 0.0f64..0.1,
        wage in 0.2f64..2.0,
        crra in 0.5f64..4.0,
    ) {
        let p = PriceVector { rate, wage };
        let h = hamiltonian(wealth, income, lambda, p, crra).unwrap();
        let res = p.resources(wealth, income);
        let c_star = optimal_consumption(lambda, crra).unwrap();
        for s in 1..=100 {
            let c = c_star * (s as f64) / 50.0;
            let alt = utility(c, crra) + lambda * (res - c);
            prop_assert!(h >= alt - 1e-12 * alt.abs().max(1.0));
        }
    }

    #[test]
    fn backward_step_is_monotone_in_continuation(
        bumps in prop::collection::vec(0.0f64..0.5, 80),
        shift in 0.0f64..1.0,
    ) {
        let params = ModelParams::default_calibration();
        let grid = StateGrid::uniform(10.0, 40, &params.income).unwrap();
        let (u, _, _) = solve_stationary_hjb(P, &grid, &params, &HjbConfig::default()).unwrap();
        let a = ValueField::new(u.values.clone(), 1.0);
        let b = ValueField::new(
            u.values.iter().zip(&bumps).map(|(v, d)| v - shift - d).collect(),
            1.0,
        );
        let (ua, _) = hjb_backward_step(&a, P, 0.5, &grid, &params, None).unwrap();
        let (ub, _) = hjb_backward_step(&b, P, 0.5, &grid, &params, None).unwrap();
        for (x, y) in ua.values.iter().zip(&ub.values) {
            prop_assert!(x >= &(y - 1e-12));
        }
    }
}

#[test]
fn perceived_drift_shift_moves_the_stencil_upwind() {
    let (grid, params) = common::default_setup(50);
    let frac = vec![0.9; grid.len()];
    let policy = policy_from_fractions(&grid, P, &frac);
    let shifted = build_perceived_generator(
        &|k, _| policy.drift[k] + 0.1,
        &|_, _| params.nu,
        &policy,
        &grid,
        &params,
    )
    .unwrap();
    let ny = grid.n_income();
    let h = grid.wealth()[1] - grid.wealth()[0];
    for k in 0..grid.len() - ny {
        let s = policy.drift[k] + 0.1;
        assert!(s > 0.0);
        assert!((shifted.matrix.get(k, k + ny) - s / h).abs() < 1e-12);
    }
    // Pure transport: rows still sum to zero.
    let transport =
        build_perceived_generator(&|k, _| policy.drift[k], &|_, _| 0.0, &policy, &grid, &params)
            .unwrap();
    assert!(transport.max_row_sum() < 1e-13);
}

#[test]
fn negative_perceived_diffusion_is_a_domain_error() {
    let (grid, params) = common::default_setup(20);
    let policy = policy_from_fractions(&grid, P, &vec![1.0; grid.len()]);
    let err = build_perceived_generator(&|_, _| 0.0, &|_, _| -1.0, &policy, &grid, &params);
    assert!(matches!(err, Err(mfgl_core::Error::Domain(_))));
}

#[test]
fn stationary_solution_residual_and_shape() {
    let (grid, params) = common::default_setup(200);
    let (u, policy, op) = solve_stationary_hjb(P, &grid, &params, &HjbConfig::default()).unwrap();
    let res = stationary_residual(&u.values, P, &grid, &params).unwrap();
    let worst = res.iter().map(|r| r.abs()).fold(0.0, f64::max);
    assert!(worst < 1e-8, "residual {worst}");
    let (mono, conc) = u.shape_violations(&grid);
    assert!(mono <= 1e-8 && conc <= 1e-8);
    assert!(op.max_row_sum() < 1e-12);
    assert!(policy.consumption.iter().all(|c| *c > 0.0));
    // Borrowing limit respected.
    for j in 0..grid.n_income() {
        assert!(policy.drift[grid.index(0, j)] >= 0.0);
    }
    // The top node never saves beyond the grid.
    let top = grid.n_wealth() - 1;
    for j in 0..grid.n_income() {
        let k = grid.index(top, j);
        assert!(policy.consumption[k] >= resources(&grid, P, k) - 1e-12);
    }
}

#[test]
fn refinement_converges_at_first_order() {
    // Nested grids: every node of the coarse grid is a node of the finer ones.
    let params = ModelParams::default_calibration();
    let solve = |n: usize| {
        let grid = StateGrid::uniform(50.0, n, &params.income).unwrap();
        solve_stationary_hjb(P, &grid, &params, &HjbConfig::default())
            .unwrap()
            .0
            .values
    };
    let (u1, u2, u4) = (solve(51), solve(101), solve(201));
    let ny = 2;
    let mut d12: f64 = 0.0;
    let mut d24: f64 = 0.0;
    // Compare on the lower half of wealth, away from the artificial top.
    for i in 0..26 {
        for j in 0..ny {
            let a = u1[i * ny + j];
            let b = u2[2 * i * ny + j];
            let c = u4[4 * i * ny + j];
            d12 = d12.max((a - b).abs());
            d24 = d24.max((b - c).abs());
        }
    }
    let ratio = d24 / d12;
    assert!(ratio > 0.3 && ratio < 0.75, "ratio {ratio} ({d12:e}, {d24:e})");
    // O(Δa) in absolute terms at the coarsest spacing of 1.
    assert!(d12 < 1.0);
}

#[test]
fn constant_prices_turnpike() {
    let (grid, params) = common::default_setup(100);
    let (stat, _, _) = solve_stationary_hjb(P, &grid, &params, &HjbConfig::default()).unwrap();
    // Horizon 50/ρ with an unrelated terminal value.
    let steps = (50.0 / params.rho / params.dt) as usize;
    let terminal = ValueField::new(vec![0.0; grid.len()], steps as f64);
    let (values, policies) = solve_hjb_path(&vec![P; steps], &terminal, params.dt, &grid, &params).unwrap();
    assert_eq!(values.len(), steps + 1);
    assert_eq!(policies.len(), steps);
    assert!(values[0].sup_distance(&stat) < 1e-6);
}

#[test]
fn single_step_path_matches_backward_step() {
    let (grid, params) = common::default_setup(60);
    let (u, _, _) = solve_stationary_hjb(P, &grid, &params, &HjbConfig::default()).unwrap();
    let terminal = ValueField::new(u.values.iter().map(|v| v - 3.0).collect(), 1.0);
    let (values, policies) = solve_hjb_path(&[P], &terminal, 1.0, &grid, &params).unwrap();
    let (step, pol) = hjb_backward_step(&terminal, P, 1.0, &grid, &params, None).unwrap();
    assert_eq!(values[0], step);
    assert_eq!(policies[0], pol);
}

#[test]
fn terminal_shifts_decay_at_the_discount_rate() {
    let (grid, params) = common::default_setup(80);
    let (u, _, _) = solve_stationary_hjb(P, &grid, &params, &HjbConfig::default()).unwrap();
    let va = ValueField::new(u.values.clone(), 40.0);
    // A uniform shift leaves the policy unchanged, so the gap is discounted exactly.
    let vb = ValueField::new(u.values.iter().map(|v| v - 2.0).collect(), 40.0);
    let path = vec![P; 40];
    let (a, _) = solve_hjb_path(&path, &va, params.dt, &grid, &params).unwrap();
    let (b, _) = solve_hjb_path(&path, &vb, params.dt, &grid, &params).unwrap();
    for s in 0..=40 {
        let bound = (1.0 + params.rho * params.dt).powi(-((40 - s) as i32)) * 2.0;
        let d = a[s].sup_distance(&b[s]);
        assert!((d - bound).abs() <= 1e-10 * bound, "{s}: {d} vs {bound}");
    }
}

#[test]
fn nonuniform_terminal_gaps_fade() {
    let (grid, params) = common::default_setup(80);
    let (u, _, _) = solve_stationary_hjb(P, &grid, &params, &HjbConfig::default()).unwrap();
    let va = ValueField::new(u.values.clone(), 400.0);
    let vb = ValueField::new(
        u.values
            .iter()
            .enumerate()
            .map(|(k, v)| v - 2.0 - 0.5 * ((k % 7) as f64 / 7.0))
            .collect(),
        400.0,
    );
    let gap = va.sup_distance(&vb);
    let steps = 400;
    let (a, _) = solve_hjb_path(&vec![P; steps], &va, params.dt, &grid, &params).unwrap();
    let (b, _) = solve_hjb_path(&vec![P; steps], &vb, params.dt, &grid, &params).unwrap();
    // The linearised step reuses the continuation's policy, so the gap need
    // not shrink every step; over a long horizon it must.
    let d0 = a[0].sup_distance(&b[0]);
    assert!(d0 < 0.5 * gap, "{d0} vs {gap}");
}
