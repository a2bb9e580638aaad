#![allow(dead_code)]

use mfgl_discrete::{DiscreteModel, MarkovRewardProcess, PriceMap, Quadratic};

/// Two states, two actions, two aggregate states. Action 0 tends to keep
/// the agent in place, action 1 moves it. With `linear` the price enters
/// every reward with the same slope and both actions share transitions.
pub fn two_by_two(horizon: usize, linear: bool) -> DiscreteModel {
    let stay = vec![vec![0.8, 0.2], vec![0.3, 0.7]];
    let move_ = vec![vec![0.25, 0.75], vec![0.65, 0.35]];
    let (a1z0, a1z1) = if linear {
        (stay.clone(), vec![vec![0.6, 0.4], vec![0.1, 0.9]])
    } else {
        (move_.clone(), vec![vec![0.4, 0.6], vec![0.9, 0.1]])
    };
    let tx = if linear {
        vec![vec![stay.clone(), a1z0], vec![a1z1.clone(), a1z1]]
    } else {
        vec![vec![stay.clone(), a1z0], vec![vec![vec![0.7, 0.3], vec![0.2, 0.8]], a1z1]]
    };
    let q = |c0: f64, c1: f64, c2: f64| {
        if linear {
            Quadratic::new(c0, 1.0, 0.0)
        } else {
            Quadratic::new(c0, c1, c2)
        }
    };
    DiscreteModel {
        n_x: 2,
        n_act: 2,
        n_z: 2,
        tz: vec![vec![0.7, 0.3], vec![0.4, 0.6]],
        tx,
        reward: vec![
            vec![
                vec![q(0.0, 1.0, -0.5), q(0.1, -0.5, 0.0)],
                vec![q(0.2, 0.8, -0.3), q(-0.1, 0.0, 0.4)],
            ],
            vec![
                vec![q(0.3, -1.0, 0.2), q(0.0, 0.5, 0.5)],
                vec![q(-0.2, 1.2, 0.0), q(0.4, -0.2, -0.6)],
            ],
        ],
        terminal: vec![
            vec![q(0.0, 1.0, 0.5), q(0.1, 0.0, -0.4)],
            vec![q(0.5, -0.5, 0.3), q(0.0, 0.3, 0.2)],
        ],
        discount: 0.9,
        price_map: PriceMap {
            intercept: vec![0.5, 1.0],
            loadings: vec![vec![0.0, 1.0], vec![0.4, -0.6]],
        },
        horizon,
    }
}

pub fn mrp(horizon: usize, linear: bool) -> MarkovRewardProcess {
    let q = |c0: f64, c1: f64, c2: f64| {
        if linear {
            Quadratic::new(c0, c1, 0.0)
        } else {
            Quadratic::new(c0, c1, c2)
        }
    };
    MarkovRewardProcess {
        n_x: 2,
        n_z: 2,
        tz: vec![vec![0.6, 0.4], vec![0.3, 0.7]],
        a: vec![
            vec![vec![0.7, 0.3], vec![0.4, 0.6]],
            vec![vec![0.2, 0.8], vec![0.9, 0.1]],
        ],
        price_map: PriceMap {
            intercept: vec![1.0, 0.5],
            loadings: vec![vec![0.0, 2.0], vec![1.0, -0.5]],
        },
        reward: vec![
            vec![q(0.0, 1.0, 3.0), q(0.5, -1.0, 2.0)],
            vec![q(1.0, 0.5, -1.5), q(0.0, 2.0, 1.0)],
        ],
        terminal: vec![vec![q(0.0, 1.0, 1.0), q(0.2, 0.0, 2.0)], vec![q(0.0, -1.0, 0.5), q(1.0, 0.5, 0.0)]],
        discount: 0.95,
        horizon,
    }
}
