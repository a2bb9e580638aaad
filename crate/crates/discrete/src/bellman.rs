//! Backward induction for the finite Bellman equation in `(x, z, p)` under a
//! perceived price kernel.

use crate::error::{Error, Result};
use crate::kernel::{PerceivedPriceKernel, Transition};
use crate::model::DiscreteModel;

/// How to break ties in the argmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Deterministic policy on the lowest optimal action index.
    #[default]
    LowestIndex,
    /// Uniform over the set of optimal actions.
    Uniform,
}

/// Relative width of the argmax set.
const TIE_TOLERANCE: f64 = 1e-12;

/// Policy row for action values `q`.
pub fn greedy(q: &[f64], ties: TieBreak) -> Vec<f64> {
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = best - TIE_TOLERANCE * best.abs().max(1.0);
    let mut row = vec![0.0; q.len()];
    match ties {
        TieBreak::LowestIndex => {
            let a = q.iter().position(|v| *v >= cut).expect("nonempty action set");
            row[a] = 1.0;
        }
        TieBreak::Uniform => {
            let n = q.iter().filter(|v| **v >= cut).count() as f64;
            for (r, v) in row.iter_mut().zip(q) {
                if *v >= cut {
                    *r = 1.0 / n;
                }
            }
        }
    }
    row
}

/// Value and policy tables over `(t, x, z, node)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BellmanSolution {
    pub nodes: Vec<f64>,
    pub n_x: usize,
    pub n_z: usize,
    /// `values[t][(x·n_z + z)·n_p + j]`, `t = 0..=T`.
    pub values: Vec<Vec<f64>>,
    /// `policy[t][(x·n_z + z)·n_p + j]` is a distribution over actions,
    /// `t < T`.
    pub policy: Vec<Vec<Vec<f64>>>,
}

impl BellmanSolution {
    fn flat(&self, x: usize, z: usize, j: usize) -> usize {
        (x * self.n_z + z) * self.nodes.len() + j
    }

    pub fn value(&self, t: usize, x: usize, z: usize, j: usize) -> f64 {
        self.values[t][self.flat(x, z, j)]
    }

    pub fn policy(&self, t: usize, x: usize, z: usize, j: usize) -> &[f64] {
        &self.policy[t][self.flat(x, z, j)]
    }

    /// Optimal policy at date `t < T` for an arbitrary current price, using
    /// the stored values at `t + 1`.
    pub fn decide(
        &self,
        model: &DiscreteModel,
        kernel: &PerceivedPriceKernel,
        t: usize,
        z: usize,
        p: f64,
        ties: TieBreak,
    ) -> Result<Vec<Vec<f64>>> {
        if t >= model.horizon {
            return Err(Error::invalid("t", format!("no decision at the horizon {t}")));
        }
        let row = kernel.transitions_at(&model.tz, z, p)?;
        Ok((0..model.n_x)
            .map(|x| greedy(&q_values(model, &self.values[t + 1], self.nodes.len(), &row, x, z, p), ties))
            .collect())
    }
}

/// `R(x,z,a,p) + γ Σ_{x′} T_x(x′|x,z,a) Σ_{(z′,j′)} K·U_{t+1}(x′,z′,j′)`.
fn q_values(
    model: &DiscreteModel,
    next: &[f64],
    n_p: usize,
    row: &[Transition],
    x: usize,
    z: usize,
    p: f64,
) -> Vec<f64> {
    // Expected continuation per next individual state.
    let cont: Vec<f64> = (0..model.n_x)
        .map(|x2| {
            row.iter()
                .map(|&(z2, j2, q)| q * next[(x2 * model.n_z + z2) * n_p + j2])
                .sum()
        })
        .collect();
    (0..model.n_act)
        .map(|a| {
            let ev: f64 = model.tx[z][a][x].iter().zip(&cont).map(|(t, c)| t * c).sum();
            model.reward(x, z, a, p) + model.discount * ev
        })
        .collect()
}

/// Exact backward induction from the terminal date.
pub fn bellman_backward(
    model: &DiscreteModel,
    kernel: &PerceivedPriceKernel,
    ties: TieBreak,
) -> Result<BellmanSolution> {
    model.validate()?;
    kernel.validate(&model.tz)?;
    let nodes = kernel.nodes().to_vec();
    let n_p = nodes.len();
    let (n_x, n_z, horizon) = (model.n_x, model.n_z, model.horizon);
    let size = n_x * n_z * n_p;
    let mut values = vec![Vec::new(); horizon + 1];
    let mut policy = vec![Vec::new(); horizon];
    let mut terminal = vec![0.0; size];
    for x in 0..n_x {
        for z in 0..n_z {
            for (j, p) in nodes.iter().enumerate() {
                terminal[(x * n_z + z) * n_p + j] = model.terminal_value(x, z, *p);
            }
        }
    }
    values[horizon] = terminal;
    let rows: Vec<Vec<Transition>> = (0..n_z)
        .flat_map(|z| (0..n_p).map(move |j| (z, j)))
        .map(|(z, j)| kernel.transitions(&model.tz, z, j))
        .collect();
    for t in (0..horizon).rev() {
        let mut u = vec![0.0; size];
        let mut pol = vec![Vec::new(); size];
        for x in 0..n_x {
            for z in 0..n_z {
                for (j, p) in nodes.iter().enumerate() {
                    let q = q_values(model, &values[t + 1], n_p, &rows[z * n_p + j], x, z, *p);
                    let k = (x * n_z + z) * n_p + j;
                    u[k] = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    pol[k] = greedy(&q, ties);
                }
            }
        }
        values[t] = u;
        policy[t] = pol;
    }
    Ok(BellmanSolution {
        nodes,
        n_x,
        n_z,
        values,
        policy,
    })
}
