//! Rational-expectations oracle: backward induction for the value function
//! on `(x, z, m)` with `m` on a simplex lattice.
//!
//! Within each date the population policy and the next measure are found
//! jointly at every lattice node. Best responses are iterated from the
//! response to the uniform policy; a pure profile that reproduces itself is
//! accepted. If the pure iteration revisits a profile it switches to damped
//! (fictitious-play) averaging of mixed policies and the node is flagged.

use crate::bellman::{greedy, TieBreak};
use crate::error::{Error, Result};
use crate::kernel::PerceivedPriceKernel;
use crate::model::DiscreteModel;
use crate::simplex::SimplexLattice;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    /// Lattice nodes per simplex edge (at least 11).
    pub resolution: usize,
    /// When set, a coarser companion solve estimates the interpolation
    /// error and a warning is recorded if the estimate exceeds it.
    pub tolerance: Option<f64>,
    pub max_iter: usize,
}

impl OracleOptions {
    pub fn new(resolution: usize) -> Self {
        OracleOptions {
            resolution,
            tolerance: None,
            max_iter: 200,
        }
    }
}

/// Joint policy and next measure at one `(t, z, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WithinDate {
    /// `policy[x][a]`.
    pub policy: Vec<Vec<f64>>,
    /// Action values `q[x][a]` against the final next measure.
    pub q: Vec<Vec<f64>>,
    pub next: Vec<f64>,
    pub iterations: usize,
    /// False when pure best responses cycled and damping was used.
    pub pure: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterSolution {
    pub lattice: SimplexLattice,
    pub n_x: usize,
    pub n_z: usize,
    /// `values[t][(x·n_z + z)·n_nodes + node]`, `t = 0..=T`.
    pub values: Vec<Vec<f64>>,
    /// `policy[t][z·n_nodes + node][x]` over actions, `t < T`.
    pub policy: Vec<Vec<Vec<Vec<f64>>>>,
    /// `(t, z, node)` where the pure best-response iteration cycled.
    pub cycled: Vec<(usize, usize, usize)>,
    pub warnings: Vec<String>,
    /// Estimated sup-norm interpolation error, when requested.
    pub error_estimate: Option<f64>,
}

impl MasterSolution {
    fn slice(&self, t: usize, x: usize, z: usize) -> &[f64] {
        let n = self.lattice.len();
        let k = x * self.n_z + z;
        &self.values[t][k * n..(k + 1) * n]
    }

    /// Interpolated `U_t(x, z, m)`.
    pub fn value_at(&self, t: usize, x: usize, z: usize, m: &[f64]) -> Result<f64> {
        self.lattice.interpolate(self.slice(t, x, z), m)
    }

    /// Within-date equilibrium at an arbitrary measure, against the stored
    /// values at `t + 1`.
    pub fn equilibrium_at(
        &self,
        model: &DiscreteModel,
        t: usize,
        z: usize,
        m: &[f64],
        max_iter: usize,
    ) -> Result<WithinDate> {
        if t >= model.horizon {
            return Err(Error::invalid("t", "no decision at the horizon"));
        }
        within_date(model, &self.lattice, &self.values[t + 1], z, m, max_iter)
    }
}

/// `R + γ·E[U_{t+1}(x′, z′, m′)]` for every `(x, a)`.
fn action_values(
    model: &DiscreteModel,
    lattice: &SimplexLattice,
    next: &[f64],
    z: usize,
    p: f64,
    m_next: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = lattice.len();
    let stencil = lattice.stencil(m_next)?;
    let cont: Vec<f64> = (0..model.n_x)
        .map(|x2| {
            model.tz[z]
                .iter()
                .enumerate()
                .filter(|(_, q)| **q > 0.0)
                .map(|(z2, q)| {
                    let base = (x2 * model.n_z + z2) * n;
                    q * stencil.iter().map(|(i, w)| w * next[base + i]).sum::<f64>()
                })
                .sum()
        })
        .collect();
    Ok((0..model.n_x)
        .map(|x| {
            (0..model.n_act)
                .map(|a| {
                    let ev: f64 = model.tx[z][a][x].iter().zip(&cont).map(|(t, c)| t * c).sum();
                    model.reward(x, z, a, p) + model.discount * ev
                })
                .collect()
        })
        .collect())
}

fn within_date(
    model: &DiscreteModel,
    lattice: &SimplexLattice,
    next: &[f64],
    z: usize,
    m: &[f64],
    max_iter: usize,
) -> Result<WithinDate> {
    let p = model.price(m, z);
    let respond = |policy: &[Vec<f64>]| -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>)> {
        let m_next = model.push_forward(m, z, policy);
        let q = action_values(model, lattice, next, z, p, &m_next)?;
        let br = q.iter().map(|row| greedy(row, TieBreak::LowestIndex)).collect();
        Ok((br, q, m_next))
    };
    let uniform = vec![vec![1.0 / model.n_act as f64; model.n_act]; model.n_x];
    let (mut policy, _, _) = respond(&uniform)?;
    let mut seen = vec![policy.clone()];
    for k in 0..max_iter {
        let (br, q, m_next) = respond(&policy)?;
        if br == policy {
            return Ok(WithinDate {
                policy,
                q,
                next: m_next,
                iterations: k + 1,
                pure: true,
            });
        }
        if seen.contains(&br) {
            break;
        }
        seen.push(br.clone());
        policy = br;
    }
    // Damped averaging of best responses.
    let mut last = None;
    for k in 0..max_iter {
        let (br, q, m_next) = respond(&policy)?;
        let lambda = 1.0 / (k as f64 + 2.0);
        for (row, b) in policy.iter_mut().zip(&br) {
            for (v, t) in row.iter_mut().zip(b) {
                *v += lambda * (t - *v);
            }
        }
        last = Some((q, m_next));
    }
    let (q, next_m) = last.expect("max_iter > 0");
    Ok(WithinDate {
        policy,
        q,
        next: next_m,
        iterations: 2 * max_iter,
        pure: false,
    })
}

fn solve_on(model: &DiscreteModel, lattice: SimplexLattice, max_iter: usize) -> Result<MasterSolution> {
    let (n_x, n_z, horizon) = (model.n_x, model.n_z, model.horizon);
    let n = lattice.len();
    let nodes: Vec<Vec<f64>> = (0..n).map(|i| lattice.node(i)).collect();
    let mut values = vec![Vec::new(); horizon + 1];
    let mut policy = vec![Vec::new(); horizon];
    let mut cycled = Vec::new();
    let mut terminal = vec![0.0; n_x * n_z * n];
    for x in 0..n_x {
        for z in 0..n_z {
            for (i, m) in nodes.iter().enumerate() {
                terminal[(x * n_z + z) * n + i] = model.terminal_value(x, z, model.price(m, z));
            }
        }
    }
    values[horizon] = terminal;
    for t in (0..horizon).rev() {
        let mut u = vec![0.0; n_x * n_z * n];
        let mut pol = vec![Vec::new(); n_z * n];
        for z in 0..n_z {
            for (i, m) in nodes.iter().enumerate() {
                let eq = within_date(model, &lattice, &values[t + 1], z, m, max_iter)?;
                if !eq.pure {
                    cycled.push((t, z, i));
                }
                for x in 0..n_x {
                    u[(x * n_z + z) * n + i] = eq.q[x].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                }
                pol[z * n + i] = eq.policy;
            }
        }
        values[t] = u;
        policy[t] = pol;
    }
    let mut warnings = Vec::new();
    if !cycled.is_empty() {
        warnings.push(format!(
            "within-date best responses cycled at {} (t, z, m) nodes; damped mixed policies used there",
            cycled.len()
        ));
    }
    Ok(MasterSolution {
        lattice,
        n_x,
        n_z,
        values,
        policy,
        cycled,
        warnings,
        error_estimate: None,
    })
}

/// Value over `(t, x, z, m)` by backward induction on the simplex lattice.
pub fn master_oracle(model: &DiscreteModel, options: &OracleOptions) -> Result<MasterSolution> {
    model.validate()?;
    if model.n_x > 3 {
        return Err(Error::invalid("master.n_x", "the oracle handles at most 3 individual states"));
    }
    if options.resolution < 11 {
        return Err(Error::invalid("master.resolution", "need at least 11 nodes per edge"));
    }
    if options.max_iter == 0 {
        return Err(Error::invalid("master.max_iter", "must be >= 1"));
    }
    let lattice = SimplexLattice::new(model.n_x, options.resolution)?;
    let mut sol = solve_on(model, lattice.clone(), options.max_iter)?;
    if let Some(tol) = options.tolerance {
        // Halving the resolution quadruples a second-order error, so the
        // fine error is about a third of the fine-coarse gap.
        let coarse_res = (options.resolution - 1) / 2 + 1;
        let coarse = solve_on(model, SimplexLattice::new(model.n_x, coarse_res)?, options.max_iter)?;
        let mut gap: f64 = 0.0;
        for i in 0..coarse.lattice.len() {
            let m = coarse.lattice.node(i);
            for x in 0..model.n_x {
                for z in 0..model.n_z {
                    let a = sol.value_at(0, x, z, &m)?;
                    let b = coarse.value_at(0, x, z, &m)?;
                    gap = gap.max((a - b).abs());
                }
            }
        }
        let estimate = gap / 3.0;
        sol.error_estimate = Some(estimate);
        if estimate > tol {
            sol.warnings.push(format!(
                "simplex resolution {} too coarse: estimated interpolation error {estimate:e} exceeds {tol:e}",
                options.resolution
            ));
        }
    }
    Ok(sol)
}

/// Event tree of the oracle's equilibrium from `(m0, z0)`, as a finite
/// perceived kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedTree {
    pub kernel: PerceivedPriceKernel,
    /// Node of the initial state.
    pub root: usize,
    /// `(t, z, m)` per node.
    pub states: Vec<(usize, usize, Vec<f64>)>,
}

/// Builds the kernel whose nodes are the dates and aggregate histories of
/// the equilibrium, so that the Bellman solver sees exactly the prices the
/// oracle's population generates. Nodes at the horizon loop on themselves.
pub fn induced_tree_kernel(
    model: &DiscreteModel,
    solution: &MasterSolution,
    m0: &[f64],
    z0: usize,
    max_iter: usize,
) -> Result<InducedTree> {
    let n_z = model.n_z;
    let mut states = vec![(0usize, z0, m0.to_vec())];
    // children[node] = (z′, child node, probability)
    let mut children: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new()];
    let mut frontier = vec![0usize];
    for t in 0..model.horizon {
        let mut next_frontier = Vec::new();
        for node in frontier {
            let (_, z, m) = states[node].clone();
            let eq = solution.equilibrium_at(model, t, z, &m, max_iter)?;
            for (z2, q) in model.tz[z].iter().enumerate() {
                if *q == 0.0 {
                    continue;
                }
                let child = states.len();
                states.push((t + 1, z2, eq.next.clone()));
                children.push(Vec::new());
                children[node].push((z2, child, *q));
                next_frontier.push(child);
            }
        }
        frontier = next_frontier;
    }
    let n = states.len();
    let nodes: Vec<f64> = states.iter().map(|(_, z, m)| model.price(m, *z)).collect();
    let mut matrix = vec![vec![0.0; n_z * n]; n_z * n];
    for z in 0..n_z {
        for j in 0..n {
            let row = &mut matrix[z * n + j];
            if children[j].is_empty() || states[j].1 != z {
                // Unreachable pairings and leaves: stay put.
                row[z * n + j] = 1.0;
            } else {
                for &(z2, c, q) in &children[j] {
                    row[z2 * n + c] += q;
                }
            }
        }
    }
    Ok(InducedTree {
        kernel: PerceivedPriceKernel::Finite { nodes, matrix },
        root: 0,
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PriceMap, Quadratic};

    fn tiny(horizon: usize) -> DiscreteModel {
        DiscreteModel {
            n_x: 2,
            n_act: 2,
            n_z: 1,
            tz: vec![vec![1.0]],
            tx: vec![vec![
                vec![vec![0.9, 0.1], vec![0.2, 0.8]],
                vec![vec![0.4, 0.6], vec![0.7, 0.3]],
            ]],
            reward: vec![
                vec![vec![Quadratic::new(0.0, 1.0, 0.0), Quadratic::new(0.2, 0.0, 0.0)]],
                vec![vec![Quadratic::new(0.1, 0.0, 0.0), Quadratic::new(0.0, 0.5, 0.0)]],
            ],
            terminal: vec![vec![Quadratic::new(0.0, 1.0, 0.0)], vec![Quadratic::new(0.0, 0.0, 1.0)]],
            discount: 0.95,
            price_map: PriceMap {
                intercept: vec![0.5],
                loadings: vec![vec![0.0, 1.0]],
            },
            horizon,
        }
    }

    #[test]
    fn zero_horizon_is_terminal_at_nodes() {
        let model = tiny(0);
        let sol = master_oracle(&model, &OracleOptions::new(11)).unwrap();
        for i in 0..sol.lattice.len() {
            let m = sol.lattice.node(i);
            let p = model.price(&m, 0);
            assert_eq!(sol.value_at(0, 1, 0, &m).unwrap(), p * p);
        }
    }

    #[test]
    fn coarse_resolution_is_rejected() {
        assert!(master_oracle(&tiny(1), &OracleOptions::new(5)).is_err());
    }

    #[test]
    fn error_estimate_is_reported() {
        let mut opts = OracleOptions::new(11);
        opts.tolerance = Some(1e-14);
        let sol = master_oracle(&tiny(2), &opts).unwrap();
        assert!(sol.error_estimate.unwrap() > 0.0);
        assert!(sol.warnings.iter().any(|w| w.contains("too coarse")));
    }
}
