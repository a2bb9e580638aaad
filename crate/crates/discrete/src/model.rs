//! Finite-state model data: kernels, rewards, the price map and histograms.
//!
//! Prices are scalar. Rewards and terminal values are quadratic in the
//! price; the price map is affine in the histogram. Individual transition
//! kernels depend on the state, the aggregate state and the action but not
//! on the price.

use crate::error::{check_len, check_stochastic, Error, Result};

/// `c0 + c1·p + c2·p²`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quadratic {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Quadratic {
    pub fn new(c0: f64, c1: f64, c2: f64) -> Self {
        Quadratic { c0, c1, c2 }
    }

    pub fn constant(c0: f64) -> Self {
        Quadratic::new(c0, 0.0, 0.0)
    }

    pub fn eval(&self, p: f64) -> f64 {
        self.c0 + p * (self.c1 + p * self.c2)
    }

    pub fn is_affine(&self) -> bool {
        self.c2 == 0.0
    }
}

/// `P*(m, z) = intercept[z] + Σ_x loadings[z][x]·m(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceMap {
    pub intercept: Vec<f64>,
    pub loadings: Vec<Vec<f64>>,
}

impl PriceMap {
    pub fn eval(&self, m: &[f64], z: usize) -> f64 {
        self.intercept[z]
            + self.loadings[z]
                .iter()
                .zip(m)
                .map(|(b, q)| b * q)
                .sum::<f64>()
    }

    fn validate(&self, n_x: usize, n_z: usize) -> Result<()> {
        check_len("price intercepts", n_z, self.intercept.len())?;
        check_len("price loadings", n_z, self.loadings.len())?;
        for row in &self.loadings {
            check_len("price loadings row", n_x, row.len())?;
        }
        if self
            .intercept
            .iter()
            .chain(self.loadings.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("discrete.price_map", "coefficients must be finite"));
        }
        Ok(())
    }
}

/// Probability vector over the individual states.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram(Vec<f64>);

impl Histogram {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        check_stochastic("histogram", 0, &p)?;
        Ok(Histogram(p))
    }

    pub fn uniform(n: usize) -> Self {
        Histogram(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, x: usize) -> Self {
        let mut v = vec![0.0; n];
        v[x] = 1.0;
        Histogram(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn from_vec_unchecked(v: Vec<f64>) -> Self {
        Histogram(v)
    }
}

/// Finite-state, finite-action model with aggregate state `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub n_x: usize,
    pub n_act: usize,
    pub n_z: usize,
    /// `tz[z][z′]`.
    pub tz: Vec<Vec<f64>>,
    /// `tx[z][a][x][x′]`.
    pub tx: Vec<Vec<Vec<Vec<f64>>>>,
    /// `reward[x][z][a]`, a function of the price.
    pub reward: Vec<Vec<Vec<Quadratic>>>,
    /// `terminal[x][z]`.
    pub terminal: Vec<Vec<Quadratic>>,
    /// Per-period discount factor in `(0, 1]`.
    pub discount: f64,
    pub price_map: PriceMap,
    pub horizon: usize,
}

impl DiscreteModel {
    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 || self.n_act == 0 || self.n_z == 0 {
            return Err(Error::invalid("discrete", "state, action and aggregate sets must be nonempty"));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::invalid("discrete.discount", "must lie in (0, 1]"));
        }
        check_len("tz", self.n_z, self.tz.len())?;
        for (z, row) in self.tz.iter().enumerate() {
            check_len("tz row", self.n_z, row.len())?;
            check_stochastic("tz", z, row)?;
        }
        check_len("tx", self.n_z, self.tx.len())?;
        for per_z in &self.tx {
            check_len("tx actions", self.n_act, per_z.len())?;
            for mat in per_z {
                check_len("tx rows", self.n_x, mat.len())?;
                for (x, row) in mat.iter().enumerate() {
                    check_len("tx row", self.n_x, row.len())?;
                    check_stochastic("tx", x, row)?;
                }
            }
        }
        check_len("reward", self.n_x, self.reward.len())?;
        for per_x in &self.reward {
            check_len("reward aggregate states", self.n_z, per_x.len())?;
            for per_z in per_x {
                check_len("reward actions", self.n_act, per_z.len())?;
            }
        }
        check_len("terminal", self.n_x, self.terminal.len())?;
        for per_x in &self.terminal {
            check_len("terminal aggregate states", self.n_z, per_x.len())?;
        }
        self.price_map.validate(self.n_x, self.n_z)
    }

    pub fn price(&self, m: &[f64], z: usize) -> f64 {
        self.price_map.eval(m, z)
    }

    pub fn reward(&self, x: usize, z: usize, a: usize, p: f64) -> f64 {
        self.reward[x][z][a].eval(p)
    }

    pub fn terminal_value(&self, x: usize, z: usize, p: f64) -> f64 {
        self.terminal[x][z].eval(p)
    }

    /// Transition matrix `A_{π,z}` of the individual state under the
    /// stochastic policy `policy[x][a]`.
    pub fn induced_matrix(&self, z: usize, policy: &[Vec<f64>]) -> Vec<Vec<f64>> {
        (0..self.n_x)
            .map(|x| {
                let mut row = vec![0.0; self.n_x];
                for (a, pa) in policy[x].iter().enumerate() {
                    if *pa == 0.0 {
                        continue;
                    }
                    for (r, t) in row.iter_mut().zip(&self.tx[z][a][x]) {
                        *r += pa * t;
                    }
                }
                row
            })
            .collect()
    }

    /// `A_{π,z}ᵀ m`.
    pub fn push_forward(&self, m: &[f64], z: usize, policy: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_x];
        for (x, mx) in m.iter().enumerate() {
            if *mx == 0.0 {
                continue;
            }
            for (a, pa) in policy[x].iter().enumerate() {
                let w = mx * pa;
                if w == 0.0 {
                    continue;
                }
                for (o, t) in out.iter_mut().zip(&self.tx[z][a][x]) {
                    *o += w * t;
                }
            }
        }
        out
    }

    /// Whether values are affine in the measure: rewards and terminal values
    /// are affine in the price, the price slope is shared across actions,
    /// and transitions do not depend on the action.
    pub fn is_linear(&self) -> bool {
        let terminal_affine = self.terminal.iter().flatten().all(Quadratic::is_affine);
        let reward_affine = self.reward.iter().flatten().all(|per_a| {
            per_a.iter().all(Quadratic::is_affine) && per_a.iter().all(|q| q.c1 == per_a[0].c1)
        });
        let passive = self.tx.iter().all(|per_a| per_a.iter().all(|m| m == &per_a[0]));
        terminal_affine && reward_affine && passive
    }
}

/// One step of the Chapman-Kolmogorov equation under `policy[x][a]` at
/// aggregate state `z`.
pub fn chapman_step(
    m: &Histogram,
    policy: &[Vec<f64>],
    z: usize,
    model: &DiscreteModel,
) -> Result<Histogram> {
    check_len("histogram", model.n_x, m.len())?;
    check_len("policy", model.n_x, policy.len())?;
    if z >= model.n_z {
        return Err(Error::invalid("z", format!("aggregate state {z} out of range")));
    }
    for (x, row) in policy.iter().enumerate() {
        check_len("policy row", model.n_act, row.len())?;
        check_stochastic("policy", x, row)?;
    }
    Ok(Histogram::from_vec_unchecked(model.push_forward(m.as_slice(), z, policy)))
}

/// Pure policy as a probability table.
pub fn pure_policy(actions: &[usize], n_act: usize) -> Vec<Vec<f64>> {
    actions
        .iter()
        .map(|&a| {
            let mut row = vec![0.0; n_act];
            row[a] = 1.0;
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_state() -> DiscreteModel {
        DiscreteModel {
            n_x: 2,
            n_act: 2,
            n_z: 1,
            tz: vec![vec![1.0]],
            tx: vec![vec![
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            ]],
            reward: vec![
                vec![vec![Quadratic::constant(0.0), Quadratic::constant(1.0)]],
                vec![vec![Quadratic::constant(0.5), Quadratic::constant(0.0)]],
            ],
            terminal: vec![vec![Quadratic::default()], vec![Quadratic::default()]],
            discount: 0.9,
            price_map: PriceMap {
                intercept: vec![1.0],
                loadings: vec![vec![0.0, 1.0]],
            },
            horizon: 2,
        }
    }

    #[test]
    fn swap_action_moves_point_mass() {
        let model = two_state();
        let m = Histogram::point_mass(2, 0);
        let next = chapman_step(&m, &pure_policy(&[1, 1], 2), 0, &model).unwrap();
        assert_eq!(next.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn doubly_stochastic_keeps_uniform() {
        let model = two_state();
        // Mixing identity and swap with equal weights is doubly stochastic.
        let pol = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let next = chapman_step(&Histogram::uniform(2), &pol, 0, &model).unwrap();
        assert_eq!(next.as_slice(), &[0.5, 0.5]);
        let skew = vec![vec![0.3, 0.7], vec![0.6, 0.4]];
        let next = chapman_step(&Histogram::uniform(2), &skew, 0, &model).unwrap();
        assert!((next.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validation_catches_bad_rows() {
        let mut model = two_state();
        model.tx[0][0][1] = vec![0.5, 0.6];
        assert!(matches!(model.validate(), Err(Error::NotStochastic { .. })));
        let mut model = two_state();
        model.discount = 0.0;
        assert!(model.validate().is_err());
    }

    #[test]
    fn price_map_is_affine() {
        let model = two_state();
        assert_eq!(model.price(&[0.25, 0.75], 0), 1.75);
    }
}
