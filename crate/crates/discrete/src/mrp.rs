//! Markov reward processes: the single-action special case, with an exact
//! enumeration over aggregate histories and a Monte Carlo estimator.
//!
//! The value is `E[Σ_{t<T} γ^t r(x_t, z_t, p_t) + γ^T g(x_T, z_T, p_T)]` with
//! `p_t = P(m_t, z_t)` and `m_{t+1} = A_{z_t}ᵀ m_t`.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, check_stochastic, Error, Result};
use crate::model::{DiscreteModel, PriceMap, Quadratic};

/// Largest number of aggregate histories the enumeration will visit.
pub const PATH_BUDGET: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovRewardProcess {
    pub n_x: usize,
    pub n_z: usize,
    pub tz: Vec<Vec<f64>>,
    /// `a[z][x][x′]`.
    pub a: Vec<Vec<Vec<f64>>>,
    pub price_map: PriceMap,
    /// `reward[x][z]`.
    pub reward: Vec<Vec<Quadratic>>,
    pub terminal: Vec<Vec<Quadratic>>,
    pub discount: f64,
    pub horizon: usize,
}

impl MarkovRewardProcess {
    /// The same process as a one-action model, which the master oracle
    /// accepts directly.
    pub fn to_model(&self) -> DiscreteModel {
        DiscreteModel {
            n_x: self.n_x,
            n_act: 1,
            n_z: self.n_z,
            tz: self.tz.clone(),
            tx: self.a.iter().map(|m| vec![m.clone()]).collect(),
            reward: self
                .reward
                .iter()
                .map(|per_x| per_x.iter().map(|r| vec![*r]).collect())
                .collect(),
            terminal: self.terminal.clone(),
            discount: self.discount,
            price_map: self.price_map.clone(),
            horizon: self.horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.to_model().validate()
    }

    fn step(&self, m: &[f64], z: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_x];
        for (x, mx) in m.iter().enumerate() {
            for (o, t) in out.iter_mut().zip(&self.a[z][x]) {
                *o += mx * t;
            }
        }
        out
    }

    fn check_start(&self, x0: usize, z0: usize, m0: &[f64]) -> Result<()> {
        self.validate()?;
        check_len("histogram", self.n_x, m0.len())?;
        check_stochastic("histogram", 0, m0)?;
        if x0 >= self.n_x || z0 >= self.n_z {
            return Err(Error::invalid("mrp.start", "state out of range"));
        }
        Ok(())
    }
}

/// Exact value by enumerating every aggregate history; the individual
/// state is integrated out along each history.
pub fn mrp_value_bruteforce(mrp: &MarkovRewardProcess, x0: usize, z0: usize, m0: &[f64]) -> Result<f64> {
    mrp.check_start(x0, z0, m0)?;
    let paths = (mrp.n_z as f64).powi(mrp.horizon as i32);
    if paths > PATH_BUDGET {
        return Err(Error::Budget {
            paths,
            limit: PATH_BUDGET,
        });
    }
    let mut q = vec![0.0; mrp.n_x];
    q[x0] = 1.0;
    Ok(descend(mrp, 0, z0, m0, &q))
}

/// Value from date `t` onward given the aggregate state and the individual
/// distribution `q`, discounted to date `t`.
fn descend(mrp: &MarkovRewardProcess, t: usize, z: usize, m: &[f64], q: &[f64]) -> f64 {
    let p = mrp.price_map.eval(m, z);
    if t == mrp.horizon {
        return q.iter().enumerate().map(|(x, w)| w * mrp.terminal[x][z].eval(p)).sum();
    }
    let now: f64 = q.iter().enumerate().map(|(x, w)| w * mrp.reward[x][z].eval(p)).sum();
    let m2 = mrp.step(m, z);
    let q2 = mrp.step(q, z);
    let later: f64 = mrp.tz[z]
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(z2, w)| w * descend(mrp, t + 1, z2, &m2, &q2))
        .sum();
    now + mrp.discount * later
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
}

/// Sample mean of the discounted reward over simulated `(x, z)` paths.
pub fn mrp_value_monte_carlo(
    mrp: &MarkovRewardProcess,
    x0: usize,
    z0: usize,
    m0: &[f64],
    paths: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    mrp.check_start(x0, z0, m0)?;
    if paths < 2 {
        return Err(Error::invalid("mrp.paths", "need at least two paths"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z_draw: Vec<WeightedIndex<f64>> = mrp
        .tz
        .iter()
        .map(|row| WeightedIndex::new(row).expect("validated row"))
        .collect();
    let x_draw: Vec<Vec<WeightedIndex<f64>>> = mrp
        .a
        .iter()
        .map(|mat| mat.iter().map(|row| WeightedIndex::new(row).expect("validated row")).collect())
        .collect();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..paths {
        let (mut x, mut z) = (x0, z0);
        let mut m = m0.to_vec();
        let mut disc = 1.0;
        let mut total = 0.0;
        for _ in 0..mrp.horizon {
            let p = mrp.price_map.eval(&m, z);
            total += disc * mrp.reward[x][z].eval(p);
            m = mrp.step(&m, z);
            x = x_draw[z][x].sample(&mut rng);
            z = z_draw[z].sample(&mut rng);
            disc *= mrp.discount;
        }
        total += disc * mrp.terminal[x][z].eval(mrp.price_map.eval(&m, z));
        sum += total;
        sum_sq += total * total;
    }
    let n = paths as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / n).sqrt(),
        paths,
    })
}
