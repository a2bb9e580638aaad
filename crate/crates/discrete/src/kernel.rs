//! Perceived price kernels `T̂_p`.
//!
//! A kernel lives on a finite set of price nodes and gives, for the current
//! aggregate state and price node, a joint distribution over the next
//! aggregate state and price node. The degenerate and VAR kernels draw `z′`
//! from the true `T_z`, independently of the price; the finite kernel can
//! encode any joint law, which is what the induced rational kernel needs.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{check_len, check_stochastic, Error, Result};

/// `(z′, node′, probability)`.
pub type Transition = (usize, usize, f64);

#[derive(Debug, Clone, PartialEq)]
pub enum PerceivedPriceKernel {
    /// Prices are expected to stay where they are.
    Degenerate { nodes: Vec<f64> },
    /// Explicit joint kernel; row `z·n + j` is a distribution over
    /// `z′·n + j′`.
    Finite { nodes: Vec<f64>, matrix: Vec<Vec<f64>> },
    /// `p′ ~ N(c + a·p, σ²)` discretized on sorted `nodes` by Tauchen's
    /// method; `σ = 0` splits the mean between the two bracketing nodes.
    Var {
        nodes: Vec<f64>,
        intercept: f64,
        slope: f64,
        sigma: f64,
    },
}

impl PerceivedPriceKernel {
    pub fn nodes(&self) -> &[f64] {
        match self {
            PerceivedPriceKernel::Degenerate { nodes }
            | PerceivedPriceKernel::Finite { nodes, .. }
            | PerceivedPriceKernel::Var { nodes, .. } => nodes,
        }
    }

    pub fn validate(&self, tz: &[Vec<f64>]) -> Result<()> {
        let nodes = self.nodes();
        if nodes.is_empty() || nodes.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("kernel.nodes", "need at least one finite price node"));
        }
        match self {
            PerceivedPriceKernel::Degenerate { .. } => {}
            PerceivedPriceKernel::Finite { matrix, .. } => {
                let n = nodes.len() * tz.len();
                check_len("kernel rows", n, matrix.len())?;
                for (r, row) in matrix.iter().enumerate() {
                    check_len("kernel row", n, row.len())?;
                    check_stochastic("perceived kernel", r, row)?;
                }
            }
            PerceivedPriceKernel::Var {
                intercept,
                slope,
                sigma,
                ..
            } => {
                if nodes.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid("kernel.nodes", "VAR nodes must be increasing"));
                }
                if !(intercept.is_finite() && slope.is_finite()) {
                    return Err(Error::invalid("kernel.theta", "must be finite"));
                }
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::invalid("kernel.sigma", "must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Next-period distribution from price node `j` at aggregate state `z`.
    pub fn transitions(&self, tz: &[Vec<f64>], z: usize, j: usize) -> Vec<Transition> {
        match self {
            PerceivedPriceKernel::Degenerate { .. } => independent(tz, z, &[(j, 1.0)]),
            PerceivedPriceKernel::Finite { nodes, matrix } => {
                let n = nodes.len();
                matrix[z * n + j]
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(c, p)| (c / n, c % n, *p))
                    .collect()
            }
            PerceivedPriceKernel::Var { nodes, .. } => self.transitions_at(tz, z, nodes[j]).expect("node price"),
        }
    }

    /// Next-period distribution from an arbitrary current price. Degenerate
    /// and finite kernels need `p` to be one of their nodes (the finite
    /// kernel interpolates rows linearly between sorted nodes).
    pub fn transitions_at(&self, tz: &[Vec<f64>], z: usize, p: f64) -> Result<Vec<Transition>> {
        let nodes = self.nodes();
        let exact = nodes.iter().position(|q| (q - p).abs() <= 1e-12 * q.abs().max(1.0));
        match self {
            PerceivedPriceKernel::Degenerate { .. } => {
                let j = exact.ok_or(Error::OffGrid { price: p })?;
                Ok(independent(tz, z, &[(j, 1.0)]))
            }
            PerceivedPriceKernel::Finite { .. } => {
                if let Some(j) = exact {
                    return Ok(self.transitions(tz, z, j));
                }
                let sorted = nodes.windows(2).all(|w| w[0] < w[1]);
                if !sorted || p < nodes[0] || p > nodes[nodes.len() - 1] {
                    return Err(Error::OffGrid { price: p });
                }
                let (j, w) = bracket(nodes, p);
                let mut out = self.transitions(tz, z, j);
                for t in &mut out {
                    t.2 *= 1.0 - w;
                }
                out.extend(self.transitions(tz, z, j + 1).into_iter().map(|(a, b, q)| (a, b, q * w)));
                Ok(out)
            }
            PerceivedPriceKernel::Var {
                intercept,
                slope,
                sigma,
                ..
            } => {
                let mean = intercept + slope * p;
                Ok(independent(tz, z, &tauchen_row(nodes, mean, *sigma)))
            }
        }
    }
}

fn independent(tz: &[Vec<f64>], z: usize, prices: &[(usize, f64)]) -> Vec<Transition> {
    let mut out = Vec::with_capacity(tz.len() * prices.len());
    for (z2, pz) in tz[z].iter().enumerate() {
        if *pz == 0.0 {
            continue;
        }
        for (j, pp) in prices {
            out.push((z2, *j, pz * pp));
        }
    }
    out
}

/// Index `j` and weight `w` with `p = (1−w)·nodes[j] + w·nodes[j+1]`,
/// clamped to the ends.
fn bracket(nodes: &[f64], p: f64) -> (usize, f64) {
    let n = nodes.len();
    if n == 1 {
        return (0, 0.0);
    }
    let j = nodes.partition_point(|q| *q <= p).clamp(1, n - 1) - 1;
    let w = ((p - nodes[j]) / (nodes[j + 1] - nodes[j])).clamp(0.0, 1.0);
    (j, w)
}

/// Probabilities of `N(mean, σ²)` on sorted `nodes`, with cell boundaries
/// at the midpoints and the tails lumped into the end nodes.
pub fn tauchen_row(nodes: &[f64], mean: f64, sigma: f64) -> Vec<(usize, f64)> {
    let n = nodes.len();
    if n == 1 {
        return vec![(0, 1.0)];
    }
    if sigma == 0.0 {
        let (j, w) = bracket(nodes, mean);
        return [(j, 1.0 - w), (j + 1, w)]
            .into_iter()
            .filter(|(_, q)| *q > 0.0)
            .collect();
    }
    let normal = Normal::new(mean, sigma).expect("positive sd");
    let mut out = Vec::with_capacity(n);
    let mut below = 0.0;
    for j in 0..n {
        let upper = if j + 1 < n {
            normal.cdf(0.5 * (nodes[j] + nodes[j + 1]))
        } else {
            1.0
        };
        let q = (upper - below).max(0.0);
        if q > 0.0 {
            out.push((j, q));
        }
        below = upper;
    }
    out
}

/// `n` price nodes at evenly spaced empirical quantiles of `samples`.
/// Duplicate quantiles are spread by `spread` so the grid stays strictly
/// increasing.
pub fn quantile_nodes(samples: &[f64], n: usize, spread: f64) -> Result<Vec<f64>> {
    if samples.is_empty() || n == 0 {
        return Err(Error::invalid("kernel.nodes", "need samples and at least one node"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    if n == 1 {
        return Ok(vec![s[s.len() / 2]]);
    }
    let mut out: Vec<f64> = (0..n)
        .map(|k| {
            let pos = k as f64 / (n - 1) as f64 * (s.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(s.len() - 1);
            s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
        })
        .collect();
    for k in 1..n {
        if out[k] <= out[k - 1] {
            out[k] = out[k - 1] + spread.max(f64::EPSILON * out[k - 1].abs().max(1.0));
        }
    }
    Ok(out)
}
