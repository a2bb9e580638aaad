use crate::error::{Error, Result};

use super::params::IncomeProcess;

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let h = (hi - lo) / (n - 1) as f64;
            let mut v: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
            v[n - 1] = hi;
            v
        }
    }
}

fn check_increasing(key: &str, nodes: &[f64]) -> Result<()> {
    if nodes.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(key, "nodes must be finite"));
    }
    if nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(key, "nodes must be strictly increasing"));
    }
    Ok(())
}

fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let left = if i > 0 { nodes[i] - nodes[i - 1] } else { 0.0 };
            let right = if i + 1 < n { nodes[i + 1] - nodes[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Tensor grid over (wealth × income), stored wealth-major: node
/// `k = i · n_income + j` for wealth index `i` and income index `j`.
///
/// Optional aggregate axes (productivity `z`, price coordinates, belief
/// parameters) ride along for the augmented solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid {
    wealth: Vec<f64>,
    income: Vec<f64>,
    wealth_weights: Vec<f64>,
    income_weights: Vec<f64>,
    z_nodes: Option<Vec<f64>>,
    price_nodes: Vec<Vec<f64>>,
    theta_nodes: Vec<Vec<f64>>,
}

impl StateGrid {
    /// `income_discrete` selects counting measure on the income axis
    /// (Markov-chain income) instead of trapezoidal weights.
    pub fn new(wealth: Vec<f64>, income: Vec<f64>, income_discrete: bool) -> Result<Self> {
        if wealth.len() < 3 {
            return Err(Error::invalid("grid.wealth", "need at least 3 wealth nodes"));
        }
        if wealth[0] != 0.0 {
            return Err(Error::invalid(
                "grid.wealth",
                "first wealth node must be 0 (borrowing constraint)",
            ));
        }
        check_increasing("grid.wealth", &wealth)?;
        if income.is_empty() {
            return Err(Error::invalid("grid.income", "need at least one income node"));
        }
        check_increasing("grid.income", &income)?;
        let wealth_weights = trapezoid_weights(&wealth);
        let income_weights = if income_discrete {
            vec![1.0; income.len()]
        } else {
            trapezoid_weights(&income)
        };
        Ok(StateGrid {
            wealth,
            income,
            wealth_weights,
            income_weights,
            z_nodes: None,
            price_nodes: Vec::new(),
            theta_nodes: Vec::new(),
        })
    }

    /// Uniform wealth grid on `[0, a_max]` with the income nodes implied by
    /// the income process.
    pub fn uniform(a_max: f64, n_wealth: usize, income: &IncomeProcess) -> Result<Self> {
        if !(a_max > 0.0 && a_max.is_finite()) {
            return Err(Error::invalid("grid.a_max", "must be finite and > 0"));
        }
        income.validate()?;
        let wealth = linspace(0.0, a_max, n_wealth);
        let (nodes, discrete) = match *income {
            IncomeProcess::TwoState { y_lo, y_hi, .. } => (vec![y_lo, y_hi], true),
            IncomeProcess::OuDiffusion {
                lower,
                upper,
                n_nodes,
                ..
            } => (linspace(lower, upper, n_nodes), false),
        };
        StateGrid::new(wealth, nodes, discrete)
    }

    pub fn with_z_nodes(mut self, nodes: Vec<f64>) -> Result<Self> {
        check_increasing("grid.z_nodes", &nodes)?;
        self.z_nodes = Some(nodes);
        Ok(self)
    }

    pub fn with_price_nodes(mut self, axes: Vec<Vec<f64>>) -> Result<Self> {
        for axis in &axes {
            if axis.len() < 2 {
                return Err(Error::invalid("grid.p_nodes", "need at least 2 nodes per axis"));
            }
            check_increasing("grid.p_nodes", axis)?;
        }
        self.price_nodes = axes;
        Ok(self)
    }

    pub fn with_theta_nodes(mut self, axes: Vec<Vec<f64>>) -> Result<Self> {
        for axis in &axes {
            check_increasing("grid.theta_nodes", axis)?;
        }
        self.theta_nodes = axes;
        Ok(self)
    }

    pub fn wealth(&self) -> &[f64] {
        &self.wealth
    }

    pub fn income(&self) -> &[f64] {
        &self.income
    }

    pub fn z_nodes(&self) -> Option<&[f64]> {
        self.z_nodes.as_deref()
    }

    pub fn price_nodes(&self) -> &[Vec<f64>] {
        &self.price_nodes
    }

    pub fn theta_nodes(&self) -> &[Vec<f64>] {
        &self.theta_nodes
    }

    pub fn n_wealth(&self) -> usize {
        self.wealth.len()
    }

    pub fn n_income(&self) -> usize {
        self.income.len()
    }

    /// Number of individual-state nodes.
    pub fn len(&self) -> usize {
        self.wealth.len() * self.income.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i_wealth: usize, j_income: usize) -> usize {
        i_wealth * self.income.len() + j_income
    }

    #[inline]
    pub fn split(&self, k: usize) -> (usize, usize) {
        (k / self.income.len(), k % self.income.len())
    }

    pub fn a_max(&self) -> f64 {
        *self.wealth.last().unwrap()
    }

    /// Quadrature weight of node `k`.
    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        let (i, j) = self.split(k);
        self.wealth_weights[i] * self.income_weights[j]
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.weight(k)).collect()
    }

    /// Wealth spacing below and above node `i` (zero outside the grid).
    #[inline]
    pub fn wealth_steps(&self, i: usize) -> (f64, f64) {
        let below = if i > 0 {
            self.wealth[i] - self.wealth[i - 1]
        } else {
            0.0
        };
        let above = if i + 1 < self.wealth.len() {
            self.wealth[i + 1] - self.wealth[i]
        } else {
            0.0
        };
        (below, above)
    }

    /// Same grid with the wealth axis replaced.
    pub fn with_wealth(&self, wealth: Vec<f64>) -> Result<Self> {
        let discrete = self.income_weights.iter().all(|&w| w == 1.0);
        let mut g = StateGrid::new(wealth, self.income.clone(), discrete)?;
        g.z_nodes = self.z_nodes.clone();
        g.price_nodes = self.price_nodes.clone();
        g.theta_nodes = self.theta_nodes.clone();
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> IncomeProcess {
        IncomeProcess::TwoState {
            y_lo: 0.5,
            y_hi: 1.5,
            rate_up: 0.25,
            rate_down: 0.25,
        }
    }

    #[test]
    fn uniform_grid_layout() {
        let g = StateGrid::uniform(10.0, 11, &two_state()).unwrap();
        assert_eq!(g.len(), 22);
        assert_eq!(g.index(3, 1), 7);
        assert_eq!(g.split(7), (3, 1));
        assert_eq!(g.wealth()[0], 0.0);
        assert_eq!(g.a_max(), 10.0);
        // Trapezoid on wealth, counting on income: total weight = a_max * 2.
        let total: f64 = g.weights().iter().sum();
        assert!((total - 20.0).abs() < 1e-12);
        assert_eq!(g.weight(0), 0.5);
        assert_eq!(g.weight(2), 1.0);
    }

    #[test]
    fn rejects_bad_wealth_nodes() {
        assert!(StateGrid::new(vec![0.1, 1.0, 2.0], vec![1.0], true).is_err());
        assert!(StateGrid::new(vec![0.0, 2.0, 1.0], vec![1.0], true).is_err());
        assert!(StateGrid::new(vec![0.0, 1.0], vec![1.0], true).is_err());
    }

    #[test]
    fn ou_grid_uses_trapezoid_on_income() {
        let inc = IncomeProcess::OuDiffusion {
            mean_reversion: 0.5,
            long_run_mean: 1.0,
            intensity: 0.01,
            lower: 0.5,
            upper: 1.5,
            n_nodes: 5,
        };
        let g = StateGrid::uniform(4.0, 5, &inc).unwrap();
        let total: f64 = g.weights().iter().sum();
        assert!((total - 4.0).abs() < 1e-12);
    }
}
