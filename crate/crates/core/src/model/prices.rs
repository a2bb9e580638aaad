use crate::error::{Error, Result};

use super::density::Density;
use super::grid::StateGrid;
use super::params::ModelParams;

/// Interest rate and wage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceVector {
    pub rate: f64,
    pub wage: f64,
}

impl PriceVector {
    pub const DIM: usize = 2;

    pub fn new(rate: f64, wage: f64) -> Result<Self> {
        let p = PriceVector { rate, wage };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.wage.is_finite()) {
            return Err(Error::Domain(format!("non-finite prices {self:?}")));
        }
        if self.wage <= 0.0 {
            return Err(Error::Domain(format!("wage must be positive, got {}", self.wage)));
        }
        Ok(())
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.rate, self.wage]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        PriceVector {
            rate: v[0],
            wage: v[1],
        }
    }

    pub fn sub(self, other: PriceVector) -> PriceVector {
        PriceVector {
            rate: self.rate - other.rate,
            wage: self.wage - other.wage,
        }
    }

    pub fn sup_norm(self) -> f64 {
        self.rate.abs().max(self.wage.abs())
    }

    /// Income flow `r·a + w·y` at wealth `a` and income `y`.
    #[inline]
    pub fn resources(&self, wealth: f64, income: f64) -> f64 {
        self.rate * wealth + self.wage * income
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Production {
    pub output: f64,
    pub marginal_k: f64,
    pub marginal_l: f64,
}

/// `F(K, L, z) = A·e^z·√(KL)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Technology {
    pub scale: f64,
}

impl Technology {
    pub fn new(scale: f64) -> Self {
        Technology { scale }
    }

    pub fn evaluate(&self, k: f64, l: f64, z: f64) -> Result<Production> {
        if !(k > 0.0 && k.is_finite()) || !(l > 0.0 && l.is_finite()) {
            return Err(Error::Domain(format!(
                "production needs K > 0 and L > 0, got K = {k}, L = {l}"
            )));
        }
        let tfp = self.scale * z.exp();
        let root = (k * l).sqrt();
        Ok(Production {
            output: tfp * root,
            marginal_k: 0.5 * tfp * (l / k).sqrt(),
            marginal_l: 0.5 * tfp * (k / l).sqrt(),
        })
    }

    /// Competitive prices at aggregates `(K, L)`.
    pub fn prices(&self, k: f64, l: f64, z: f64) -> Result<PriceVector> {
        if !(k > 0.0) || !(l > 0.0) {
            return Err(Error::DegenerateAggregate(format!(
                "aggregate wealth {k} and income {l} must both be positive"
            )));
        }
        let f = self.evaluate(k, l, z)?;
        Ok(PriceVector {
            rate: f.marginal_k,
            wage: f.marginal_l,
        })
    }

    /// Wage consistent with interest rate `rate` on the factor-price
    /// frontier `r·w = (A e^z)² / 4`.
    pub fn frontier_wage(&self, rate: f64, z: f64) -> Result<f64> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!(
                "frontier wage needs a positive interest rate, got {rate}"
            )));
        }
        let tfp = self.scale * z.exp();
        Ok(tfp * tfp / (4.0 * rate))
    }

    /// Capital per unit labor that makes the marginal product of capital
    /// equal `rate`.
    pub fn capital_labor_ratio(&self, rate: f64, z: f64) -> f64 {
        let tfp = self.scale * z.exp();
        (0.5 * tfp / rate).powi(2)
    }
}

/// Unit-scale production function.
pub fn production(k: f64, l: f64, z: f64) -> Result<Production> {
    Technology::new(1.0).evaluate(k, l, z)
}

/// Weighted first moments `(X̄₁, X̄₂)` of `m`.
pub fn aggregate_moments(m: &Density, grid: &StateGrid) -> Result<(f64, f64)> {
    crate::error::check_len("density", grid.len(), m.len())?;
    let (mut wealth, mut income) = (0.0, 0.0);
    for (k, v) in m.values().iter().enumerate() {
        let q = v * grid.weight(k);
        let (i, j) = grid.split(k);
        wealth += q * grid.wealth()[i];
        income += q * grid.income()[j];
    }
    Ok((wealth, income))
}

/// Equilibrium price map `P*(m, z)`.
pub fn price_functional(
    m: &Density,
    z: f64,
    grid: &StateGrid,
    params: &ModelParams,
) -> Result<PriceVector> {
    let (k, l) = aggregate_moments(m, grid)?;
    params.technology().prices(k, l, z)
}

/// `p − P*(m, z)`.
pub fn market_clearing_residual(
    p: PriceVector,
    m: &Density,
    z: f64,
    grid: &StateGrid,
    params: &ModelParams,
) -> Result<PriceVector> {
    Ok(p.sub(price_functional(m, z, grid, params)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-14
    }

    #[test]
    fn production_closed_forms() {
        let f = production(1.0, 1.0, 0.0).unwrap();
        assert!(close(f.output, 1.0) && close(f.marginal_k, 0.5) && close(f.marginal_l, 0.5));
        let f = production(4.0, 1.0, 0.0).unwrap();
        assert!(close(f.output, 2.0) && close(f.marginal_k, 0.25) && close(f.marginal_l, 1.0));
        let f = production(1.0, 1.0, 4f64.ln()).unwrap();
        assert!((f.output - 4.0).abs() < 1e-13);
        assert!((f.marginal_k - 2.0).abs() < 1e-13 && (f.marginal_l - 2.0).abs() < 1e-13);
    }

    #[test]
    fn production_rejects_nonpositive_inputs() {
        assert!(matches!(production(0.0, 1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(production(1.0, -1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn frontier_is_consistent_with_marginal_products() {
        let t = Technology::new(0.3);
        let p = t.prices(7.0, 1.0, 0.2).unwrap();
        let w = t.frontier_wage(p.rate, 0.2).unwrap();
        assert!((w - p.wage).abs() < 1e-14);
        let ratio = t.capital_labor_ratio(p.rate, 0.2);
        assert!((ratio - 7.0).abs() < 1e-12);
    }

    fn two_node_grid() -> StateGrid {
        StateGrid::new(vec![0.0, 2.0, 4.0], vec![1.0], true).unwrap()
    }

    #[test]
    fn moments_of_point_mass_and_symmetric_mass() {
        let g = two_node_grid();
        let m = Density::point_mass(&g, 1).unwrap();
        let (k, l) = aggregate_moments(&m, &g).unwrap();
        assert!(close(k, 2.0) && close(l, 1.0));
        let m = Density::from_probabilities(&g, &[0.5, 0.0, 0.5]).unwrap();
        let (k, l) = aggregate_moments(&m, &g).unwrap();
        assert!(close(k, 2.0) && close(l, 1.0));
    }

    #[test]
    fn clearing_residual_at_equilibrium_is_zero() {
        let g = StateGrid::new(vec![0.0, 1.0, 2.0], vec![1.0], true).unwrap();
        let mut params = ModelParams::default_calibration();
        params.production_scale = 1.0;
        let m = Density::point_mass(&g, 1).unwrap();
        let p = price_functional(&m, 0.0, &g, &params).unwrap();
        assert_eq!(p, PriceVector { rate: 0.5, wage: 0.5 });
        let r = market_clearing_residual(p, &m, 0.0, &g, &params).unwrap();
        assert_eq!(r.sup_norm(), 0.0);
        let r = market_clearing_residual(PriceVector { rate: 1.0, wage: 1.0 }, &m, 0.0, &g, &params)
            .unwrap();
        assert_eq!(r, PriceVector { rate: 0.5, wage: 0.5 });
    }

    #[test]
    fn zero_wealth_is_degenerate() {
        let g = two_node_grid();
        let params = ModelParams::default_calibration();
        let m = Density::point_mass(&g, 0).unwrap();
        assert!(matches!(
            price_functional(&m, 0.0, &g, &params),
            Err(Error::DegenerateAggregate(_))
        ));
    }
}
