//! Model primitives shared by every solver: parameters, the discretized
//! state space, densities, the production technology and the equilibrium
//! price functional.

mod density;
mod grid;
mod params;
mod prices;

pub use density::Density;
pub use grid::{linspace, StateGrid};
pub use params::{IncomeProcess, ModelParams};
pub use prices::{
    aggregate_moments, market_clearing_residual, price_functional, production, PriceVector,
    Production, Technology,
};
