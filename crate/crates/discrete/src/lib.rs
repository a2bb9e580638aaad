//! Discrete-time mean field games on finite individual states.
//!
//! [`bellman`] solves the individual problem under a perceived price kernel,
//! [`master`] computes rational-expectations values over the population
//! simplex, [`mrp`] covers the single-action case with exact and sampled
//! values, and [`learning`] simulates adaptive populations.

pub mod bellman;
pub mod error;
pub mod kernel;
pub mod learning;
pub mod master;
pub mod model;
pub mod mrp;
pub mod simplex;

pub use bellman::{bellman_backward, BellmanSolution, TieBreak};
pub use error::{Error, Result};
pub use kernel::PerceivedPriceKernel;
pub use learning::{pilot_price_nodes, run_discrete_learning, Forecast, LearningConfig, LearningPath};
pub use master::{induced_tree_kernel, master_oracle, InducedTree, MasterSolution, OracleOptions};
pub use model::{chapman_step, pure_policy, DiscreteModel, Histogram, PriceMap, Quadratic};
pub use mrp::{mrp_value_bruteforce, mrp_value_monte_carlo, MarkovRewardProcess, MonteCarloEstimate};
pub use simplex::SimplexLattice;
