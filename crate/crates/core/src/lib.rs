//! Solvers for heterogeneous-agent mean field games with a low-dimensional
//! price coupling.
//!
//! The crate covers the rational-expectations benchmarks (stationary
//! equilibrium, perfect-foresight transitions) and the adaptive-learning
//! machinery built on top of them: temporary equilibria, HJB equations posed
//! on price space, and the common-noise learning simulation whose value
//! function has finitely many state dimensions.
//!
//! All solvers are pure: they take immutable model data and return new
//! values. Persistence lives in the `mfgl-cli` crate.

pub mod augmented;
pub mod beliefs;
pub mod common_noise;
pub mod equilibrium;
pub mod error;
pub mod fokker_planck;
pub mod hjb;
pub mod linalg;
pub mod model;
pub mod temporary;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{
    aggregate_moments, market_clearing_residual, price_functional, Density, IncomeProcess,
    ModelParams, PriceVector, StateGrid, Technology,
};
