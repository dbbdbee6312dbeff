//! Uncertainty-quantification benchmark for radial CO₂ injection: a
//! finite-volume forward model, four surrogate families (aPC, adaptive sparse
//! grids, greedy kernel interpolation, hybrid stochastic Galerkin) and a
//! harness comparing their moment errors against a Monte Carlo reference.
//!
//! Numerical code is generic over [`scalar::Scalar`]; the aliases below fix
//! it to `f64`, and [`single`] holds the `f32` counterparts.

pub mod apc;
pub mod error;
pub mod harness;
pub mod hsg;
pub mod hull;
pub mod model;
pub mod physics;
pub mod reference;
pub mod scalar;
pub mod solver;
pub mod sparsegrid;
pub mod stochastic;
pub mod vkoga;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ScenarioConfig = physics::ScenarioConfig<f64>;
pub type UncertainInput = physics::UncertainInput<f64>;
pub type SolverConfig = solver::SolverConfig<f64>;
pub type SaturationField = solver::SaturationField<f64>;
pub type Grid = solver::Grid<f64>;
pub type SampleSet = stochastic::SampleSet<f64>;
pub type MomentField = reference::MomentField<f64>;
pub type SolverModel = model::SolverModel<f64>;

/// Single-precision aliases.
pub mod single {
    pub type ScenarioConfig = crate::physics::ScenarioConfig<f32>;
    pub type UncertainInput = crate::physics::UncertainInput<f32>;
    pub type SolverConfig = crate::solver::SolverConfig<f32>;
    pub type SaturationField = crate::solver::SaturationField<f32>;
    pub type Grid = crate::solver::Grid<f32>;
    pub type SampleSet = crate::stochastic::SampleSet<f32>;
    pub type MomentField = crate::reference::MomentField<f32>;
    pub type SolverModel = crate::model::SolverModel<f32>;
}
