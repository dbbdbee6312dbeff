//! The forward-model abstraction every surrogate is trained against.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::physics::{ScenarioConfig, UncertainInput};
use crate::scalar::Scalar;
use crate::solver::{model_error, simulate, SolverConfig};

/// Maps one parameter realisation to a vector-valued response.
pub trait Model<T: Scalar>: Sync {
    fn n_outputs(&self) -> usize;

    fn evaluate(&self, omega: &UncertainInput<T>) -> Result<Vec<T>>;

    /// Evaluates a batch; results keep the input order.
    fn evaluate_batch(&self, inputs: &[UncertainInput<T>]) -> Result<Vec<Vec<T>>> {
        inputs.par_iter().map(|w| self.evaluate(w)).collect()
    }
}

/// The finite-volume solver as a model: `ω ↦ Ŝ(·, T_end)`.
#[derive(Debug, Clone)]
pub struct SolverModel<T> {
    pub scenario: ScenarioConfig<T>,
    pub solver: SolverConfig<T>,
}

impl<T: Scalar> SolverModel<T> {
    pub fn new(scenario: ScenarioConfig<T>, solver: SolverConfig<T>) -> Self {
        Self { scenario, solver }
    }
}

impl<T: Scalar> Model<T> for SolverModel<T> {
    fn n_outputs(&self) -> usize {
        self.scenario.n_cells
    }

    fn evaluate(&self, omega: &UncertainInput<T>) -> Result<Vec<T>> {
        match simulate(omega, &self.scenario, &self.solver) {
            Ok(field) => Ok(field.values),
            Err(e @ Error::ModelRun { .. }) => Err(e),
            Err(e) => Err(model_error(omega, e.to_string())),
        }
    }
}

/// Adapts a closure into a [`Model`].
pub struct FnModel<F> {
    n_outputs: usize,
    f: F,
}

impl<F> FnModel<F> {
    pub fn new(n_outputs: usize, f: F) -> Self {
        Self { n_outputs, f }
    }
}

impl<T, F> Model<T> for FnModel<F>
where
    T: Scalar,
    F: Fn(&UncertainInput<T>) -> Vec<T> + Sync,
{
    fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    fn evaluate(&self, omega: &UncertainInput<T>) -> Result<Vec<T>> {
        Ok((self.f)(omega))
    }
}

/// Anything that predicts the response cheaply once built.
pub trait Surrogate<T: Scalar>: Sync {
    fn predict(&self, omega: &UncertainInput<T>) -> Result<Vec<T>>;
}
