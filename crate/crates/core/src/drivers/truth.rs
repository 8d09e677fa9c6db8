//! Where observations of the true solution come from.

use super::exact::{ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::fem::FeSpace;
use crate::observation::ObservationOperator;

/// Supplies observed data at a given step.
pub trait TruthSource {
    /// Cell averages `I_H u(tⁿ)`.
    fn averages(&mut self, obs: &ObservationOperator, step: usize, t: f64) -> Result<Vec<f64>>;
    /// `u(tⁿ)` at [`ObservationOperator::measurement_dofs`].
    fn nodal(&mut self, obs: &ObservationOperator, space: &FeSpace, step: usize, t: f64) -> Result<Vec<f64>>;
}

/// Analytic truth sampled exactly.
pub enum AnalyticTruth<'a> {
    Scalar(&'a dyn ScalarField),
    Vector(&'a dyn VectorField),
}

impl AnalyticTruth<'_> {
    fn eval(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        match self {
            AnalyticTruth::Scalar(f) => [f.value(x, y, t); 2],
            AnalyticTruth::Vector(f) => f.value(x, y, t),
        }
    }
}

impl TruthSource for AnalyticTruth<'_> {
    fn averages(&mut self, obs: &ObservationOperator, _step: usize, t: f64) -> Result<Vec<f64>> {
        obs.averages_of(|x, y, t| self.eval(x, y, t), t)
    }

    fn nodal(&mut self, obs: &ObservationOperator, space: &FeSpace, _step: usize, t: f64) -> Result<Vec<f64>> {
        let n = space.n_scalar_dofs();
        Ok(obs
            .measurement_dofs()
            .iter()
            .map(|&d| {
                let [x, y] = space.dof_coords()[d % n];
                self.eval(x, y, t)[d / n]
            })
            .collect())
    }
}

/// Discrete truth stored one state per step, starting at step 0.
pub struct TrajectoryTruth<'a> {
    pub states: &'a [Vec<f64>],
}

impl TrajectoryTruth<'_> {
    pub fn state(&self, step: usize) -> Result<&[f64]> {
        self.states.get(step).map(Vec::as_slice).ok_or(Error::TrajectoryExhausted(step))
    }
}

impl TruthSource for TrajectoryTruth<'_> {
    fn averages(&mut self, obs: &ObservationOperator, step: usize, _t: f64) -> Result<Vec<f64>> {
        obs.apply_ih(self.state(step)?)
    }

    fn nodal(&mut self, obs: &ObservationOperator, _space: &FeSpace, step: usize, _t: f64) -> Result<Vec<f64>> {
        let s = self.state(step)?;
        Ok(obs.measurement_dofs().iter().map(|&d| s[d]).collect())
    }
}

/// For runs without nudging.
pub struct NoTruth;

impl TruthSource for NoTruth {
    fn averages(&mut self, _: &ObservationOperator, _: usize, _: f64) -> Result<Vec<f64>> {
        Err(Error::InvalidInput("nudged run needs a truth source".into()))
    }

    fn nodal(&mut self, _: &ObservationOperator, _: &FeSpace, _: usize, _: f64) -> Result<Vec<f64>> {
        Err(Error::InvalidInput("nudged run needs a truth source".into()))
    }
}
