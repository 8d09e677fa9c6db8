//! Linearly implicit BDF2 Navier-Stokes driver with nudging.
//!
//! Convection uses the extrapolated field `2wⁿ − wⁿ⁻¹`, so the step matrix
//! changes every step and is refactorized each time.

use std::collections::BTreeMap;
use std::sync::Mutex;

use super::scalar::{pin_values, PinSource, PinnedOperator};
use super::stokes::{velocity_pins, SaddleSystem, VelocityBc};
use super::truth::TruthSource;
use super::StateHistory;
use crate::assembly::{load_vector, mass_matrix, nse_convection_matrix, stiffness_matrix};
use crate::error::{Error, Result};
use crate::fem::FeSpace;
use crate::linalg::{LuPattern, SparseMatrix};
use crate::observation::{NudgingMode, ObservationOperator};

pub type VectorForcing<'a> = &'a (dyn Fn(f64, f64, f64) -> [f64; 2] + Sync);

pub struct NseProblem<'a> {
    pub vspace: &'a FeSpace,
    pub pspace: &'a FeSpace,
    pub nu: f64,
    pub dt: f64,
    pub steps: usize,
    pub bcs: Vec<VelocityBc>,
    pub mean_zero_pressure: bool,
    pub forcing: Option<VectorForcing<'a>>,
}

pub struct NseStepper<'a> {
    problem: NseProblem<'a>,
    obs: Option<&'a ObservationOperator>,
    saddle: SaddleSystem,
    mass: SparseMatrix,
    /// `νA + μN`, the constant part of every step matrix.
    base: SparseMatrix,
    pins: BTreeMap<usize, PinSource>,
    /// The step pattern is fixed, so its symbolic LU is kept.
    pattern: Mutex<Option<LuPattern>>,
}

impl<'a> NseStepper<'a> {
    pub fn new(problem: NseProblem<'a>, obs: Option<&'a ObservationOperator>) -> Result<Self> {
        if problem.vspace.components() != 2 || problem.pspace.components() != 1 {
            return Err(Error::InvalidInput("NSE needs a vector velocity and scalar pressure space".into()));
        }
        if !(problem.dt > 0.0 && problem.dt.is_finite()) || problem.steps == 0 {
            return Err(Error::InvalidInput("need a positive time step and at least one step".into()));
        }
        let saddle = SaddleSystem::new(problem.vspace, problem.pspace, problem.mean_zero_pressure)?;
        let mass = mass_matrix(problem.vspace)?;
        let mut base = stiffness_matrix(problem.vspace, problem.nu)?;
        if let Some(obs) = obs.filter(|o| o.mode() != NudgingMode::Direct) {
            base = SparseMatrix::linear_combination(&[(1.0, &base), (1.0, &obs.nudging_matrix()?)])?;
        }
        let mut pins = velocity_pins(problem.vspace, &problem.bcs)?;
        if let Some(obs) = obs.filter(|o| o.mode() == NudgingMode::Direct) {
            for (k, &d) in obs.measurement_dofs().iter().enumerate() {
                pins.entry(d).or_insert(PinSource::Measurement(k));
            }
        }
        Ok(NseStepper {
            problem,
            obs,
            saddle,
            mass,
            base,
            pins,
            pattern: Mutex::new(None),
        })
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn saddle(&self) -> &SaddleSystem {
        &self.saddle
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.problem.dt
    }

    /// Same contract as the scalar driver; states passed to `on_step` are
    /// velocities only.
    pub fn run(
        &self,
        w0: Vec<f64>,
        w1: Option<Vec<f64>>,
        truth: &mut dyn TruthSource,
        on_step: &mut dyn FnMut(usize, f64, &[f64]) -> Result<()>,
    ) -> Result<StateHistory> {
        let n = self.problem.vspace.n_dofs();
        for w in std::iter::once(&w0).chain(w1.as_ref()) {
            if w.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: w.len() });
            }
        }
        let dt = self.problem.dt;
        on_step(0, 0.0, &w0)?;
        let w1 = match w1 {
            Some(w) => w,
            None => {
                let hist: Vec<f64> = w0.iter().map(|v| v / dt).collect();
                self.solve_step(1.0 / dt, &w0, &hist, 1, truth)?
            }
        };
        on_step(1, self.time(1), &w1)?;
        let mut state = StateHistory {
            w_prev: w0,
            w_curr: w1,
            t: self.time(1),
            step: 1,
        };
        for k in 2..=self.problem.steps {
            let (cur, prev) = (&state.w_curr, &state.w_prev);
            let extrap: Vec<f64> = (0..n).map(|i| 2.0 * cur[i] - prev[i]).collect();
            let hist: Vec<f64> = (0..n).map(|i| (4.0 * cur[i] - prev[i]) / (2.0 * dt)).collect();
            let next = self.solve_step(1.5 / dt, &extrap, &hist, k, truth)?;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("velocity"));
            }
            on_step(k, self.time(k), &next)?;
            state.push(next, self.time(k));
        }
        Ok(state)
    }

    /// Solves `[c M + νA + K(a) + μN] w − Bᵀp = M·hist + F + μCᵀū`.
    fn solve_step(&self, c: f64, a: &[f64], hist: &[f64], step: usize, truth: &mut dyn TruthSource) -> Result<Vec<f64>> {
        let vspace = self.problem.vspace;
        let t = self.time(step);
        let k = nse_convection_matrix(vspace, a)?;
        let m = SparseMatrix::linear_combination(&[(c, &self.mass), (1.0, &self.base), (1.0, &k)])?;
        let mut rhs = self.mass.matvec(hist)?;
        if let Some(f) = self.problem.forcing {
            let nv = vspace.n_scalar_dofs();
            for comp in 0..2 {
                let load = load_vector_component(vspace, f, comp, t)?;
                rhs[comp * nv..(comp + 1) * nv].iter_mut().zip(&load).for_each(|(r, l)| *r += l);
            }
        }
        let mut nodal = None;
        if let Some(obs) = self.obs {
            match obs.mode() {
                NudgingMode::Direct => nodal = Some(truth.nodal(obs, vspace, step, t)?),
                _ if obs.mu() > 0.0 => {
                    let r = obs.nudging_rhs(&truth.averages(obs, step, t)?)?;
                    rhs.iter_mut().zip(&r).for_each(|(x, y)| *x += y);
                }
                _ => {}
            }
        }
        let op = PinnedOperator::with_cache(&self.saddle.assemble(&m)?, &self.pins, &self.pattern)?;
        let values = pin_values(vspace, &op.sources, |_, _, _| 0.0, nodal.as_deref())?;
        let x = op.solve(self.saddle.extend_rhs(rhs), &values)?;
        Ok(self.saddle.split(x).0)
    }
}

fn load_vector_component(
    vspace: &FeSpace,
    f: VectorForcing<'_>,
    comp: usize,
    t: f64,
) -> Result<Vec<f64>> {
    let scalar = FeSpace::new(vspace.mesh().clone(), vspace.degree(), 1)?;
    load_vector(&scalar, |x, y, t| f(x, y, t)[comp], t)
}

pub const KH_DELTA0: f64 = 1.0 / 28.0;
pub const KH_U_INF: f64 = 1.0;
pub const KH_NOISE: f64 = 1e-3;

/// Kelvin-Helmholtz initial velocity: a tanh shear layer plus a small
/// solenoidal perturbation `c_n (∂yψ, −∂xψ)` with
/// `ψ = u∞ exp(−(y − ½)²/δ₀²)(cos 8πx + cos 20πx)`.
pub fn kh_initial(x: f64, y: f64) -> [f64; 2] {
    use std::f64::consts::PI;
    let d2 = KH_DELTA0 * KH_DELTA0;
    let g = KH_U_INF * (-(y - 0.5).powi(2) / d2).exp();
    let waves = (8.0 * PI * x).cos() + (20.0 * PI * x).cos();
    let dpsi_dy = -2.0 * (y - 0.5) / d2 * g * waves;
    let dpsi_dx = g * (-8.0 * PI * (8.0 * PI * x).sin() - 20.0 * PI * (20.0 * PI * x).sin());
    [
        KH_U_INF * ((2.0 * y - 1.0) / KH_DELTA0).tanh() + KH_NOISE * dpsi_dy,
        -KH_NOISE * dpsi_dx,
    ]
}

/// `ν` for a given Reynolds number `δ₀ u∞ / ν`.
pub fn kh_viscosity(re: f64) -> f64 {
    KH_DELTA0 * KH_U_INF / re
}
