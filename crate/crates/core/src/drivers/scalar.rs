//! BDF2 driver for the heat and transport equations with optional nudging.
//!
//! Each step solves
//! `[(3/(2Δt))M + κA + N_U + μN] wⁿ⁺¹ = (1/(2Δt))M(4wⁿ − wⁿ⁻¹) + Fⁿ⁺¹ + μCᵀūⁿ⁺¹`
//! after one backward Euler startup step. Both step matrices are constant, so
//! each is eliminated and factorized once.

use std::collections::BTreeMap;
use std::sync::Mutex;

use super::truth::TruthSource;
use super::StateHistory;
use crate::assembly::{convection_matrix, load_vector, mass_matrix, stiffness_matrix, Elimination};
use crate::error::{Error, Result};
use crate::fem::FeSpace;
use crate::linalg::{factorize, Factorization, LuPattern, SparseMatrix};
use crate::mesh::Marker;
use crate::observation::{NudgingMode, ObservationOperator};

pub type Field<'a> = &'a (dyn Fn(f64, f64, f64) -> f64 + Sync);

pub struct ScalarProblem<'a> {
    pub space: &'a FeSpace,
    pub kappa: f64,
    pub dt: f64,
    pub steps: usize,
    pub forcing: Option<Field<'a>>,
    /// Markers carrying Dirichlet data; every other boundary is natural.
    pub dirichlet: Vec<Marker>,
    pub boundary_value: Field<'a>,
    /// Advecting velocity on a vector space over the same mesh.
    pub velocity: Option<(&'a FeSpace, &'a [f64])>,
}

/// Where a pinned DOF takes its value from.
#[derive(Clone, Copy, Debug)]
pub(crate) enum PinSource {
    /// Boundary data at this scalar DOF for this component.
    Boundary { dof: usize, comp: usize },
    /// Constant value.
    Fixed(f64),
    /// Entry of the nodal observation vector.
    Measurement(usize),
}

/// A constant matrix with a fixed pinned set, eliminated and factorized.
pub(crate) struct PinnedOperator {
    pub elim: Elimination,
    reduced: SparseMatrix,
    pub factor: Factorization,
    pub sources: Vec<PinSource>,
}

impl PinnedOperator {
    pub fn new(matrix: &SparseMatrix, pins: &BTreeMap<usize, PinSource>) -> Result<Self> {
        let dofs: Vec<usize> = pins.keys().copied().collect();
        let (reduced, elim) = Elimination::new(matrix, &dofs)?;
        let factor = factorize(&reduced)?;
        Ok(PinnedOperator {
            elim,
            reduced,
            factor,
            sources: pins.values().copied().collect(),
        })
    }

    /// Like `new`, reusing the symbolic LU in `cache` while the reduced
    /// pattern stays the same.
    pub fn with_cache(matrix: &SparseMatrix, pins: &BTreeMap<usize, PinSource>, cache: &Mutex<Option<LuPattern>>) -> Result<Self> {
        let dofs: Vec<usize> = pins.keys().copied().collect();
        let (reduced, elim) = Elimination::new(matrix, &dofs)?;
        let mut slot = cache.lock().unwrap_or_else(|e| e.into_inner());
        if !slot.as_ref().is_some_and(|p| p.matches(&reduced)) {
            *slot = Some(LuPattern::new(&reduced)?);
        }
        let factor = slot.as_ref().map(|p| p.factorize(&reduced)).expect("pattern just set")?;
        Ok(PinnedOperator {
            elim,
            reduced,
            factor,
            sources: pins.values().copied().collect(),
        })
    }

    pub fn solve(&self, mut rhs: Vec<f64>, values: &[f64]) -> Result<Vec<f64>> {
        self.elim.apply(&mut rhs, values)?;
        let mut x = self.factor.solve(&rhs)?;
        // one refinement sweep; large μ makes the pivots badly scaled
        let ax = self.reduced.matvec(&x)?;
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = self.factor.solve(&r)?;
        x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
        Ok(x)
    }
}

/// Pinned DOFs: boundary data first, then measurement nodes not already on
/// a Dirichlet boundary.
pub(crate) fn collect_pins(
    space: &FeSpace,
    boundary: &[(Marker, [bool; 2])],
    obs: Option<&ObservationOperator>,
) -> Result<BTreeMap<usize, PinSource>> {
    let mut pins = BTreeMap::new();
    for &(m, comps) in boundary {
        for &d in space.boundary_dofs(m)? {
            for comp in 0..space.components() {
                if comps[comp] {
                    pins.insert(space.component_offset(comp) + d, PinSource::Boundary { dof: d, comp });
                }
            }
        }
    }
    if let Some(obs) = obs.filter(|o| o.mode() == NudgingMode::Direct) {
        for (k, &d) in obs.measurement_dofs().iter().enumerate() {
            pins.entry(d).or_insert(PinSource::Measurement(k));
        }
    }
    Ok(pins)
}

pub(crate) fn pin_values(
    space: &FeSpace,
    sources: &[PinSource],
    boundary: impl Fn(f64, f64, usize) -> f64,
    nodal: Option<&[f64]>,
) -> Result<Vec<f64>> {
    sources
        .iter()
        .map(|s| match *s {
            PinSource::Boundary { dof, comp } => {
                let [x, y] = space.dof_coords()[dof];
                Ok(boundary(x, y, comp))
            }
            PinSource::Fixed(v) => Ok(v),
            PinSource::Measurement(k) => nodal
                .map(|v| v[k])
                .ok_or_else(|| Error::InvalidInput("missing nodal observations".into())),
        })
        .collect()
}

pub struct ScalarStepper<'a> {
    problem: ScalarProblem<'a>,
    obs: Option<&'a ObservationOperator>,
    mass: SparseMatrix,
    /// Unfactorized step matrices, kept for the refactorizing path.
    matrices: [SparseMatrix; 2],
    pins: BTreeMap<usize, PinSource>,
    ops: Option<[PinnedOperator; 2]>,
}

impl<'a> ScalarStepper<'a> {
    /// With `reuse` false, each step refactorizes its matrix from scratch.
    pub fn new(problem: ScalarProblem<'a>, obs: Option<&'a ObservationOperator>, reuse: bool) -> Result<Self> {
        let space = problem.space;
        if space.components() != 1 {
            return Err(Error::InvalidInput("scalar driver needs a scalar space".into()));
        }
        if !(problem.dt > 0.0 && problem.dt.is_finite()) || problem.steps == 0 {
            return Err(Error::InvalidInput("need a positive time step and at least one step".into()));
        }
        let mass = mass_matrix(space)?;
        let mut base = stiffness_matrix(space, problem.kappa)?;
        if let Some((vspace, u)) = problem.velocity {
            let n = convection_matrix(space, vspace, u, true)?;
            base = SparseMatrix::linear_combination(&[(1.0, &base), (1.0, &n)])?;
        }
        if let Some(obs) = obs.filter(|o| o.mode() != NudgingMode::Direct) {
            let nud = obs.nudging_matrix()?;
            base = SparseMatrix::linear_combination(&[(1.0, &base), (1.0, &nud)])?;
        }
        let dt = problem.dt;
        let be = SparseMatrix::linear_combination(&[(1.0 / dt, &mass), (1.0, &base)])?;
        let bdf = SparseMatrix::linear_combination(&[(1.5 / dt, &mass), (1.0, &base)])?;
        let boundary: Vec<_> = problem.dirichlet.iter().map(|&m| (m, [true, true])).collect();
        let pins = collect_pins(space, &boundary, obs)?;
        let ops = if reuse {
            Some([PinnedOperator::new(&be, &pins)?, PinnedOperator::new(&bdf, &pins)?])
        } else {
            None
        };
        Ok(ScalarStepper {
            problem,
            obs,
            mass,
            matrices: [be, bdf],
            pins,
            ops,
        })
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.problem.dt
    }

    /// Steps from `w0` (and `w1`, if given, skipping the startup step) to
    /// the final time. `on_step` sees every state including the initial ones.
    pub fn run(
        &self,
        w0: Vec<f64>,
        w1: Option<Vec<f64>>,
        truth: &mut dyn TruthSource,
        on_step: &mut dyn FnMut(usize, f64, &[f64]) -> Result<()>,
    ) -> Result<StateHistory> {
        let n = self.problem.space.n_dofs();
        let check = |w: &[f64]| {
            if w.len() == n {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected: n, got: w.len() })
            }
        };
        check(&w0)?;
        on_step(0, 0.0, &w0)?;
        let w1 = match w1 {
            Some(w) => {
                check(&w)?;
                w
            }
            None => {
                let mut rhs = self.mass.matvec(&w0)?;
                rhs.iter_mut().for_each(|r| *r /= self.problem.dt);
                self.solve_step(0, rhs, 1, truth)?
            }
        };
        on_step(1, self.time(1), &w1)?;
        let mut state = StateHistory {
            w_prev: w0,
            w_curr: w1,
            t: self.time(1),
            step: 1,
        };
        let c = 0.5 / self.problem.dt;
        for k in 2..=self.problem.steps {
            let hist: Vec<f64> = (0..n).map(|i| c * (4.0 * state.w_curr[i] - state.w_prev[i])).collect();
            let rhs = self.mass.matvec(&hist)?;
            let next = self.solve_step(1, rhs, k, truth)?;
            on_step(k, self.time(k), &next)?;
            state.push(next, self.time(k));
        }
        Ok(state)
    }

    fn solve_step(&self, which: usize, mut rhs: Vec<f64>, step: usize, truth: &mut dyn TruthSource) -> Result<Vec<f64>> {
        let t = self.time(step);
        let space = self.problem.space;
        if let Some(f) = self.problem.forcing {
            let load = load_vector(space, f, t)?;
            rhs.iter_mut().zip(&load).for_each(|(r, l)| *r += l);
        }
        let mut nodal = None;
        if let Some(obs) = self.obs {
            match obs.mode() {
                NudgingMode::Direct => nodal = Some(truth.nodal(obs, space, step, t)?),
                _ if obs.mu() > 0.0 => {
                    let r = obs.nudging_rhs(&truth.averages(obs, step, t)?)?;
                    rhs.iter_mut().zip(&r).for_each(|(a, b)| *a += b);
                }
                _ => {}
            }
        }
        let g = self.problem.boundary_value;
        let fresh;
        let op = match &self.ops {
            Some(ops) => &ops[which],
            None => {
                fresh = PinnedOperator::new(&self.matrices[which], &self.pins)?;
                &fresh
            }
        };
        let values = pin_values(space, &op.sources, |x, y, _| g(x, y, t), nodal.as_deref())?;
        op.solve(rhs, &values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::exact::{ScalarField, TravelingWave};
    use crate::drivers::truth::{AnalyticTruth, NoTruth};
    use crate::linalg::dot;
    use crate::mesh::{Mesh, Rect};
    use crate::observation::CoarseGrid;
    use std::sync::Arc;

    const WALLS: [Marker; 4] = [Marker::Bottom, Marker::Top, Marker::Left, Marker::Right];

    fn zero(_: f64, _: f64, _: f64) -> f64 {
        0.0
    }

    #[test]
    fn zero_data_stays_zero() {
        let space = FeSpace::new(Arc::new(Mesh::uniform_rect(4, 4, Rect::UNIT).unwrap()), 2, 1).unwrap();
        let p = ScalarProblem {
            space: &space,
            kappa: 1.0,
            dt: 0.01,
            steps: 10,
            forcing: Some(&zero),
            dirichlet: WALLS.to_vec(),
            boundary_value: &zero,
            velocity: None,
        };
        let stepper = ScalarStepper::new(p, None, true).unwrap();
        let end = stepper
            .run(vec![0.0; space.n_dofs()], None, &mut NoTruth, &mut |_, _, w| {
                assert!(w.iter().all(|&v| v == 0.0));
                Ok(())
            })
            .unwrap();
        assert_eq!(end.step, 10);
    }

    #[test]
    fn homogeneous_heat_dissipates_g_energy() {
        let space = FeSpace::new(Arc::new(Mesh::uniform_rect(6, 6, Rect::UNIT).unwrap()), 2, 1).unwrap();
        let p = ScalarProblem {
            space: &space,
            kappa: 1.0,
            dt: 0.005,
            steps: 40,
            forcing: None,
            dirichlet: WALLS.to_vec(),
            boundary_value: &zero,
            velocity: None,
        };
        let stepper = ScalarStepper::new(p, None, true).unwrap();
        let m = stepper.mass().clone();
        let ip = |a: &[f64], b: &[f64]| dot(a, &m.matvec(b).unwrap());
        let w0 = space.interpolate(|x, y, _| (x * (1.0 - x) * y * (1.0 - y)) * 16.0, 0.0).unwrap();
        let mut states: Vec<Vec<f64>> = Vec::new();
        stepper
            .run(w0, None, &mut NoTruth, &mut |_, _, w| {
                states.push(w.to_vec());
                Ok(())
            })
            .unwrap();
        let energies: Vec<f64> = states.windows(2).map(|w| super::super::g_norm_sq(&w[1], &w[0], ip)).collect();
        assert!(energies.windows(2).skip(1).all(|e| e[1] <= e[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn direct_mode_pins_measurements_and_reuse_matches_refactor() {
        let mesh = Arc::new(Mesh::uniform_rect(8, 8, Rect::UNIT).unwrap().barycentric_refine());
        let space = FeSpace::new(mesh.clone(), 2, 1).unwrap();
        let grid = Arc::new(CoarseGrid::new(&mesh, 0.25).unwrap());
        let obs = ObservationOperator::new(&space, grid, f64::INFINITY, NudgingMode::Direct).unwrap();
        let wave = TravelingWave { kappa: 1.0 };
        let f = |x: f64, y: f64, t: f64| wave.forcing(x, y, t);
        let g = |x: f64, y: f64, t: f64| wave.value(x, y, t);
        let make = || ScalarProblem {
            space: &space,
            kappa: 1.0,
            dt: 0.01,
            steps: 20,
            forcing: Some(&f),
            dirichlet: WALLS.to_vec(),
            boundary_value: &g,
            velocity: None,
        };
        let mut runs = Vec::new();
        for reuse in [true, false] {
            let stepper = ScalarStepper::new(make(), Some(&obs), reuse).unwrap();
            let mut last = Vec::new();
            stepper
                .run(vec![0.0; space.n_dofs()], None, &mut AnalyticTruth::Scalar(&wave), &mut |k, t, w| {
                    if k > 0 {
                        for &d in obs.measurement_dofs() {
                            let [x, y] = space.dof_coords()[d];
                            assert!((w[d] - wave.value(x, y, t)).abs() < 1e-12);
                        }
                    }
                    last = w.to_vec();
                    Ok(())
                })
                .unwrap();
            runs.push(last);
        }
        assert!(runs[0].iter().zip(&runs[1]).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
