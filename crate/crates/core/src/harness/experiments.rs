//! The numerical experiments: heat with a travelling wave, contaminant
//! transport in a sheared channel, a Kelvin-Helmholtz shear layer and the
//! nudged elliptic projections.

use std::sync::Arc;
use std::time::Instant;

use super::norms::{analytic_errors, Analytic, DiscreteNorms, ErrorSeries};
use super::rates::convergence_rates;
use crate::assembly::mass_matrix;
use crate::drivers::exact::{CurlBump, SineBump, TravelingWave};
use crate::drivers::{
    cda_poisson_projection, cda_stokes_projection, kh_initial, steady_stokes_solve, AnalyticTruth, NoTruth, NseProblem,
    NseStepper, ProjectionTarget, ScalarProblem, ScalarStepper, TrajectoryTruth, VelocityBc,
};
use crate::error::{Error, Result};
use crate::fem::{eval_basis, quadrature, CellMap, FeSpace};
use crate::linalg::factorize;
use crate::mesh::{Marker, Mesh, Rect};
use crate::observation::{CoarseGrid, NudgingMode, ObservationOperator};

/// Uniform `n × n` mesh of the unit square, optionally barycentrically
/// refined.
pub fn unit_square(n: usize, barycentric: bool) -> Result<Arc<Mesh>> {
    let mesh = Mesh::uniform_rect(n, n, Rect::UNIT)?;
    Ok(Arc::new(if barycentric { mesh.barycentric_refine() } else { mesh }))
}

/// `None` for `mu = 0`; `mu = ∞` always means direct enforcement.
pub fn observation(space: &FeSpace, grid: &Arc<CoarseGrid>, mu: f64, mode: NudgingMode) -> Result<Option<ObservationOperator>> {
    if mu == 0.0 {
        return Ok(None);
    }
    let mode = if mu.is_infinite() { NudgingMode::Direct } else { mode };
    ObservationOperator::new(space, grid.clone(), mu, mode).map(Some)
}

/// Heat CDA against `sin(t + 2πx + πy)` with matching Dirichlet data, from
/// a zero initial state.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatCase {
    pub n: usize,
    pub barycentric: bool,
    pub degree: usize,
    pub kappa: f64,
    pub dt: f64,
    pub t_final: f64,
    pub mu: f64,
    pub mode: NudgingMode,
    pub coarse_width: f64,
}

impl HeatCase {
    /// Spatial-convergence setup at resolution `1/n`.
    pub fn spatial(n: usize) -> Self {
        HeatCase {
            n,
            barycentric: true,
            degree: 2,
            kappa: 1.0,
            dt: 0.001,
            t_final: 0.3,
            mu: f64::INFINITY,
            mode: NudgingMode::Galerkin,
            coarse_width: 1.0 / 9.0,
        }
    }
}

pub fn heat_cda(case: &HeatCase) -> Result<ErrorSeries> {
    let start = Instant::now();
    let mesh = unit_square(case.n, case.barycentric)?;
    let space = FeSpace::new(mesh.clone(), case.degree, 1)?;
    let grid = Arc::new(CoarseGrid::new(&mesh, case.coarse_width)?);
    let obs = observation(&space, &grid, case.mu, case.mode)?;
    let wave = TravelingWave { kappa: case.kappa };
    let forcing = move |x: f64, y: f64, t: f64| wave.forcing(x, y, t);
    let boundary = move |x: f64, y: f64, t: f64| crate::drivers::exact::ScalarField::value(&wave, x, y, t);
    let problem = ScalarProblem {
        space: &space,
        kappa: case.kappa,
        dt: case.dt,
        steps: crate::drivers::step_count(case.t_final, case.dt)?,
        forcing: Some(&forcing),
        dirichlet: vec![Marker::Bottom, Marker::Top, Marker::Left, Marker::Right],
        boundary_value: &boundary,
        velocity: None,
    };
    let stepper = ScalarStepper::new(problem, obs.as_ref(), true)?;
    let mut series = ErrorSeries::default();
    let mut truth = AnalyticTruth::Scalar(&wave);
    stepper.run(vec![0.0; space.n_dofs()], None, &mut truth, &mut |k, t, w| {
        let (l2, h1) = analytic_errors(&space, w, Analytic::Scalar(&wave), t)?;
        series.push(k, t, l2, h1)
    })?;
    series.wall_seconds = start.elapsed().as_secs_f64();
    Ok(series)
}

pub const BLOB_CENTERS: [[f64; 2]; 2] = [[1.0, 1.5], [5.0, -0.5]];
pub const BLOB_RADIUS: f64 = 0.1;
pub const BLOB_VALUE: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct TransportSetup {
    pub channel: [usize; 2],
    pub degree: usize,
    pub kappa: f64,
    pub nu: f64,
    pub inflow: f64,
    pub dt: f64,
    pub t_final: f64,
    pub coarse_counts: [usize; 2],
}

impl Default for TransportSetup {
    fn default() -> Self {
        TransportSetup {
            channel: [96, 16],
            degree: 2,
            kappa: 0.01,
            nu: 0.01,
            inflow: 3.0,
            dt: 0.02,
            t_final: 5.0,
            coarse_counts: [12, 8],
        }
    }
}

/// Channel mesh, Stokes transport velocity and observation lattice.
pub struct TransportWorld {
    pub setup: TransportSetup,
    pub space: FeSpace,
    pub vspace: FeSpace,
    pub velocity: Vec<f64>,
    pub grid: Arc<CoarseGrid>,
}

impl TransportWorld {
    pub fn new(setup: TransportSetup) -> Result<Self> {
        let mesh = Arc::new(Mesh::shear_channel(setup.channel[0], setup.channel[1])?);
        let vspace = FeSpace::new(mesh.clone(), 2, 2)?;
        let pspace = FeSpace::new(mesh.clone(), 1, 1)?;
        let bcs = [
            VelocityBc::plug(Marker::Inflow, [setup.inflow, 0.0]),
            VelocityBc::no_slip(Marker::Bottom),
            VelocityBc::no_slip(Marker::Top),
        ];
        let (velocity, _) = steady_stokes_solve(&vspace, &pspace, setup.nu, &bcs, false)?;
        let space = FeSpace::new(mesh.clone(), setup.degree, 1)?;
        let grid = Arc::new(CoarseGrid::with_counts(&mesh, setup.coarse_counts[0], setup.coarse_counts[1])?);
        Ok(TransportWorld {
            setup,
            space,
            vspace,
            velocity,
            grid,
        })
    }

    pub fn steps(&self) -> Result<usize> {
        crate::drivers::step_count(self.setup.t_final, self.setup.dt)
    }

    fn stepper<'a>(&'a self, obs: Option<&'a ObservationOperator>) -> Result<ScalarStepper<'a>> {
        fn zero(_: f64, _: f64, _: f64) -> f64 {
            0.0
        }
        let problem = ScalarProblem {
            space: &self.space,
            kappa: self.setup.kappa,
            dt: self.setup.dt,
            steps: self.steps()?,
            forcing: None,
            dirichlet: vec![Marker::Inflow],
            boundary_value: &zero,
            velocity: Some((&self.vspace, &self.velocity)),
        };
        ScalarStepper::new(problem, obs, true)
    }

    /// L2 projection of the two-blob indicator, integrated on a refined
    /// sub-lattice of every cell so partially covered cells are resolved.
    pub fn blob_initial(&self) -> Result<Vec<f64>> {
        let inside = |p: [f64; 2]| {
            BLOB_CENTERS
                .iter()
                .any(|c| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) < BLOB_RADIUS * BLOB_RADIUS)
        };
        let space = &self.space;
        let rule = quadrature(2)?;
        let sub = 8;
        let mut b = vec![0.0; space.n_dofs()];
        for c in 0..space.mesh().n_cells() {
            let map = space.cell_map(c);
            let pts = space.mesh().cell_points(c);
            let near = pts.iter().any(|p| {
                BLOB_CENTERS
                    .iter()
                    .any(|c| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) < 0.25)
            });
            if !near {
                continue;
            }
            let dofs = space.cell_dofs(c);
            for tri in sub_triangles(sub) {
                let m = CellMap::new(tri.map(|l| [l[0], l[1]]));
                for (q, w) in rule.points.iter().zip(&rule.weights) {
                    let r = m.point(*q);
                    let l = [1.0 - r[0] - r[1], r[0], r[1]];
                    if !inside(map.point(l)) {
                        continue;
                    }
                    let e = eval_basis(space.degree(), l)?;
                    let jw = w * m.det().abs() * map.det().abs();
                    for (k, &d) in dofs.iter().enumerate() {
                        b[d] += BLOB_VALUE * jw * e.values[k];
                    }
                }
            }
        }
        factorize(&mass_matrix(space)?)?.solve(&b)
    }

    /// Free run from the blob state; one state per step including step 0.
    pub fn dns(&self) -> Result<Vec<Vec<f64>>> {
        let stepper = self.stepper(None)?;
        let mut states = Vec::with_capacity(self.steps()? + 1);
        stepper.run(self.blob_initial()?, None, &mut NoTruth, &mut |_, _, w| {
            states.push(w.to_vec());
            Ok(())
        })?;
        Ok(states)
    }

    /// CDA from zero against a stored reference trajectory.
    pub fn cda(&self, mu: f64, mode: NudgingMode, truth: &[Vec<f64>]) -> Result<ErrorSeries> {
        let start = Instant::now();
        let obs = observation(&self.space, &self.grid, mu, mode)?;
        let stepper = self.stepper(obs.as_ref())?;
        let norms = DiscreteNorms::new(&self.space)?;
        let mut series = ErrorSeries::default();
        let mut source = TrajectoryTruth { states: truth };
        stepper.run(vec![0.0; self.space.n_dofs()], None, &mut source, &mut |k, t, w| {
            let reference = truth.get(k).ok_or(Error::TrajectoryExhausted(k))?;
            let (l2, h1) = norms.errors(w, reference)?;
            series.push(k, t, l2, h1)
        })?;
        series.wall_seconds = start.elapsed().as_secs_f64();
        Ok(series)
    }
}

/// Barycentric corners (second and third coordinates) of the `m²`
/// sub-triangles of a uniform split of the reference triangle.
fn sub_triangles(m: usize) -> Vec<[[f64; 2]; 3]> {
    let h = 1.0 / m as f64;
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m - i {
            let p = |a: usize, b: usize| [a as f64 * h, b as f64 * h];
            out.push([p(i, j), p(i + 1, j), p(i, j + 1)]);
            if i + j + 1 < m {
                out.push([p(i + 1, j), p(i + 1, j + 1), p(i, j + 1)]);
            }
        }
    }
    out
}

/// Doubly periodic-in-x shear layer on the unit square with free-slip
/// walls at `y = 0, 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct KhSetup {
    pub n: usize,
    pub nu: f64,
    pub dt: f64,
    pub t_final: f64,
}

impl KhSetup {
    pub fn reduced() -> Self {
        KhSetup {
            n: 48,
            nu: crate::drivers::nse::kh_viscosity(100.0),
            dt: 0.02,
            t_final: 8.0,
        }
    }
}

pub struct KhWorld {
    pub setup: KhSetup,
    pub vspace: FeSpace,
    pub pspace: FeSpace,
}

impl KhWorld {
    pub fn new(setup: KhSetup) -> Result<Self> {
        let mesh = Arc::new(Mesh::uniform_rect(setup.n, setup.n, Rect::UNIT)?.identify_periodic_x()?);
        Ok(KhWorld {
            vspace: FeSpace::new(mesh.clone(), 2, 2)?,
            pspace: FeSpace::new(mesh, 1, 1)?,
            setup,
        })
    }

    pub fn steps(&self) -> Result<usize> {
        crate::drivers::step_count(self.setup.t_final, self.setup.dt)
    }

    fn stepper<'a>(&'a self, obs: Option<&'a ObservationOperator>) -> Result<NseStepper<'a>> {
        let problem = NseProblem {
            vspace: &self.vspace,
            pspace: &self.pspace,
            nu: self.setup.nu,
            dt: self.setup.dt,
            steps: self.steps()?,
            bcs: vec![
                VelocityBc::free_slip_horizontal(Marker::Bottom),
                VelocityBc::free_slip_horizontal(Marker::Top),
            ],
            mean_zero_pressure: true,
            forcing: None,
        };
        NseStepper::new(problem, obs)
    }

    pub fn dns(&self) -> Result<Vec<Vec<f64>>> {
        let w0 = self.vspace.interpolate_vector(|x, y, _| kh_initial(x, y), 0.0)?;
        let mut states = Vec::with_capacity(self.steps()? + 1);
        self.stepper(None)?.run(w0, None, &mut NoTruth, &mut |_, _, w| {
            states.push(w.to_vec());
            Ok(())
        })?;
        Ok(states)
    }

    /// CDA with `w⁰ = w¹ = 0`.
    pub fn cda(&self, coarse_width: f64, mu: f64, mode: NudgingMode, truth: &[Vec<f64>]) -> Result<ErrorSeries> {
        let start = Instant::now();
        let grid = Arc::new(CoarseGrid::new(self.vspace.mesh(), coarse_width)?);
        let obs = observation(&self.vspace, &grid, mu, mode)?;
        let norms = DiscreteNorms::new(&self.vspace)?;
        let n = self.vspace.n_dofs();
        let mut series = ErrorSeries::default();
        let mut source = TrajectoryTruth { states: truth };
        self.stepper(obs.as_ref())?
            .run(vec![0.0; n], Some(vec![0.0; n]), &mut source, &mut |k, t, w| {
                let reference = truth.get(k).ok_or(Error::TrajectoryExhausted(k))?;
                let (l2, h1) = norms.errors(w, reference)?;
                series.push(k, t, l2, h1)
            })?;
        series.wall_seconds = start.elapsed().as_secs_f64();
        Ok(series)
    }
}

/// One projection solve: resolution `1/n`, nudging `mu`, errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionRow {
    pub n: usize,
    pub mu: f64,
    pub l2: f64,
    pub h1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionKind {
    /// `sin πx sin πy` with the Poisson form.
    Poisson,
    /// Curl of `sin²πx sin²πy` with the Stokes form.
    Stokes,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionSweep {
    pub kind: ProjectionKind,
    pub resolutions: Vec<usize>,
    pub mus: Vec<f64>,
    pub coefficient: f64,
    pub coarse_width: f64,
    pub mode: NudgingMode,
    pub barycentric: bool,
}

impl ProjectionSweep {
    pub fn standard(kind: ProjectionKind) -> Self {
        ProjectionSweep {
            kind,
            resolutions: vec![8, 16, 32],
            mus: vec![0.0, 1.0, 1e4, 1e8],
            coefficient: 1.0,
            coarse_width: 0.25,
            mode: NudgingMode::Galerkin,
            barycentric: false,
        }
    }

    pub fn run(&self) -> Result<Vec<ProjectionRow>> {
        let mut rows = Vec::new();
        for &n in &self.resolutions {
            let mesh = unit_square(n, self.barycentric)?;
            let grid = Arc::new(CoarseGrid::new(&mesh, self.coarse_width)?);
            match self.kind {
                ProjectionKind::Poisson => {
                    let space = FeSpace::new(mesh, 2, 1)?;
                    for &mu in &self.mus {
                        let obs = observation(&space, &grid, mu, self.mode)?;
                        let u = cda_poisson_projection(&space, obs.as_ref(), self.coefficient, ProjectionTarget::Scalar(&SineBump))?;
                        let (l2, h1) = analytic_errors(&space, &u, Analytic::Scalar(&SineBump), 0.0)?;
                        rows.push(ProjectionRow { n, mu, l2, h1 });
                    }
                }
                ProjectionKind::Stokes => {
                    let vspace = FeSpace::new(mesh.clone(), 2, 2)?;
                    let pspace = FeSpace::new(mesh, 1, 1)?;
                    for &mu in &self.mus {
                        let obs = observation(&vspace, &grid, mu, self.mode)?;
                        let (u, _) = cda_stokes_projection(
                            &vspace,
                            &pspace,
                            obs.as_ref(),
                            self.coefficient,
                            ProjectionTarget::Vector(&CurlBump),
                        )?;
                        let (l2, h1) = analytic_errors(&vspace, &u, Analytic::Vector(&CurlBump), 0.0)?;
                        rows.push(ProjectionRow { n, mu, l2, h1 });
                    }
                }
            }
        }
        Ok(rows)
    }
}

/// Rates per μ and the max/min L2 spread over μ per resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionSummary {
    /// `(μ, L2 rates, H1 rates)`.
    pub rates: Vec<(f64, Vec<f64>, Vec<f64>)>,
    /// `(n, max_μ e / min_μ e)` on the L2 errors.
    pub spread: Vec<(usize, f64)>,
}

impl ProjectionSummary {
    pub fn new(rows: &[ProjectionRow]) -> Result<Self> {
        let mut mus: Vec<f64> = Vec::new();
        let mut ns: Vec<usize> = Vec::new();
        for r in rows {
            if !mus.contains(&r.mu) {
                mus.push(r.mu);
            }
            if !ns.contains(&r.n) {
                ns.push(r.n);
            }
        }
        let mut rates = Vec::new();
        for &mu in &mus {
            let sel: Vec<&ProjectionRow> = rows.iter().filter(|r| r.mu == mu).collect();
            let l2 = convergence_rates(&sel.iter().map(|r| (1.0 / r.n as f64, r.l2)).collect::<Vec<_>>())?;
            let h1 = convergence_rates(&sel.iter().map(|r| (1.0 / r.n as f64, r.h1)).collect::<Vec<_>>())?;
            rates.push((mu, l2.rates(), h1.rates()));
        }
        let spread = ns
            .iter()
            .map(|&n| {
                let e: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.l2).collect();
                let max = e.iter().copied().fold(f64::MIN, f64::max);
                let min = e.iter().copied().fold(f64::MAX, f64::min);
                (n, max / min)
            })
            .collect();
        Ok(ProjectionSummary { rates, spread })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sub_triangles_tile_the_reference_triangle() {
        for m in [1, 3, 8] {
            let t = sub_triangles(m);
            assert_eq!(t.len(), m * m);
            let area: f64 = t.iter().map(|s| CellMap::new(*s).det().abs() / 2.0).sum();
            assert!((area - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn coarse_heat_run_decays_to_a_plateau() {
        let case = HeatCase {
            n: 8,
            barycentric: false,
            t_final: 0.2,
            dt: 0.005,
            coarse_width: 0.25,
            ..HeatCase::spatial(8)
        };
        let s = heat_cda(&case).unwrap();
        assert_eq!(s.len(), 41);
        assert!(s.last().unwrap().l2_error < 1e-2 * s.records[0].l2_error);
    }

    #[test]
    fn blob_mass_matches_the_disc_area() {
        let world = TransportWorld::new(TransportSetup::default()).unwrap();
        let c = world.blob_initial().unwrap();
        let m = mass_matrix(&world.space).unwrap();
        let total: f64 = m.matvec(&c).unwrap().iter().sum();
        let exact = BLOB_VALUE * 2.0 * std::f64::consts::PI * BLOB_RADIUS * BLOB_RADIUS;
        assert!((total / exact - 1.0).abs() < 0.05, "{total} vs {exact}");
    }
}
