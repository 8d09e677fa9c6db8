//! Time-stepping drivers and the projections they are analysed with.

pub mod exact;
pub mod nse;
pub mod projection;
pub mod scalar;
pub mod snapshot;
pub mod stokes;
pub mod truth;

pub use nse::{kh_initial, NseProblem, NseStepper};
pub use projection::{cda_poisson_projection, cda_stokes_projection, ProjectionTarget};
pub use scalar::{ScalarProblem, ScalarStepper};
pub use snapshot::{SnapshotReader, SnapshotWriter};
pub use stokes::{steady_stokes_solve, SaddleSystem, VelocityBc};
pub use truth::{AnalyticTruth, NoTruth, TrajectoryTruth, TruthSource};

use crate::error::{Error, Result};

/// Two-level BDF2 state.
#[derive(Clone, Debug)]
pub struct StateHistory {
    pub w_prev: Vec<f64>,
    pub w_curr: Vec<f64>,
    pub t: f64,
    pub step: usize,
}

impl StateHistory {
    pub fn push(&mut self, next: Vec<f64>, t: f64) {
        self.w_prev = std::mem::replace(&mut self.w_curr, next);
        self.t = t;
        self.step += 1;
    }
}

/// Number of steps of size `dt` covering `[0, t_final]`.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_final >= dt) {
        return Err(Error::InvalidInput(format!("need 0 < dt <= T, got dt={dt}, T={t_final}")));
    }
    let n = (t_final / dt).round();
    if (n * dt - t_final).abs() > 1e-9 * t_final {
        return Err(Error::InvalidInput(format!("T={t_final} is not a whole number of steps of {dt}")));
    }
    Ok(n as usize)
}

/// `‖[a; b]‖²_G` for the pair `(older, newer) = (b, a)` with
/// `G = [½, −1; −1, 5/2]`, under the inner product `ip`.
pub fn g_norm_sq(newer: &[f64], older: &[f64], ip: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
    0.5 * ip(older, older) - 2.0 * ip(older, newer) + 2.5 * ip(newer, newer)
}

/// Both sides of the BDF2 energy identity
/// `(½(3a − 4b + c), a) = ½(‖[a;b]‖²_G − ‖[b;c]‖²_G) + ¼‖a − 2b + c‖²`.
pub fn bdf2_identity_sides(a: &[f64], b: &[f64], c: &[f64], ip: impl Fn(&[f64], &[f64]) -> f64 + Copy) -> (f64, f64) {
    let diff: Vec<f64> = (0..a.len()).map(|i| 0.5 * (3.0 * a[i] - 4.0 * b[i] + c[i])).collect();
    let curv: Vec<f64> = (0..a.len()).map(|i| a[i] - 2.0 * b[i] + c[i]).collect();
    let lhs = ip(&diff, a);
    let rhs = 0.5 * (g_norm_sq(a, b, ip) - g_norm_sq(b, c, ip)) + 0.25 * ip(&curv, &curv);
    (lhs, rhs)
}
