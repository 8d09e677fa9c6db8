//! Error norms and error time series.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembly::{mass_matrix, stiffness_matrix, CellValues};
use crate::drivers::exact::{ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::fem::FeSpace;
use crate::linalg::SparseMatrix;

/// Closed-form truth for [`analytic_errors`].
#[derive(Clone, Copy)]
pub enum Analytic<'a> {
    Scalar(&'a dyn ScalarField),
    Vector(&'a dyn VectorField),
}

/// `(‖w − u‖, |w − u|₁)` by elementwise quadrature of exactness `2k + 2`.
pub fn analytic_errors(space: &FeSpace, w: &[f64], truth: Analytic, t: f64) -> Result<(f64, f64)> {
    let comps = space.components();
    let expected = match truth {
        Analytic::Scalar(_) => 1,
        Analytic::Vector(_) => 2,
    };
    if comps != expected {
        return Err(Error::InvalidInput("truth and space have different component counts".into()));
    }
    if w.len() != space.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: space.n_dofs(),
            got: w.len(),
        });
    }
    let ns = space.n_scalar_dofs();
    let mut cv = CellValues::new(space.degree(), 2 * space.degree() + 2)?;
    let (mut l2, mut h1) = (0.0, 0.0);
    for c in 0..space.mesh().n_cells() {
        cv.reinit(&space.cell_map(c));
        let dofs = space.cell_dofs(c);
        for q in 0..cv.nq() {
            let [x, y] = cv.points[q];
            let (u, du) = match truth {
                Analytic::Scalar(f) => ([f.value(x, y, t), 0.0], [f.grad(x, y, t), [0.0; 2]]),
                Analytic::Vector(f) => (f.value(x, y, t), f.jacobian(x, y, t)),
            };
            for comp in 0..comps {
                let (mut v, mut g) = (0.0, [0.0; 2]);
                for (i, &d) in dofs.iter().enumerate() {
                    let coef = w[comp * ns + d];
                    v += coef * cv.phi(q)[i];
                    g[0] += coef * cv.dphi[q][i][0];
                    g[1] += coef * cv.dphi[q][i][1];
                }
                l2 += cv.jxw[q] * (v - u[comp]).powi(2);
                h1 += cv.jxw[q] * ((g[0] - du[comp][0]).powi(2) + (g[1] - du[comp][1]).powi(2));
            }
        }
    }
    Ok((l2.sqrt(), h1.sqrt()))
}

/// Norms against a discrete truth in the same space: `√(dᵀMd)` and
/// `√(dᵀAd)` for the coefficient difference `d`.
#[derive(Clone, Debug)]
pub struct DiscreteNorms {
    mass: SparseMatrix,
    stiffness: SparseMatrix,
}

impl DiscreteNorms {
    pub fn new(space: &FeSpace) -> Result<Self> {
        Ok(DiscreteNorms {
            mass: mass_matrix(space)?,
            stiffness: stiffness_matrix(space, 1.0)?,
        })
    }

    pub fn errors(&self, w: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
        if w.len() != truth.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                got: w.len(),
            });
        }
        let d: Vec<f64> = w.iter().zip(truth).map(|(a, b)| a - b).collect();
        Ok((self.norm_l2(&d)?, self.mass_free_h1(&d)?))
    }

    pub fn norm_l2(&self, v: &[f64]) -> Result<f64> {
        Ok(self.mass.bilinear(v, v)?.max(0.0).sqrt())
    }

    fn mass_free_h1(&self, v: &[f64]) -> Result<f64> {
        Ok(self.stiffness.bilinear(v, v)?.max(0.0).sqrt())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub step: usize,
    pub time: f64,
    pub l2_error: f64,
    pub h1_error: f64,
}

/// Errors over a run, one record per time step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorSeries {
    pub records: Vec<ErrorRecord>,
    pub wall_seconds: f64,
}

impl ErrorSeries {
    pub fn push(&mut self, step: usize, time: f64, l2_error: f64, h1_error: f64) -> Result<()> {
        if !(l2_error.is_finite() && h1_error.is_finite()) {
            return Err(Error::NonFinite("error series"));
        }
        if self.records.last().is_some_and(|r| r.time >= time) {
            return Err(Error::InvalidInput(format!("non-increasing time {time} in error series")));
        }
        self.records.push(ErrorRecord {
            step,
            time,
            l2_error,
            h1_error,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&ErrorRecord> {
        self.records.last()
    }

    /// The record whose time is closest to `t`.
    pub fn at_time(&self, t: f64) -> Option<&ErrorRecord> {
        self.records
            .iter()
            .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
    }

    pub fn l2(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.l2_error).collect()
    }

    /// CSV with columns `step,time,l2_error,h1_error`, 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("step,time,l2_error,h1_error\n");
        for r in &self.records {
            out.push_str(&format!("{},{:.16e},{:.16e},{:.16e}\n", r.step, r.time, r.l2_error, r.h1_error));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut series = ErrorSeries::default();
        for rec in reader.deserialize() {
            let r: ErrorRecord = rec.map_err(|e| csv_error(path, e))?;
            series.push(r.step, r.time, r.l2_error, r.h1_error)?;
        }
        Ok(series)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::InvalidInput(format!("{}: {e}", path.display()))
}
