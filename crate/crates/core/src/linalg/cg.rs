use super::sparse::{dot, norm2, SparseMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct CgOptions {
    pub tol: f64,
    /// Defaults to ten times the dimension when `None`.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive
/// definite systems. Stops when `‖Ax − b‖ / ‖b‖ ≤ tol`.
pub fn cg_solve(a: &SparseMatrix, b: &[f64], opts: CgOptions) -> Result<CgOutcome> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { Ok(1.0 / d) } else { Err(Error::NotSpd) })
        .collect::<Result<_>>()?;

    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut residual = 1.0;

    for it in 1..=max_iter {
        a.matvec_into(&p, &mut ap)?;
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 {
            return Err(Error::NotSpd);
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        residual = norm2(&r) / bnorm;
        if residual <= opts.tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                residual,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_in_one_iteration() {
        let out = cg_solve(&SparseMatrix::identity(4), &[1.0, 2.0, 3.0, 4.0], CgOptions::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn indefinite_detected() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(cg_solve(&a, &[1.0, -1.0], CgOptions::default()), Err(Error::NotSpd)));
        let a = SparseMatrix::from_dense(&[vec![-1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(cg_solve(&a, &[1.0, 1.0], CgOptions::default()), Err(Error::NotSpd)));
    }

    #[test]
    fn iteration_cap() {
        let a = SparseMatrix::from_dense(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let opts = CgOptions {
            tol: 1e-14,
            max_iter: Some(1),
        };
        assert!(matches!(cg_solve(&a, &[1.0, 2.0, 3.0], opts), Err(Error::NotConverged { .. })));
    }
}
