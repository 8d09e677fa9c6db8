//! Reusable sparse direct factorizations.
//!
//! The numeric kernels (fill-reducing orderings, supernodal Cholesky,
//! partial-pivoting LU) come from `faer`; this module owns the conversion
//! from [`SparseMatrix`] and the error contract.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{MatMut, Side};

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    Cholesky,
    Lu,
}

enum Inner {
    Cholesky(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

pub struct Factorization {
    inner: Inner,
    n: usize,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("kind", &self.kind())
            .field("n", &self.n)
            .finish()
    }
}

fn to_faer(a: &SparseMatrix) -> SparseColMat<usize, f64> {
    // the CSR arrays of Aᵀ are the CSC arrays of A
    let t = a.transpose();
    let symbolic = SymbolicSparseColMat::new_checked(
        a.nrows(),
        a.ncols(),
        t.row_ptr().to_vec(),
        None,
        t.col_idx().to_vec(),
    );
    SparseColMat::new(symbolic, t.values().to_vec())
}

fn check_square(a: &SparseMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    Ok(())
}

impl Factorization {
    /// Cholesky when `a` is symmetric and positive definite, LU otherwise.
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        check_square(a)?;
        if a.is_symmetric(1e-12 * a.max_abs()) {
            if let Ok(f) = Self::cholesky(a) {
                return Ok(f);
            }
        }
        Self::lu(a)
    }

    pub fn cholesky(a: &SparseMatrix) -> Result<Self> {
        check_square(a)?;
        let m = to_faer(a);
        let symbolic = SymbolicLlt::try_new(m.symbolic(), Side::Lower).map_err(|_| Error::NotSpd)?;
        let llt = Llt::try_new_with_symbolic(symbolic, m.as_ref(), Side::Lower).map_err(|_| Error::NotSpd)?;
        Self::checked(Inner::Cholesky(llt), a.nrows())
    }

    pub fn lu(a: &SparseMatrix) -> Result<Self> {
        check_square(a)?;
        let m = to_faer(a);
        let symbolic = SymbolicLu::try_new(m.symbolic()).map_err(|_| Error::Singular(0))?;
        Self::numeric_lu(symbolic, &m)
    }

    fn numeric_lu(symbolic: SymbolicLu<usize>, m: &SparseColMat<usize, f64>) -> Result<Self> {
        let map = |e: LuError| match e {
            LuError::SymbolicSingular { index } => Error::Singular(index),
            LuError::Generic(_) => Error::Singular(0),
        };
        // an exactly zero pivot panics inside faer instead of returning an error
        let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            Lu::try_new_with_symbolic(symbolic, m.as_ref())
        }))
        .map_err(|_| Error::Singular(0))?
        .map_err(map)?;
        Self::checked(Inner::Lu(lu), m.nrows())
    }

    /// Rejects numerically singular factors by probing with one solve.
    fn checked(inner: Inner, n: usize) -> Result<Self> {
        let f = Factorization { inner, n };
        let probe = f.solve_unchecked(vec![1.0; n]);
        if let Some(i) = probe.iter().position(|v| !v.is_finite()) {
            return Err(Error::Singular(i));
        }
        Ok(f)
    }

    pub fn kind(&self) -> FactorKind {
        match self.inner {
            Inner::Cholesky(_) => FactorKind::Cholesky,
            Inner::Lu(_) => FactorKind::Lu,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn solve_unchecked(&self, mut x: Vec<f64>) -> Vec<f64> {
        let n = self.n;
        let rhs = MatMut::from_column_major_slice_mut(&mut x, n, 1);
        match &self.inner {
            Inner::Cholesky(f) => f.solve_in_place(rhs),
            Inner::Lu(f) => f.solve_in_place(rhs),
        }
        x
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let x = self.solve_unchecked(b.to_vec());
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Singular(i));
        }
        Ok(x)
    }
}

/// Symbolic LU analysis shared by matrices with one sparsity pattern.
pub struct LuPattern {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic: SymbolicLu<usize>,
}

impl LuPattern {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        check_square(a)?;
        let m = to_faer(a);
        let symbolic = SymbolicLu::try_new(m.symbolic()).map_err(|_| Error::Singular(0))?;
        Ok(LuPattern {
            row_ptr: a.row_ptr().to_vec(),
            col_idx: a.col_idx().to_vec(),
            symbolic,
        })
    }

    pub fn matches(&self, a: &SparseMatrix) -> bool {
        a.row_ptr() == self.row_ptr.as_slice() && a.col_idx() == self.col_idx.as_slice()
    }

    /// Numeric LU of `a`, which must have this pattern.
    pub fn factorize(&self, a: &SparseMatrix) -> Result<Factorization> {
        if !self.matches(a) {
            return Err(Error::InvalidInput("matrix does not have the analysed sparsity pattern".into()));
        }
        Factorization::numeric_lu(self.symbolic.clone(), &to_faer(a))
    }
}

pub fn factorize(a: &SparseMatrix) -> Result<Factorization> {
    Factorization::new(a)
}

pub fn solve(f: &Factorization, b: &[f64]) -> Result<Vec<f64>> {
    f.solve(b)
}
