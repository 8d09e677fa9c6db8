use crate::error::{Error, Result};

/// Accumulates `(row, col, value)` entries; duplicates are summed on
/// compression.
#[derive(Clone, Debug, Default)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Triplets {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Adds every entry of `m`, scaled, at block offset `(r0, c0)`.
    pub fn add_block(&mut self, m: &SparseMatrix, r0: usize, c0: usize, scale: f64) {
        for (i, j, v) in m.iter() {
            self.push(r0 + i, c0 + j, scale * v);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn build(mut self) -> SparseMatrix {
        self.entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        let mut k = 0;
        while k < self.entries.len() {
            let (r, c, mut v) = self.entries[k];
            k += 1;
            while k < self.entries.len() && self.entries[k].0 == r && self.entries[k].1 == c {
                v += self.entries[k].2;
                k += 1;
            }
            if v != 0.0 {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for r in 0..self.nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Compressed sparse row matrix with sorted, unique column indices and no
/// stored zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Triplets::new(nrows, ncols).build()
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Triplets::with_capacity(n, n, n);
        (0..n).for_each(|i| t.push(i, i, 1.0));
        t.build()
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut t = Triplets::with_capacity(d.len(), d.len(), d.len());
        d.iter().enumerate().for_each(|(i, &v)| t.push(i, i, v));
        t.build()
    }

    /// Same pattern, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: values.len(),
            });
        }
        Ok(SparseMatrix { values, ..self.clone() })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = Triplets::new(rows.len(), ncols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                t.push(i, j, v);
            }
        }
        t.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map_or(0.0, |k| v[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                got: x.len(),
            });
        }
        if y.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                got: y.len(),
            });
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum();
        }
        Ok(())
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let ay = self.matvec(y)?;
        if x.len() != ay.len() {
            return Err(Error::DimensionMismatch {
                expected: ay.len(),
                got: x.len(),
            });
        }
        Ok(x.iter().zip(&ay).map(|(a, b)| a * b).sum())
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut t = Triplets::with_capacity(self.ncols, self.nrows, self.nnz());
        for (i, j, v) in self.iter() {
            t.push(j, i, v);
        }
        t.build()
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        if s == 0.0 {
            return SparseMatrix::zeros(self.nrows, self.ncols);
        }
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// `Σ sᵢ Aᵢ` over matrices of equal shape.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> Result<SparseMatrix> {
        let (nrows, ncols) = terms
            .first()
            .map(|(_, m)| (m.nrows, m.ncols))
            .ok_or_else(|| Error::InvalidInput("empty linear combination".into()))?;
        let cap = terms.iter().map(|(_, m)| m.nnz()).sum();
        let mut t = Triplets::with_capacity(nrows, ncols, cap);
        for (s, m) in terms {
            if m.nrows != nrows || m.ncols != ncols {
                return Err(Error::DimensionMismatch {
                    expected: nrows * ncols,
                    got: m.nrows * m.ncols,
                });
            }
            if *s != 0.0 {
                t.add_block(m, 0, 0, *s);
            }
        }
        Ok(t.build())
    }

    /// Two-component block-diagonal copy `diag(A, A)`.
    pub fn block_diag2(&self) -> SparseMatrix {
        let mut t = Triplets::with_capacity(2 * self.nrows, 2 * self.ncols, 2 * self.nnz());
        t.add_block(self, 0, 0, 1.0);
        t.add_block(self, self.nrows, self.ncols, 1.0);
        t.build()
    }

    /// Largest `|a_ij − a_ji|`, or infinity for non-square matrices.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        self.iter().map(|(i, j, v)| (v - self.get(j, i)).abs()).fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.iter() {
            d[i][j] = v;
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_sum_and_zeros_drop() {
        let mut t = Triplets::new(2, 3);
        t.push(1, 2, 1.5);
        t.push(0, 1, 2.0);
        t.push(1, 2, -0.5);
        t.push(0, 0, 1.0);
        t.push(0, 0, -1.0);
        let m = t.build();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 2), 1.0);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.row_ptr(), &[0, 1, 2]);
    }

    #[test]
    fn matvec_and_transpose() {
        let m = SparseMatrix::from_dense(&[vec![1.0, 2.0, 0.0], vec![0.0, -1.0, 3.0]]);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]).unwrap(), vec![3.0, 2.0]);
        let t = m.transpose();
        assert_eq!(t.matvec(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0, 3.0]);
        assert!(matches!(m.matvec(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn combination_and_blocks() {
        let a = SparseMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let i = SparseMatrix::identity(2);
        let c = SparseMatrix::linear_combination(&[(1.0, &a), (-2.0, &i)]).unwrap();
        assert_eq!(c.to_dense(), vec![vec![0.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(c.nnz(), 3);
        let b = a.block_diag2();
        assert_eq!(b.nrows(), 4);
        assert_eq!(b.get(3, 3), 3.0);
        assert_eq!(b.get(1, 2), 0.0);
        assert!(a.is_symmetric(0.0));
    }
}
