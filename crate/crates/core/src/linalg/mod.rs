//! Sparse storage, a reusable direct factorization and preconditioned CG.

pub mod cg;
pub mod direct;
pub mod sparse;

pub use cg::{cg_solve, CgOptions, CgOutcome};
pub use direct::{factorize, solve, FactorKind, Factorization, LuPattern};
pub use sparse::{dot, norm2, SparseMatrix, Triplets};

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// 1D Laplacian plus a shift: SPD and tridiagonal.
    fn shifted_laplacian(n: usize) -> SparseMatrix {
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, 2.5);
            if i > 0 {
                t.push(i, i - 1, -1.0);
                t.push(i - 1, i, -1.0);
            }
        }
        t.build()
    }

    #[test]
    fn direct_and_cg_agree() {
        let a = shifted_laplacian(200);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let direct = factorize(&a).unwrap().solve(&b).unwrap();
        let tol = 1e-11;
        let iterative = cg_solve(&a, &b, CgOptions { tol, max_iter: None }).unwrap();
        let diff = direct.iter().zip(&iterative.x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(diff <= (10.0 * tol).max(1e-9), "diff {diff}");
    }
}
