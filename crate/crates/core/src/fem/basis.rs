//! Lagrange shape functions on the reference triangle.
//!
//! Local numbering: vertex functions first, then (P2 only) the edge
//! midpoints of `(v0,v1)`, `(v1,v2)`, `(v2,v0)`.

use crate::error::{Error, Result};

pub const MAX_LOCAL: usize = 6;

/// Local edges as pairs of local vertex numbers, in midpoint-DOF order.
pub const LOCAL_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

const GRAD_LAMBDA: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

#[derive(Clone, Copy, Debug)]
pub struct BasisEval {
    pub n: usize,
    pub values: [f64; MAX_LOCAL],
    /// Gradients with respect to the reference coordinates `(ξ, η)`.
    pub grads: [[f64; 2]; MAX_LOCAL],
}

impl BasisEval {
    pub fn values(&self) -> &[f64] {
        &self.values[..self.n]
    }

    pub fn grads(&self) -> &[[f64; 2]] {
        &self.grads[..self.n]
    }
}

pub fn n_local(degree: usize) -> Result<usize> {
    match degree {
        1 => Ok(3),
        2 => Ok(6),
        k => Err(Error::UnsupportedDegree(k)),
    }
}

/// Evaluates all local basis functions at the barycentric point `l`.
pub fn eval_basis(degree: usize, l: [f64; 3]) -> Result<BasisEval> {
    let n = n_local(degree)?;
    let mut e = BasisEval {
        n,
        values: [0.0; MAX_LOCAL],
        grads: [[0.0; 2]; MAX_LOCAL],
    };
    if degree == 1 {
        e.values[..3].copy_from_slice(&l);
        e.grads[..3].copy_from_slice(&GRAD_LAMBDA);
        return Ok(e);
    }
    for i in 0..3 {
        e.values[i] = l[i] * (2.0 * l[i] - 1.0);
        let s = 4.0 * l[i] - 1.0;
        e.grads[i] = [s * GRAD_LAMBDA[i][0], s * GRAD_LAMBDA[i][1]];
    }
    for (m, [i, j]) in LOCAL_EDGES.into_iter().enumerate() {
        e.values[3 + m] = 4.0 * l[i] * l[j];
        e.grads[3 + m] = [
            4.0 * (l[i] * GRAD_LAMBDA[j][0] + l[j] * GRAD_LAMBDA[i][0]),
            4.0 * (l[i] * GRAD_LAMBDA[j][1] + l[j] * GRAD_LAMBDA[i][1]),
        ];
    }
    Ok(e)
}

/// Barycentric coordinates of the local nodes.
pub fn local_nodes(degree: usize) -> Result<Vec<[f64; 3]>> {
    let mut nodes = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    match degree {
        1 => {}
        2 => nodes.extend([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
        k => return Err(Error::UnsupportedDegree(k)),
    }
    Ok(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bary(rng: &mut impl Rng) -> [f64; 3] {
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
        [1.0 - a - b, a, b]
    }

    #[test]
    fn p1_at_barycenter() {
        let e = eval_basis(1, [1.0 / 3.0; 3]).unwrap();
        for v in e.values() {
            assert!((v - 1.0 / 3.0).abs() < 1e-16);
        }
    }

    #[test]
    fn nodal_property() {
        for degree in [1, 2] {
            let nodes = local_nodes(degree).unwrap();
            for (i, &node) in nodes.iter().enumerate() {
                let e = eval_basis(degree, node).unwrap();
                for (j, v) in e.values().iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-15, "degree {degree} node {i} basis {j}");
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_and_zero_gradient_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let l = random_bary(&mut rng);
            for degree in [1, 2] {
                let e = eval_basis(degree, l).unwrap();
                assert!((e.values().iter().sum::<f64>() - 1.0).abs() < 1e-14);
                let gx: f64 = e.grads().iter().map(|g| g[0]).sum();
                let gy: f64 = e.grads().iter().map(|g| g[1]).sum();
                assert!(gx.abs() < 1e-14 && gy.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for _ in 0..20 {
            let l = random_bary(&mut rng);
            let (xi, eta) = (l[1], l[2]);
            let at = |x: f64, y: f64| eval_basis(2, [1.0 - x - y, x, y]).unwrap();
            let e = at(xi, eta);
            let (px, mx, py, my) = (at(xi + h, eta), at(xi - h, eta), at(xi, eta + h), at(xi, eta - h));
            for i in 0..6 {
                let fd = [(px.values[i] - mx.values[i]) / (2.0 * h), (py.values[i] - my.values[i]) / (2.0 * h)];
                assert!((fd[0] - e.grads[i][0]).abs() < 1e-8 && (fd[1] - e.grads[i][1]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn degree_three_rejected() {
        assert!(matches!(eval_basis(3, [1.0, 0.0, 0.0]), Err(Error::UnsupportedDegree(3))));
    }
}
