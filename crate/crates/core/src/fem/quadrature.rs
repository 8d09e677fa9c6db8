//! Quadrature on the reference triangle `{(ξ, η) : ξ, η ≥ 0, ξ + η ≤ 1}`.
//!
//! Points are stored in barycentric form `(λ₁, λ₂, λ₃)` with `ξ = λ₂`,
//! `η = λ₃`; weights sum to the reference area 1/2.

use crate::error::{Error, Result};

pub const MAX_EXACTNESS: usize = 10;

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Integrates `f(λ)` over the reference triangle.
    pub fn integrate(&self, mut f: impl FnMut([f64; 3]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

/// Smallest tabulated rule that integrates every polynomial of total degree
/// `min_exactness` exactly.
pub fn quadrature(min_exactness: usize) -> Result<QuadratureRule> {
    match min_exactness {
        0 | 1 => Ok(centroid()),
        2 => Ok(strang_fix_3()),
        3 | 4 => Ok(dunavant_6()),
        5 => Ok(radon_7()),
        d if d <= MAX_EXACTNESS => Ok(collapsed_gauss(d)),
        d => Err(Error::QuadratureUnavailable(d)),
    }
}

fn centroid() -> QuadratureRule {
    QuadratureRule {
        points: vec![[1.0 / 3.0; 3]],
        weights: vec![0.5],
        exactness: 1,
    }
}

fn strang_fix_3() -> QuadratureRule {
    let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
    QuadratureRule {
        points: vec![[a, b, b], [b, a, b], [b, b, a]],
        weights: vec![1.0 / 6.0; 3],
        exactness: 2,
    }
}

/// Pushes the three permutations of `(1 - 2a, a, a)` with weight `w`.
fn orbit3(points: &mut Vec<[f64; 3]>, weights: &mut Vec<f64>, a: f64, w: f64) {
    let b = 1.0 - 2.0 * a;
    points.extend([[b, a, a], [a, b, a], [a, a, b]]);
    weights.extend([w; 3]);
}

fn dunavant_6() -> QuadratureRule {
    let mut points = Vec::with_capacity(6);
    let mut weights = Vec::with_capacity(6);
    orbit3(&mut points, &mut weights, 0.445_948_490_915_964_886, 0.5 * 0.223_381_589_678_011_466);
    orbit3(&mut points, &mut weights, 0.091_576_213_509_770_743, 0.5 * 0.109_951_743_655_321_868);
    QuadratureRule {
        points,
        weights,
        exactness: 4,
    }
}

fn radon_7() -> QuadratureRule {
    let s15 = 15f64.sqrt();
    let mut points = vec![[1.0 / 3.0; 3]];
    let mut weights = vec![9.0 / 80.0];
    orbit3(&mut points, &mut weights, (6.0 - s15) / 21.0, (155.0 - s15) / 2400.0);
    orbit3(&mut points, &mut weights, (6.0 + s15) / 21.0, (155.0 + s15) / 2400.0);
    QuadratureRule {
        points,
        weights,
        exactness: 5,
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, `n ≥ 1`.
pub(crate) fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // P_n(x) and P_{n-1}(x) by the three-term recurrence
            let (mut prev, mut curr) = (1.0, x);
            for k in 2..=n {
                let next = ((2 * k - 1) as f64 * x * curr - (k - 1) as f64 * prev) / k as f64;
                prev = curr;
                curr = next;
            }
            if n == 1 {
                prev = 1.0;
            }
            dp = n as f64 * (x * curr - prev) / (x * x - 1.0);
            let dx = curr / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Conical product rule from the square `[0,1]²` via `ξ = s`,
/// `η = t (1 − s)`. Positive weights and interior points by construction.
fn collapsed_gauss(degree: usize) -> QuadratureRule {
    // the Jacobian adds one degree in s
    let n = (degree + 3) / 2;
    let (s_nodes, s_weights) = gauss_legendre_unit(n);
    let (t_nodes, t_weights) = gauss_legendre_unit(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&s, &ws) in s_nodes.iter().zip(&s_weights) {
        for (&t, &wt) in t_nodes.iter().zip(&t_weights) {
            let xi = s;
            let eta = t * (1.0 - s);
            points.push([1.0 - xi - eta, xi, eta]);
            weights.push(ws * wt * (1.0 - s));
        }
    }
    QuadratureRule {
        points,
        weights,
        exactness: degree,
    }
}
