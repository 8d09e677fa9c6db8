//! Lagrange P1/P2 spaces, shape functions and triangle quadrature.

pub mod basis;
pub mod quadrature;
pub mod space;

pub use basis::{eval_basis, BasisEval};
pub use quadrature::{quadrature, QuadratureRule};
pub use space::{FeSpace, SpaceFingerprint};

use crate::mesh::Point;

/// Affine map from the reference triangle onto a physical cell.
#[derive(Clone, Copy, Debug)]
pub struct CellMap {
    origin: Point,
    jac: [[f64; 2]; 2],
    det: f64,
    inv_t: [[f64; 2]; 2],
}

impl CellMap {
    pub fn new(p: [Point; 3]) -> Self {
        let jac = [[p[1][0] - p[0][0], p[2][0] - p[0][0]], [p[1][1] - p[0][1], p[2][1] - p[0][1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        // (J⁻¹)ᵀ
        let inv_t = [[jac[1][1] / det, -jac[1][0] / det], [-jac[0][1] / det, jac[0][0] / det]];
        CellMap {
            origin: p[0],
            jac,
            det,
            inv_t,
        }
    }

    /// Twice the cell area.
    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn point(&self, l: [f64; 3]) -> Point {
        [
            self.origin[0] + self.jac[0][0] * l[1] + self.jac[0][1] * l[2],
            self.origin[1] + self.jac[1][0] * l[1] + self.jac[1][1] * l[2],
        ]
    }

    /// Physical gradient from a reference gradient.
    #[inline]
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }

    /// Barycentric coordinates of a physical point.
    pub fn barycentric(&self, p: Point) -> [f64; 3] {
        let d = [p[0] - self.origin[0], p[1] - self.origin[1]];
        // ξ = (J⁻¹ d)₀, η = (J⁻¹ d)₁ and J⁻¹ = (inv_t)ᵀ
        let xi = self.inv_t[0][0] * d[0] + self.inv_t[1][0] * d[1];
        let eta = self.inv_t[0][1] * d[0] + self.inv_t[1][1] * d[1];
        [1.0 - xi - eta, xi, eta]
    }
}
