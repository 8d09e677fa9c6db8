//! Closed-form fields used as truths and manufactured solutions.

use std::f64::consts::PI;

/// A scalar field with its gradient, `u(x, y, t)`.
pub trait ScalarField: Send + Sync {
    fn value(&self, x: f64, y: f64, t: f64) -> f64;
    fn grad(&self, x: f64, y: f64, t: f64) -> [f64; 2];
}

/// A vector field with its Jacobian rows `[∇u_x, ∇u_y]`.
pub trait VectorField: Send + Sync {
    fn value(&self, x: f64, y: f64, t: f64) -> [f64; 2];
    fn jacobian(&self, x: f64, y: f64, t: f64) -> [[f64; 2]; 2];
}

/// `u = sin(t + 2πx + πy)`, solving `u_t − κΔu = cos(·) + 5π²κ sin(·)`.
#[derive(Clone, Copy, Debug)]
pub struct TravelingWave {
    pub kappa: f64,
}

impl TravelingWave {
    pub fn forcing(&self, x: f64, y: f64, t: f64) -> f64 {
        let s = t + 2.0 * PI * x + PI * y;
        s.cos() + 5.0 * PI * PI * self.kappa * s.sin()
    }
}

impl ScalarField for TravelingWave {
    fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        (t + 2.0 * PI * x + PI * y).sin()
    }

    fn grad(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let c = (t + 2.0 * PI * x + PI * y).cos();
        [2.0 * PI * c, PI * c]
    }
}

/// `sin πx sin πy`.
#[derive(Clone, Copy, Debug)]
pub struct SineBump;

impl ScalarField for SineBump {
    fn value(&self, x: f64, y: f64, _t: f64) -> f64 {
        (PI * x).sin() * (PI * y).sin()
    }

    fn grad(&self, x: f64, y: f64, _t: f64) -> [f64; 2] {
        [PI * (PI * x).cos() * (PI * y).sin(), PI * (PI * x).sin() * (PI * y).cos()]
    }
}

/// `curl ψ = (∂yψ, −∂xψ)` for `ψ = sin²(πx) sin²(πy)`; divergence free and
/// zero on the unit square's boundary.
#[derive(Clone, Copy, Debug)]
pub struct CurlBump;

impl VectorField for CurlBump {
    fn value(&self, x: f64, y: f64, _t: f64) -> [f64; 2] {
        let (sx, cx, sy, cy) = ((PI * x).sin(), (PI * x).cos(), (PI * y).sin(), (PI * y).cos());
        [2.0 * PI * sx * sx * sy * cy, -2.0 * PI * sx * cx * sy * sy]
    }

    fn jacobian(&self, x: f64, y: f64, _t: f64) -> [[f64; 2]; 2] {
        let (sx, cx, sy, cy) = ((PI * x).sin(), (PI * x).cos(), (PI * y).sin(), (PI * y).cos());
        let p2 = 2.0 * PI * PI;
        // sin 2θ = 2 s c, cos 2θ = c² − s²
        [
            [p2 * 2.0 * sx * cx * sy * cy, p2 * sx * sx * (cy * cy - sy * sy)],
            [-p2 * (cx * cx - sx * sx) * sy * sy, -p2 * sx * cx * 2.0 * sy * cy],
        ]
    }
}

/// Rigid rotation `(−y, x)`.
#[derive(Clone, Copy, Debug)]
pub struct Rotation;

impl VectorField for Rotation {
    fn value(&self, x: f64, y: f64, _t: f64) -> [f64; 2] {
        [-y, x]
    }

    fn jacobian(&self, _x: f64, _y: f64, _t: f64) -> [[f64; 2]; 2] {
        [[0.0, -1.0], [1.0, 0.0]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check_scalar(f: &dyn ScalarField, x: f64, y: f64, t: f64) {
        let h = 1e-6;
        let g = f.grad(x, y, t);
        let gx = (f.value(x + h, y, t) - f.value(x - h, y, t)) / (2.0 * h);
        let gy = (f.value(x, y + h, t) - f.value(x, y - h, t)) / (2.0 * h);
        assert!((g[0] - gx).abs() < 1e-7 && (g[1] - gy).abs() < 1e-7);
    }

    #[test]
    fn gradients_match_differences() {
        for &(x, y) in &[(0.1, 0.7), (0.45, 0.2), (0.9, 0.93)] {
            fd_check_scalar(&TravelingWave { kappa: 1.0 }, x, y, 0.3);
            fd_check_scalar(&SineBump, x, y, 0.0);
            let h = 1e-6;
            let j = CurlBump.jacobian(x, y, 0.0);
            for comp in 0..2 {
                let dx = (CurlBump.value(x + h, y, 0.0)[comp] - CurlBump.value(x - h, y, 0.0)[comp]) / (2.0 * h);
                let dy = (CurlBump.value(x, y + h, 0.0)[comp] - CurlBump.value(x, y - h, 0.0)[comp]) / (2.0 * h);
                assert!((j[comp][0] - dx).abs() < 1e-6 && (j[comp][1] - dy).abs() < 1e-6);
            }
            assert!((j[0][0] + j[1][1]).abs() < 1e-12);
        }
    }

    #[test]
    fn wave_examples() {
        let w = TravelingWave { kappa: 1.0 };
        assert!((w.value(0.25, 0.0, 0.0) - 1.0).abs() < 1e-15);
        // u_t − Δu = f at a sample point via differences
        let (x, y, t, h) = (0.3, 0.6, 0.2, 1e-4);
        let ut = (w.value(x, y, t + h) - w.value(x, y, t - h)) / (2.0 * h);
        let lap = (w.value(x + h, y, t) + w.value(x - h, y, t) + w.value(x, y + h, t) + w.value(x, y - h, t)
            - 4.0 * w.value(x, y, t))
            / (h * h);
        assert!((ut - lap - w.forcing(x, y, t)).abs() < 1e-4);
    }
}
