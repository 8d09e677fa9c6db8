//! Taylor-Hood saddle systems and the steady Stokes solve.

use std::collections::BTreeMap;

use super::scalar::{PinSource, PinnedOperator};
use crate::assembly::{divergence_matrix, load_vector, stiffness_matrix};
use crate::error::{Error, Result};
use crate::fem::FeSpace;
use crate::linalg::{SparseMatrix, Triplets};
use crate::mesh::Marker;

/// Constant Dirichlet data for selected velocity components on one marker.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityBc {
    pub marker: Marker,
    pub value: [f64; 2],
    pub components: [bool; 2],
}

impl VelocityBc {
    pub fn no_slip(marker: Marker) -> Self {
        VelocityBc {
            marker,
            value: [0.0; 2],
            components: [true, true],
        }
    }

    pub fn plug(marker: Marker, value: [f64; 2]) -> Self {
        VelocityBc {
            marker,
            value,
            components: [true, true],
        }
    }

    /// No penetration through a horizontal wall; tangential velocity free.
    pub fn free_slip_horizontal(marker: Marker) -> Self {
        VelocityBc {
            marker,
            value: [0.0; 2],
            components: [false, true],
        }
    }
}

/// Pins for a list of boundary conditions; later entries win at shared DOFs.
pub(crate) fn velocity_pins(vspace: &FeSpace, bcs: &[VelocityBc]) -> Result<BTreeMap<usize, PinSource>> {
    let mut pins = BTreeMap::new();
    for bc in bcs {
        for &d in vspace.boundary_dofs(bc.marker)? {
            for comp in 0..2 {
                if bc.components[comp] {
                    pins.insert(vspace.component_offset(comp) + d, PinSource::Fixed(bc.value[comp]));
                }
            }
        }
    }
    Ok(pins)
}

/// Block layout `[u, p, λ]` for
/// `[A, −Bᵀ, 0; −B, 0, m; 0, mᵀ, 0]`, where the optional multiplier `λ`
/// enforces `∫ p = 0`.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    b: SparseMatrix,
    mean: Option<Vec<f64>>,
    nv: usize,
    np: usize,
}

impl SaddleSystem {
    pub fn new(vspace: &FeSpace, pspace: &FeSpace, mean_zero_pressure: bool) -> Result<Self> {
        let b = divergence_matrix(vspace, pspace)?;
        let mean = if mean_zero_pressure {
            Some(load_vector(pspace, |_, _, _| 1.0, 0.0)?)
        } else {
            None
        };
        Ok(SaddleSystem {
            b,
            mean,
            nv: vspace.n_dofs(),
            np: pspace.n_dofs(),
        })
    }

    pub fn dim(&self) -> usize {
        self.nv + self.np + usize::from(self.mean.is_some())
    }

    pub fn divergence(&self) -> &SparseMatrix {
        &self.b
    }

    pub fn assemble(&self, a: &SparseMatrix) -> Result<SparseMatrix> {
        if a.nrows() != self.nv || a.ncols() != self.nv {
            return Err(Error::DimensionMismatch {
                expected: self.nv,
                got: a.nrows(),
            });
        }
        let n = self.dim();
        let mut t = Triplets::with_capacity(n, n, a.nnz() + 2 * self.b.nnz() + 2 * self.np);
        t.add_block(a, 0, 0, 1.0);
        for (i, j, v) in self.b.iter() {
            t.push(self.nv + i, j, -v);
            t.push(j, self.nv + i, -v);
        }
        if let Some(m) = &self.mean {
            let l = self.nv + self.np;
            for (i, &v) in m.iter().enumerate() {
                t.push(self.nv + i, l, v);
                t.push(l, self.nv + i, v);
            }
        }
        Ok(t.build())
    }

    /// Pads a momentum right-hand side with zeros for the other blocks.
    pub fn extend_rhs(&self, mut f: Vec<f64>) -> Vec<f64> {
        f.resize(self.dim(), 0.0);
        f
    }

    pub fn split(&self, mut x: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
        let p = x[self.nv..self.nv + self.np].to_vec();
        x.truncate(self.nv);
        (x, p)
    }
}

/// `νAu − Bᵀp = 0`, `Bu = 0` with the given Dirichlet data; boundaries not
/// listed get the natural do-nothing condition.
pub fn steady_stokes_solve(
    vspace: &FeSpace,
    pspace: &FeSpace,
    nu: f64,
    bcs: &[VelocityBc],
    mean_zero_pressure: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let saddle = SaddleSystem::new(vspace, pspace, mean_zero_pressure)?;
    let a = stiffness_matrix(vspace, nu)?;
    let pins = velocity_pins(vspace, bcs)?;
    let op = PinnedOperator::new(&saddle.assemble(&a)?, &pins)?;
    let values: Vec<f64> = op
        .sources
        .iter()
        .map(|s| match s {
            PinSource::Fixed(v) => *v,
            _ => 0.0,
        })
        .collect();
    let x = op.solve(vec![0.0; saddle.dim()], &values)?;
    Ok(saddle.split(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::CellMap;
    use crate::linalg::norm2;
    use crate::mesh::{Mesh, Rect};
    use std::sync::Arc;

    fn spaces(mesh: Mesh) -> (FeSpace, FeSpace) {
        let mesh = Arc::new(mesh);
        (FeSpace::new(mesh.clone(), 2, 2).unwrap(), FeSpace::new(mesh, 1, 1).unwrap())
    }

    #[test]
    fn closed_cavity_at_rest() {
        let (v, p) = spaces(Mesh::uniform_rect(4, 4, Rect::UNIT).unwrap());
        let walls: Vec<_> = [Marker::Bottom, Marker::Top, Marker::Left, Marker::Right]
            .into_iter()
            .map(VelocityBc::no_slip)
            .collect();
        let (u, pr) = steady_stokes_solve(&v, &p, 1.0, &walls, true).unwrap();
        assert!(u.iter().chain(&pr).all(|x| x.abs() < 1e-14));
    }

    /// `∫ u_x dy` along the vertical line `x`, by locating points in cells.
    fn flux_at(space: &FeSpace, u: &[f64], x: f64) -> f64 {
        let mesh = space.mesh();
        let samples = 400;
        let mut total = 0.0;
        for k in 0..samples {
            let y = (k as f64 + 0.5) / samples as f64;
            let c = (0..mesh.n_cells())
                .find(|&c| {
                    let l = CellMap::new(mesh.cell_points(c)).barycentric([x, y]);
                    l.iter().all(|&v| v >= -1e-12)
                })
                .unwrap();
            let l = space.cell_map(c).barycentric([x, y]);
            total += space.eval_in_cell(u, 0, c, l) / samples as f64;
        }
        total
    }

    #[test]
    fn straight_channel_conserves_flux() {
        let (v, p) = spaces(Mesh::uniform_rect(16, 4, Rect::new(0.0, 0.0, 4.0, 1.0)).unwrap());
        let bcs = [
            VelocityBc::plug(Marker::Left, [3.0, 0.0]),
            VelocityBc::no_slip(Marker::Bottom),
            VelocityBc::no_slip(Marker::Top),
        ];
        let saddle = SaddleSystem::new(&v, &p, false).unwrap();
        let (u, _) = steady_stokes_solve(&v, &p, 0.01, &bcs, false).unwrap();
        assert!(norm2(&saddle.divergence().matvec(&u).unwrap()) <= 1e-9);
        let inflow = flux_at(&v, &u, 0.0);
        for x in [0.9, 2.1, 3.3, 4.0] {
            let f = flux_at(&v, &u, x);
            assert!((f - inflow).abs() <= 0.01 * inflow.abs(), "cut {x}: {f} vs {inflow}");
        }
    }
}
