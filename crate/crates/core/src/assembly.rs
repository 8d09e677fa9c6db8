//! Sparse operator assembly.
//!
//! Every element integral uses a quadrature rule that is exact for the
//! polynomial integrand, so assembled operators carry no quadrature error.
//! Dirichlet data is imposed by symmetric elimination: constrained rows and
//! columns are replaced by identity, and the eliminated columns are lifted
//! into the right-hand side.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fem::basis::{eval_basis, MAX_LOCAL};
use crate::fem::{quadrature, CellMap, FeSpace, QuadratureRule};
use crate::linalg::{SparseMatrix, Triplets};
use crate::mesh::{Marker, Point};

/// Basis values and physical gradients of one space on one cell.
pub(crate) struct CellValues {
    rule: QuadratureRule,
    n: usize,
    phi: Vec<[f64; MAX_LOCAL]>,
    ref_grads: Vec<[[f64; 2]; MAX_LOCAL]>,
    pub dphi: Vec<[[f64; 2]; MAX_LOCAL]>,
    pub jxw: Vec<f64>,
    pub points: Vec<Point>,
}

impl CellValues {
    pub fn new(degree: usize, exactness: usize) -> Result<Self> {
        let rule = quadrature(exactness)?;
        let mut phi = Vec::with_capacity(rule.len());
        let mut ref_grads = Vec::with_capacity(rule.len());
        let mut n = 0;
        for &l in &rule.points {
            let e = eval_basis(degree, l)?;
            n = e.n;
            phi.push(e.values);
            ref_grads.push(e.grads);
        }
        let nq = rule.len();
        Ok(CellValues {
            rule,
            n,
            phi,
            ref_grads,
            dphi: vec![[[0.0; 2]; MAX_LOCAL]; nq],
            jxw: vec![0.0; nq],
            points: vec![[0.0; 2]; nq],
        })
    }

    /// Same quadrature points as `other`, possibly a different degree.
    pub fn sharing_rule(degree: usize, other: &CellValues) -> Result<Self> {
        let mut v = CellValues::new(degree, 0)?;
        v.rule = other.rule.clone();
        v.phi.clear();
        v.ref_grads.clear();
        for &l in &v.rule.points {
            let e = eval_basis(degree, l)?;
            v.phi.push(e.values);
            v.ref_grads.push(e.grads);
        }
        let nq = v.rule.len();
        v.dphi = vec![[[0.0; 2]; MAX_LOCAL]; nq];
        v.jxw = vec![0.0; nq];
        v.points = vec![[0.0; 2]; nq];
        Ok(v)
    }

    pub fn reinit(&mut self, map: &CellMap) {
        let det = map.det().abs();
        for q in 0..self.rule.len() {
            self.jxw[q] = self.rule.weights[q] * det;
            self.points[q] = map.point(self.rule.points[q]);
            for i in 0..self.n {
                self.dphi[q][i] = map.grad(self.ref_grads[q][i]);
            }
        }
    }

    pub fn nq(&self) -> usize {
        self.rule.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn phi(&self, q: usize) -> &[f64] {
        &self.phi[q][..self.n]
    }

    #[inline]
    pub fn dphi(&self, q: usize) -> &[[f64; 2]] {
        &self.dphi[q][..self.n]
    }
}

/// Scalar-block assembly over all cells of `test` (rows) × `trial` (cols).
fn assemble_scalar<F>(test: &FeSpace, trial: &FeSpace, exactness: usize, mut kernel: F) -> Result<SparseMatrix>
where
    F: FnMut(usize, &CellValues, &CellValues, &mut [[f64; MAX_LOCAL]; MAX_LOCAL]),
{
    if !test.same_mesh(trial) {
        return Err(Error::IncompatibleMeshes);
    }
    let mut tv = CellValues::new(test.degree(), exactness)?;
    let mut uv = CellValues::sharing_rule(trial.degree(), &tv)?;
    let (nt, nu) = (tv.n(), uv.n());
    let mesh = test.mesh();
    let mut trip = Triplets::with_capacity(test.n_scalar_dofs(), trial.n_scalar_dofs(), mesh.n_cells() * nt * nu);
    let mut local = [[0.0; MAX_LOCAL]; MAX_LOCAL];
    for c in 0..mesh.n_cells() {
        let map = test.cell_map(c);
        tv.reinit(&map);
        uv.reinit(&map);
        local.iter_mut().for_each(|r| r.fill(0.0));
        kernel(c, &tv, &uv, &mut local);
        let (rows, cols) = (test.cell_dofs(c), trial.cell_dofs(c));
        for i in 0..nt {
            for j in 0..nu {
                trip.push(rows[i], cols[j], local[i][j]);
            }
        }
    }
    Ok(trip.build())
}

fn expand_components(space: &FeSpace, scalar: SparseMatrix) -> SparseMatrix {
    if space.components() == 2 {
        scalar.block_diag2()
    } else {
        scalar
    }
}

/// `M_ij = ∫ φ_i φ_j`; block-diagonal for vector spaces.
pub fn mass_matrix(space: &FeSpace) -> Result<SparseMatrix> {
    let m = assemble_scalar(space, space, 2 * space.degree(), |_, v, _, local| {
        for q in 0..v.nq() {
            let phi = v.phi(q);
            for i in 0..v.n() {
                let wi = v.jxw[q] * phi[i];
                for j in i..v.n() {
                    local[i][j] += wi * phi[j];
                }
            }
        }
        symmetrize_upper(local, v.n());
    })?;
    Ok(expand_components(space, m))
}

/// `K_ij = coeff ∫ ∇φ_i · ∇φ_j`; block-diagonal for vector spaces.
pub fn stiffness_matrix(space: &FeSpace, coeff: f64) -> Result<SparseMatrix> {
    if !(coeff > 0.0 && coeff.is_finite()) {
        return Err(Error::InvalidInput(format!("diffusion coefficient must be positive, got {coeff}")));
    }
    let k = assemble_scalar(space, space, 2 * space.degree(), |_, v, _, local| {
        for q in 0..v.nq() {
            let g = v.dphi(q);
            for i in 0..v.n() {
                let gi = [coeff * v.jxw[q] * g[i][0], coeff * v.jxw[q] * g[i][1]];
                for j in i..v.n() {
                    local[i][j] += gi[0] * g[j][0] + gi[1] * g[j][1];
                }
            }
        }
        symmetrize_upper(local, v.n());
    })?;
    Ok(expand_components(space, k))
}

fn symmetrize_upper(local: &mut [[f64; MAX_LOCAL]; MAX_LOCAL], n: usize) {
    for i in 0..n {
        for j in 0..i {
            local[i][j] = local[j][i];
        }
    }
}

/// Value and divergence of a discrete vector field at every quadrature
/// point of the current cell.
fn velocity_at_points(vspace: &FeSpace, vel: &[f64], c: usize, vv: &CellValues, out: &mut Vec<([f64; 2], f64)>) {
    out.clear();
    let dofs = vspace.cell_dofs(c);
    let off = vspace.component_offset(1);
    for q in 0..vv.nq() {
        let (phi, dphi) = (vv.phi(q), vv.dphi(q));
        let mut u = [0.0; 2];
        let mut div = 0.0;
        for k in 0..vv.n() {
            let (ux, uy) = (vel[dofs[k]], vel[off + dofs[k]]);
            u[0] += ux * phi[k];
            u[1] += uy * phi[k];
            div += ux * dphi[k][0] + uy * dphi[k][1];
        }
        out.push((u, div));
    }
}

fn check_velocity(vspace: &FeSpace, vel: &[f64]) -> Result<()> {
    if vspace.components() != 2 {
        return Err(Error::InvalidInput("advecting velocity must live in a vector space".into()));
    }
    if vel.len() != vspace.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: vspace.n_dofs(),
            got: vel.len(),
        });
    }
    Ok(())
}

/// Transport operator `N_ij = ∫ (U·∇φ_j) φ_i`, plus `½ ∫ (∇·U) φ_j φ_i`
/// when `skew` is set.
pub fn convection_matrix(space: &FeSpace, vspace: &FeSpace, velocity: &[f64], skew: bool) -> Result<SparseMatrix> {
    if !space.same_mesh(vspace) {
        return Err(Error::IncompatibleMeshes);
    }
    check_velocity(vspace, velocity)?;
    let exactness = vspace.degree() + 2 * space.degree() - 1;
    let mut vv = CellValues::new(vspace.degree(), exactness)?;
    let mut at_q = Vec::new();
    let n = assemble_scalar(space, space, exactness, |c, v, _, local| {
        vv.reinit(&space.cell_map(c));
        velocity_at_points(vspace, velocity, c, &vv, &mut at_q);
        for q in 0..v.nq() {
            let (u, div) = at_q[q];
            let (phi, dphi) = (v.phi(q), v.dphi(q));
            let react = if skew { 0.5 * div } else { 0.0 };
            for i in 0..v.n() {
                let wi = v.jxw[q] * phi[i];
                for j in 0..v.n() {
                    local[i][j] += wi * (u[0] * dphi[j][0] + u[1] * dphi[j][1] + react * phi[j]);
                }
            }
        }
    })?;
    Ok(n)
}

/// Linearized convection with advecting field `a`, skew-symmetrized as
/// `½[b(a, w, v) − b(a, v, w)]`. Block-diagonal over the two components.
pub fn nse_convection_matrix(vspace: &FeSpace, a: &[f64]) -> Result<SparseMatrix> {
    check_velocity(vspace, a)?;
    let exactness = 3 * vspace.degree() - 1;
    let mut at_q = Vec::new();
    let k = assemble_scalar(vspace, vspace, exactness, |c, v, _, local| {
        velocity_at_points(vspace, a, c, v, &mut at_q);
        for q in 0..v.nq() {
            let (u, _) = at_q[q];
            let (phi, dphi) = (v.phi(q), v.dphi(q));
            let mut adv = [0.0; MAX_LOCAL];
            for j in 0..v.n() {
                adv[j] = u[0] * dphi[j][0] + u[1] * dphi[j][1];
            }
            for i in 0..v.n() {
                for j in 0..v.n() {
                    local[i][j] += 0.5 * v.jxw[q] * (adv[j] * phi[i] - adv[i] * phi[j]);
                }
            }
        }
    })?;
    Ok(k.block_diag2())
}

/// `B_ij = ∫ q_i (∇·φ_j)` with rows over the pressure space and columns over
/// the blocked velocity space.
pub fn divergence_matrix(vspace: &FeSpace, pspace: &FeSpace) -> Result<SparseMatrix> {
    if vspace.components() != 2 || pspace.components() != 1 {
        return Err(Error::InvalidInput("divergence needs a vector velocity and scalar pressure space".into()));
    }
    let exactness = vspace.degree() - 1 + pspace.degree();
    let mut parts = Vec::with_capacity(2);
    for comp in 0..2 {
        parts.push(assemble_scalar(pspace, vspace, exactness, |_, pv, uv, local| {
            for q in 0..pv.nq() {
                let (psi, dphi) = (pv.phi(q), uv.dphi(q));
                for i in 0..pv.n() {
                    let wi = pv.jxw[q] * psi[i];
                    for j in 0..uv.n() {
                        local[i][j] += wi * dphi[j][comp];
                    }
                }
            }
        })?);
    }
    let nv = vspace.n_scalar_dofs();
    let mut t = Triplets::with_capacity(pspace.n_dofs(), 2 * nv, parts[0].nnz() + parts[1].nnz());
    t.add_block(&parts[0], 0, 0, 1.0);
    t.add_block(&parts[1], 0, nv, 1.0);
    Ok(t.build())
}

/// `F_i = ∫ f φ_i` with a rule of exactness `2k + 1`.
pub fn load_vector(space: &FeSpace, f: impl Fn(f64, f64, f64) -> f64, t: f64) -> Result<Vec<f64>> {
    load_vector_with(space, f, t, 2 * space.degree() + 1)
}

pub fn load_vector_with(
    space: &FeSpace,
    f: impl Fn(f64, f64, f64) -> f64,
    t: f64,
    exactness: usize,
) -> Result<Vec<f64>> {
    if space.components() != 1 {
        return Err(Error::InvalidInput("scalar load on a vector space".into()));
    }
    let mut v = CellValues::new(space.degree(), exactness)?;
    let mut out = vec![0.0; space.n_dofs()];
    for c in 0..space.mesh().n_cells() {
        v.reinit(&space.cell_map(c));
        let dofs = space.cell_dofs(c);
        for q in 0..v.nq() {
            let [x, y] = v.points[q];
            let val = f(x, y, t);
            if !val.is_finite() {
                return Err(Error::NonFinite("load function"));
            }
            for (i, phi) in v.phi(q).iter().enumerate() {
                out[dofs[i]] += v.jxw[q] * val * phi;
            }
        }
    }
    Ok(out)
}

/// `F_i = coeff ∫ ∇u · ∇φ_i` for a known gradient field; for a vector space
/// `grad` returns the rows `∇u_x`, `∇u_y`.
pub fn gradient_load(space: &FeSpace, grad: impl Fn(f64, f64) -> [[f64; 2]; 2], coeff: f64) -> Result<Vec<f64>> {
    let mut v = CellValues::new(space.degree(), 2 * space.degree() + 2)?;
    let n = space.n_scalar_dofs();
    let mut out = vec![0.0; space.n_dofs()];
    for c in 0..space.mesh().n_cells() {
        v.reinit(&space.cell_map(c));
        let dofs = space.cell_dofs(c);
        for q in 0..v.nq() {
            let [x, y] = v.points[q];
            let g = grad(x, y);
            for comp in 0..space.components() {
                let off = comp * n;
                for (i, d) in v.dphi(q).iter().enumerate() {
                    out[off + dofs[i]] += coeff * v.jxw[q] * (g[comp][0] * d[0] + g[comp][1] * d[1]);
                }
            }
        }
    }
    Ok(out)
}

/// A square system together with the DOFs pinned by constraints.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub constrained: BTreeMap<usize, f64>,
}

impl LinearSystem {
    pub fn new(matrix: SparseMatrix, rhs: Vec<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || rhs.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: rhs.len(),
            });
        }
        Ok(LinearSystem {
            matrix,
            rhs,
            constrained: BTreeMap::new(),
        })
    }

    /// Pins `dofs` to `values` by symmetric elimination.
    pub fn constrain(self, pins: &[(usize, f64)]) -> Result<Self> {
        let mut constrained = self.constrained;
        for &(d, v) in pins {
            if d >= self.rhs.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.rhs.len(),
                    got: d,
                });
            }
            constrained.insert(d, v);
        }
        let dofs: Vec<usize> = constrained.keys().copied().collect();
        let values: Vec<f64> = constrained.values().copied().collect();
        let (matrix, elim) = Elimination::new(&self.matrix, &dofs)?;
        let mut rhs = self.rhs;
        elim.apply(&mut rhs, &values)?;
        Ok(LinearSystem {
            matrix,
            rhs,
            constrained,
        })
    }
}

/// Pins every DOF on edges carrying one of `markers` to `g` evaluated at the
/// DOF coordinate. For a vector space `g` is applied to every component.
pub fn apply_dirichlet(
    sys: LinearSystem,
    space: &FeSpace,
    markers: &[Marker],
    g: impl Fn(f64, f64, f64) -> f64,
    t: f64,
) -> Result<LinearSystem> {
    let pins = dirichlet_pins(space, markers, |x, y, t| [g(x, y, t); 2], t)?;
    sys.constrain(&pins)
}

/// `(dof, value)` pairs for Dirichlet data on the given markers; `g`
/// returns one value per component.
pub fn dirichlet_pins(
    space: &FeSpace,
    markers: &[Marker],
    g: impl Fn(f64, f64, f64) -> [f64; 2],
    t: f64,
) -> Result<Vec<(usize, f64)>> {
    let mut pins = BTreeMap::new();
    for &m in markers {
        for &d in space.boundary_dofs(m)? {
            let [x, y] = space.dof_coords()[d];
            let v = g(x, y, t);
            for comp in 0..space.components() {
                pins.insert(space.component_offset(comp) + d, v[comp]);
            }
        }
    }
    Ok(pins.into_iter().collect())
}

/// Precomputed symmetric elimination of a fixed DOF set: the reduced matrix
/// is built once and each new set of prescribed values only touches the
/// right-hand side.
#[derive(Clone, Debug)]
pub struct Elimination {
    dofs: Vec<usize>,
    /// Entries `a_ik` with `i` free and `k` constrained.
    lift: SparseMatrix,
}

impl Elimination {
    pub fn new(a: &SparseMatrix, dofs: &[usize]) -> Result<(SparseMatrix, Elimination)> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }
        let mut pinned = vec![false; n];
        for &d in dofs {
            if d >= n {
                return Err(Error::DimensionMismatch { expected: n, got: d });
            }
            pinned[d] = true;
        }
        let mut reduced = Triplets::with_capacity(n, n, a.nnz());
        let mut lift = Triplets::new(n, n);
        for (i, j, v) in a.iter() {
            match (pinned[i], pinned[j]) {
                (false, false) => reduced.push(i, j, v),
                (false, true) => lift.push(i, j, v),
                _ => {}
            }
        }
        for &d in dofs {
            reduced.push(d, d, 1.0);
        }
        let mut sorted = dofs.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        Ok((
            reduced.build(),
            Elimination {
                dofs: sorted,
                lift: lift.build(),
            },
        ))
    }

    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    /// Lifts `values` (parallel to [`Elimination::dofs`]) into `rhs` and
    /// writes them into the pinned rows.
    pub fn apply(&self, rhs: &mut [f64], values: &[f64]) -> Result<()> {
        if values.len() != self.dofs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dofs.len(),
                got: values.len(),
            });
        }
        let mut g = vec![0.0; rhs.len()];
        for (&d, &v) in self.dofs.iter().zip(values) {
            g[d] = v;
        }
        let lifted = self.lift.matvec(&g)?;
        for (r, l) in rhs.iter_mut().zip(&lifted) {
            *r -= l;
        }
        for (&d, &v) in self.dofs.iter().zip(values) {
            rhs[d] = v;
        }
        Ok(())
    }
}
