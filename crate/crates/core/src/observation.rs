//! Coarse observations and the nudging term.
//!
//! `I_H` is the L2 projection onto piecewise constants over a rectangular
//! coarse lattice. Lattice boxes are intersected exactly with the fine
//! triangles, so the lattice does not need to line up with fine edges.

use std::sync::Arc;

use crate::assembly::LinearSystem;
use crate::error::{Error, Result};
use crate::fem::basis::eval_basis;
use crate::fem::{quadrature, CellMap, FeSpace};
use crate::linalg::{SparseMatrix, Triplets};
use crate::mesh::{Mesh, Point, Rect};

/// Relative tolerance for the lattice dividing the bounding box.
const LATTICE_TOL: f64 = 1e-9;

/// A piece of one fine triangle lying inside one coarse box.
#[derive(Clone, Copy, Debug)]
pub struct Piece {
    pub fine_cell: usize,
    pub points: [Point; 3],
}

#[derive(Clone, Debug)]
pub struct CoarseCell {
    pub bbox: Rect,
    pub measure: f64,
    pub pieces: Vec<Piece>,
}

/// Rectangular lattice over the domain's bounding box. Boxes that miss the
/// domain are dropped; the rest are clipped to it.
#[derive(Clone, Debug)]
pub struct CoarseGrid {
    bbox: Rect,
    nx: usize,
    ny: usize,
    cells: Vec<CoarseCell>,
    nodes: Vec<Point>,
    node_vertices: Vec<usize>,
}

impl CoarseGrid {
    /// Square lattice of width `h`; the bounding box must be an integer
    /// number of cells wide and tall.
    pub fn new(mesh: &Mesh, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("coarse width must be positive, got {h}")));
        }
        let bbox = mesh.bounding_box();
        let count = |len: f64, axis: &str| -> Result<usize> {
            let n = (len / h).round();
            if n < 1.0 || (n * h - len).abs() > LATTICE_TOL * len {
                return Err(Error::Alignment(format!(
                    "coarse width {h} does not divide the domain {axis} {len}"
                )));
            }
            Ok(n as usize)
        };
        let (nx, ny) = (count(bbox.width(), "width")?, count(bbox.height(), "height")?);
        Self::with_counts(mesh, nx, ny)
    }

    /// `nx × ny` lattice over the bounding box.
    pub fn with_counts(mesh: &Mesh, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidInput("coarse lattice needs at least one cell per axis".into()));
        }
        let bbox = mesh.bounding_box();
        let (hx, hy) = (bbox.width() / nx as f64, bbox.height() / ny as f64);
        let x_at = |i: usize| if i == nx { bbox.x1 } else { bbox.x0 + i as f64 * hx };
        let y_at = |j: usize| if j == ny { bbox.y1 } else { bbox.y0 + j as f64 * hy };

        let mut boxes: Vec<Vec<Piece>> = vec![Vec::new(); nx * ny];
        for c in 0..mesh.n_cells() {
            let pts = mesh.cell_points(c);
            let area = mesh.cell_area(c);
            let (lo, hi) = pts.iter().fold(([f64::MAX; 2], [f64::MIN; 2]), |(lo, hi), p| {
                ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
            });
            let span = |lo: f64, hi: f64, o: f64, w: f64, n: usize| {
                let a = (((lo - o) / w).floor().max(0.0) as usize).min(n - 1);
                let b = (((hi - o) / w).floor().max(0.0) as usize).min(n - 1);
                a..=b
            };
            for j in span(lo[1], hi[1], bbox.y0, hy, ny) {
                for i in span(lo[0], hi[0], bbox.x0, hx, nx) {
                    let rect = Rect::new(x_at(i), y_at(j), x_at(i + 1), y_at(j + 1));
                    let poly = clip_to_rect(&pts, &rect);
                    for k in 1..poly.len().saturating_sub(1) {
                        let tri = [poly[0], poly[k], poly[k + 1]];
                        if tri_area(&tri) > 1e-14 * area {
                            boxes[j * nx + i].push(Piece { fine_cell: c, points: tri });
                        }
                    }
                }
            }
        }

        let mut cells = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let pieces = std::mem::take(&mut boxes[j * nx + i]);
                if pieces.is_empty() {
                    continue;
                }
                let measure = pieces.iter().map(|p| tri_area(&p.points)).sum();
                cells.push(CoarseCell {
                    bbox: Rect::new(x_at(i), y_at(j), x_at(i + 1), y_at(j + 1)),
                    measure,
                    pieces,
                });
            }
        }

        // lattice points inside the domain, snapped to fine vertices
        let (classes, _) = mesh.vertex_classes();
        let snap_tol = mesh.max_edge_length();
        let mut seen = std::collections::HashSet::new();
        let (mut nodes, mut node_vertices) = (Vec::new(), Vec::new());
        for j in 0..=ny {
            for i in 0..=nx {
                let p = [x_at(i), y_at(j)];
                if !mesh.contains(p, 1e-9) {
                    continue;
                }
                let v = mesh.nearest_vertex(p);
                let q = mesh.vertices()[v];
                if ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt() > snap_tol {
                    return Err(Error::UnmatchedNode(p[0], p[1]));
                }
                if seen.insert(classes[v]) {
                    nodes.push(p);
                    node_vertices.push(v);
                }
            }
        }

        Ok(CoarseGrid {
            bbox,
            nx,
            ny,
            cells,
            nodes,
            node_vertices,
        })
    }

    /// Larger of the two lattice spacings.
    pub fn width(&self) -> f64 {
        (self.bbox.width() / self.nx as f64).max(self.bbox.height() / self.ny as f64)
    }

    pub fn lattice(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[CoarseCell] {
        &self.cells
    }

    pub fn measures(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.measure).collect()
    }

    /// Lattice points inside the domain, one per periodic class.
    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    /// Fine vertex nearest to each of [`CoarseGrid::nodes`].
    pub fn node_vertices(&self) -> &[usize] {
        &self.node_vertices
    }
}

fn tri_area(t: &[Point; 3]) -> f64 {
    0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]))
}

/// Sutherland-Hodgman clip of a convex polygon against an axis-aligned box.
fn clip_to_rect(poly: &[Point], r: &Rect) -> Vec<Point> {
    // (axis, bound, keep-below)
    let planes = [(0, r.x0, false), (0, r.x1, true), (1, r.y0, false), (1, r.y1, true)];
    let mut out: Vec<Point> = poly.to_vec();
    for (axis, bound, below) in planes {
        if out.is_empty() {
            break;
        }
        let inside = |p: &Point| if below { p[axis] <= bound } else { p[axis] >= bound };
        let input = std::mem::take(&mut out);
        for k in 0..input.len() {
            let (a, b) = (input[k], input[(k + 1) % input.len()]);
            let (ia, ib) = (inside(&a), inside(&b));
            if ia {
                out.push(a);
            }
            if ia != ib {
                let s = (bound - a[axis]) / (b[axis] - a[axis]);
                let mut p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                p[axis] = bound;
                out.push(p);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NudgingMode {
    /// Exact `μ CᵀD⁻¹C`.
    Galerkin,
    /// Diagonal `μ Σ_c C[c,j]`.
    Lumped,
    /// Nodal constraints at the measurement nodes.
    Direct,
}

impl std::str::FromStr for NudgingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "galerkin" => Ok(NudgingMode::Galerkin),
            "lumped" => Ok(NudgingMode::Lumped),
            "direct" => Ok(NudgingMode::Direct),
            _ => Err(Error::InvalidInput(format!("unknown nudging mode `{s}`"))),
        }
    }
}

/// `C[c,j] = ∫_{cell c} φ_j` with the cell measures `D`, plus the
/// nudging strength. Vector spaces observe each component separately;
/// averages are blocked like the coefficients (all x cells, then y).
#[derive(Clone, Debug)]
pub struct ObservationOperator {
    grid: Arc<CoarseGrid>,
    c: SparseMatrix,
    measures: Vec<f64>,
    mu: f64,
    mode: NudgingMode,
    components: usize,
    n_scalar: usize,
    measurement_dofs: Vec<usize>,
}

impl ObservationOperator {
    /// `mu` may be `f64::INFINITY`, which requires direct mode; direct mode
    /// always runs with infinite `mu`.
    pub fn new(space: &FeSpace, grid: Arc<CoarseGrid>, mu: f64, mode: NudgingMode) -> Result<Self> {
        if mu.is_nan() || mu < 0.0 {
            return Err(Error::InvalidInput(format!("nudging parameter must be nonnegative, got {mu}")));
        }
        if mu.is_infinite() && mode != NudgingMode::Direct {
            return Err(Error::InfiniteNudging);
        }
        let mu = if mode == NudgingMode::Direct { f64::INFINITY } else { mu };

        let degree = space.degree();
        let rule = quadrature(degree)?;
        let n = space.n_scalar_dofs();
        let mut t = Triplets::new(grid.n_cells(), n);
        for (ci, cell) in grid.cells().iter().enumerate() {
            for piece in &cell.pieces {
                let fine = CellMap::new(space.mesh().cell_points(piece.fine_cell));
                let sub = CellMap::new(piece.points);
                let dofs = space.cell_dofs(piece.fine_cell);
                for (l, w) in rule.points.iter().zip(&rule.weights) {
                    let e = eval_basis(degree, fine.barycentric(sub.point(*l)))?;
                    let jw = w * sub.det().abs();
                    for (k, &d) in dofs.iter().enumerate() {
                        t.push(ci, d, jw * e.values[k]);
                    }
                }
            }
        }
        let mut c = t.build();
        let mut measures = grid.measures();
        if space.components() == 2 {
            c = c.block_diag2();
            measures.extend_from_within(..);
        }

        let mut measurement_dofs = Vec::new();
        for comp in 0..space.components() {
            for &v in grid.node_vertices() {
                measurement_dofs.push(space.component_offset(comp) + space.vertex_dof(v));
            }
        }

        Ok(ObservationOperator {
            grid,
            c,
            measures,
            mu,
            mode,
            components: space.components(),
            n_scalar: n,
            measurement_dofs,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn mode(&self) -> NudgingMode {
        self.mode
    }

    pub fn grid(&self) -> &CoarseGrid {
        &self.grid
    }

    pub fn restriction(&self) -> &SparseMatrix {
        &self.c
    }

    /// Cell measures, repeated per component.
    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn n_averages(&self) -> usize {
        self.measures.len()
    }

    /// Cell averages `D⁻¹ C v`.
    pub fn apply_ih(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut a = self.c.matvec(v)?;
        a.iter_mut().zip(&self.measures).for_each(|(a, m)| *a /= m);
        Ok(a)
    }

    /// Exact cell averages of an analytic field (one value per component).
    pub fn averages_of(&self, f: impl Fn(f64, f64, f64) -> [f64; 2], t: f64) -> Result<Vec<f64>> {
        let rule = quadrature(8)?;
        let nc = self.grid.n_cells();
        let mut out = vec![0.0; self.n_averages()];
        for (ci, cell) in self.grid.cells().iter().enumerate() {
            for piece in &cell.pieces {
                let sub = CellMap::new(piece.points);
                for (l, w) in rule.points.iter().zip(&rule.weights) {
                    let [x, y] = sub.point(*l);
                    let v = f(x, y, t);
                    for comp in 0..self.components {
                        if !v[comp].is_finite() {
                            return Err(Error::NonFinite("observed field"));
                        }
                        out[comp * nc + ci] += w * sub.det().abs() * v[comp];
                    }
                }
            }
        }
        out.iter_mut().zip(&self.measures).for_each(|(a, m)| *a /= m);
        Ok(out)
    }

    /// Matrix addend of the nudging term: `μ CᵀD⁻¹C`, or its diagonal
    /// lumping.
    pub fn nudging_matrix(&self) -> Result<SparseMatrix> {
        let n = self.components * self.n_scalar;
        match self.mode {
            NudgingMode::Direct => Err(Error::InfiniteNudging),
            _ if self.mu == 0.0 => Ok(SparseMatrix::zeros(n, n)),
            NudgingMode::Lumped => {
                let ones = vec![1.0; self.n_averages()];
                let col_sums = self.c.transpose().matvec(&ones)?;
                Ok(SparseMatrix::from_diagonal(&col_sums.iter().map(|s| self.mu * s).collect::<Vec<_>>()))
            }
            NudgingMode::Galerkin => {
                let cap: usize = (0..self.c.nrows()).map(|r| self.c.row(r).0.len().pow(2)).sum();
                let mut t = Triplets::with_capacity(n, n, cap);
                for r in 0..self.c.nrows() {
                    let (cols, vals) = self.c.row(r);
                    let s = self.mu / self.measures[r];
                    for (&j, &a) in cols.iter().zip(vals) {
                        for (&k, &b) in cols.iter().zip(vals) {
                            t.push(j, k, s * a * b);
                        }
                    }
                }
                Ok(t.build())
            }
        }
    }

    /// Right-hand-side addend `μ Cᵀ ū` for observed averages `ū`.
    pub fn nudging_rhs(&self, truth_averages: &[f64]) -> Result<Vec<f64>> {
        if self.mode == NudgingMode::Direct {
            return Err(Error::InfiniteNudging);
        }
        if truth_averages.len() != self.n_averages() {
            return Err(Error::DimensionMismatch {
                expected: self.n_averages(),
                got: truth_averages.len(),
            });
        }
        let mut r = self.c.transpose().matvec(truth_averages)?;
        r.iter_mut().for_each(|v| *v *= self.mu);
        Ok(r)
    }

    pub fn nudging_contribution(&self, truth_averages: &[f64]) -> Result<(SparseMatrix, Vec<f64>)> {
        Ok((self.nudging_matrix()?, self.nudging_rhs(truth_averages)?))
    }

    /// Fine DOFs at the measurement nodes, blocked by component.
    pub fn measurement_dofs(&self) -> &[usize] {
        &self.measurement_dofs
    }

    /// Pins the measurement DOFs to `values` (parallel to
    /// [`ObservationOperator::measurement_dofs`]). DOFs already constrained
    /// by boundary data keep their boundary value.
    pub fn direct_enforce(&self, sys: LinearSystem, values: &[f64]) -> Result<LinearSystem> {
        if self.mode != NudgingMode::Direct {
            return Err(Error::InvalidInput("direct enforcement needs direct mode".into()));
        }
        if values.len() != self.measurement_dofs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.measurement_dofs.len(),
                got: values.len(),
            });
        }
        let pins: Vec<(usize, f64)> = self
            .measurement_dofs
            .iter()
            .zip(values)
            .filter(|(d, _)| !sys.constrained.contains_key(d))
            .map(|(&d, &v)| (d, v))
            .collect();
        sys.constrain(&pins)
    }

    /// `max ‖v − I_H v‖ / (H ‖∇v‖)` over a battery of discrete functions.
    pub fn estimate_interp_constant(&self, mass: &SparseMatrix, stiffness: &SparseMatrix, battery: &[Vec<f64>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for v in battery {
            let grad = stiffness.bilinear(v, v)?.max(0.0).sqrt();
            if grad <= 1e-14 * mass.bilinear(v, v)?.abs().sqrt().max(1.0) {
                return Err(Error::ZeroGradient);
            }
            let ratio = self.projection_error(mass, v)? / (self.grid.width() * grad);
            worst = worst.max(ratio);
        }
        Ok(worst)
    }

    /// `‖v − I_H v‖` in L2, from `vᵀMv − Σ |c| avg²`.
    pub fn projection_error(&self, mass: &SparseMatrix, v: &[f64]) -> Result<f64> {
        let avg = self.apply_ih(v)?;
        let lifted: f64 = avg.iter().zip(&self.measures).map(|(a, m)| m * a * a).sum();
        Ok((mass.bilinear(v, v)? - lifted).max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{mass_matrix, stiffness_matrix};
    use crate::linalg::factorize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::uniform_rect(n, n, Rect::UNIT).unwrap())
    }

    fn galerkin(space: &FeSpace, h: f64, mu: f64) -> ObservationOperator {
        let grid = Arc::new(CoarseGrid::new(space.mesh(), h).unwrap());
        ObservationOperator::new(space, grid, mu, NudgingMode::Galerkin).unwrap()
    }

    #[test]
    fn aligned_and_unaligned_lattices() {
        let mesh = square(27);
        let g = CoarseGrid::new(&mesh, 1.0 / 9.0).unwrap();
        assert_eq!(g.n_cells(), 81);
        assert_eq!(g.nodes().len(), 100);
        let total: f64 = g.measures().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(matches!(CoarseGrid::new(&mesh, 0.3), Err(Error::Alignment(_))));

        // a 1/9 lattice over a 1/32 barycentric mesh cuts through triangles
        let fine = square(32).barycentric_refine();
        let g = CoarseGrid::new(&fine, 1.0 / 9.0).unwrap();
        for cell in g.cells() {
            assert!((cell.measure - 1.0 / 81.0).abs() < 1e-14);
        }
        for (p, &v) in g.nodes().iter().zip(g.node_vertices()) {
            let q = fine.vertices()[v];
            assert!((p[0] - q[0]).abs() <= 1.0 / 64.0 + 1e-12 && (p[1] - q[1]).abs() <= 1.0 / 64.0 + 1e-12);
        }
    }

    #[test]
    fn sheared_channel_cells_cover_the_domain() {
        let mesh = Mesh::shear_channel(40, 6).unwrap();
        let g = CoarseGrid::with_counts(&mesh, 8, 3).unwrap();
        let total: f64 = g.measures().iter().sum();
        assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-10);
        assert!(g.n_cells() < 24);
    }

    #[test]
    fn row_sums_are_measures_and_constants_reproduced() {
        let mesh = Arc::new(square(6).barycentric_refine());
        for degree in [1, 2] {
            let s = FeSpace::new(mesh.clone(), degree, 1).unwrap();
            let obs = galerkin(&s, 0.5, 1.0);
            let ones = vec![1.0; s.n_dofs()];
            let sums = obs.restriction().matvec(&ones).unwrap();
            for (a, b) in sums.iter().zip(obs.measures()) {
                assert!((a - b).abs() < 1e-12);
            }
            let c = vec![2.5; s.n_dofs()];
            assert!(obs.apply_ih(&c).unwrap().iter().all(|a| (a - 2.5).abs() < 1e-13));
            let x = s.interpolate(|x, _, _| x, 0.0).unwrap();
            let whole = galerkin(&s, 1.0, 1.0);
            assert!((whole.apply_ih(&x).unwrap()[0] - 0.5).abs() < 1e-14);
            assert!(whole.apply_ih(&vec![0.0; s.n_dofs()]).unwrap().iter().all(|&a| a == 0.0));
        }
    }

    #[test]
    fn single_cell_matches_outer_product() {
        let s = FeSpace::new(square(3), 2, 1).unwrap();
        let obs = galerkin(&s, 1.0, 1.0);
        let m = mass_matrix(&s).unwrap();
        let rowsum = m.matvec(&vec![1.0; s.n_dofs()]).unwrap();
        let n = obs.nudging_matrix().unwrap();
        for i in 0..s.n_dofs() {
            for j in 0..s.n_dofs() {
                assert!((n.get(i, j) - rowsum[i] * rowsum[j]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn nudging_matrix_symmetric_psd_low_rank() {
        let s = FeSpace::new(square(4), 1, 1).unwrap();
        let obs = galerkin(&s, 0.5, 3.0);
        let n = obs.nudging_matrix().unwrap();
        assert!(n.asymmetry() <= 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let v: Vec<f64> = (0..s.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(n.bilinear(&v, &v).unwrap() >= -1e-14);
        }
        assert!(dense_rank(&n.to_dense()) <= obs.grid().n_cells());
        let ones = vec![1.0; s.n_dofs()];
        assert!((n.bilinear(&ones, &ones).unwrap() - 3.0).abs() < 1e-12);
    }

    fn dense_rank(a: &[Vec<f64>]) -> usize {
        let mut a = a.to_vec();
        let (rows, cols) = (a.len(), a[0].len());
        let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut rank = 0;
        for col in 0..cols {
            let Some(p) = (rank..rows).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())) else {
                break;
            };
            if a[p][col].abs() <= 1e-10 * scale {
                continue;
            }
            a.swap(rank, p);
            for r in rank + 1..rows {
                let f = a[r][col] / a[rank][col];
                let pivot = a[rank].clone();
                a[r].iter_mut().zip(&pivot).for_each(|(v, q)| *v -= f * q);
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn zero_mu_and_consistency() {
        let s = FeSpace::new(square(4), 2, 1).unwrap();
        let zero = galerkin(&s, 0.25, 0.0);
        let (m, r) = zero.nudging_contribution(&vec![1.0; zero.n_averages()]).unwrap();
        assert_eq!(m.nnz(), 0);
        assert!(r.iter().all(|&v| v == 0.0));

        let obs = galerkin(&s, 0.25, 1e4);
        let u = s.interpolate(|x, y, _| (x * y).exp(), 0.0).unwrap();
        let (n, rhs) = obs.nudging_contribution(&obs.apply_ih(&u).unwrap()).unwrap();
        let nu = n.matvec(&u).unwrap();
        assert!(nu.iter().zip(&rhs).all(|(a, b)| (a - b).abs() < 1e-12 * 1e4));
    }

    #[test]
    fn lumped_is_diagonal() {
        let s = FeSpace::new(square(4), 1, 1).unwrap();
        let grid = Arc::new(CoarseGrid::new(s.mesh(), 0.5).unwrap());
        let obs = ObservationOperator::new(&s, grid, 2.0, NudgingMode::Lumped).unwrap();
        let n = obs.nudging_matrix().unwrap();
        assert!(n.iter().all(|(i, j, _)| i == j));
        let total: f64 = n.values().iter().sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_mu_paths() {
        let s = FeSpace::new(square(4), 2, 1).unwrap();
        let grid = Arc::new(CoarseGrid::new(s.mesh(), 0.25).unwrap());
        assert!(matches!(
            ObservationOperator::new(&s, grid.clone(), f64::INFINITY, NudgingMode::Galerkin),
            Err(Error::InfiniteNudging)
        ));
        let obs = ObservationOperator::new(&s, grid, f64::INFINITY, NudgingMode::Direct).unwrap();
        assert!(matches!(obs.nudging_matrix(), Err(Error::InfiniteNudging)));
        assert_eq!(obs.measurement_dofs().len(), 25);

        // pinned values come back from the solve
        let m = mass_matrix(&s).unwrap();
        let sys = LinearSystem::new(m, vec![0.0; s.n_dofs()]).unwrap();
        let values: Vec<f64> = (0..25).map(|i| i as f64 * 0.1).collect();
        let sys = obs.direct_enforce(sys, &values).unwrap();
        let x = factorize(&sys.matrix).unwrap().solve(&sys.rhs).unwrap();
        for (&d, v) in obs.measurement_dofs().iter().zip(&values) {
            assert!((x[d] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_is_an_l2_contraction() {
        let s = FeSpace::new(Arc::new(square(8).barycentric_refine()), 2, 1).unwrap();
        let obs = galerkin(&s, 0.25, 1.0);
        let m = mass_matrix(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let v: Vec<f64> = (0..s.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let avg = obs.apply_ih(&v).unwrap();
            let lifted: f64 = avg.iter().zip(obs.measures()).map(|(a, w)| w * a * a).sum();
            assert!(lifted.sqrt() <= m.bilinear(&v, &v).unwrap().sqrt() + 1e-12);
        }
    }

    #[test]
    fn interpolation_constant_for_a_linear_ramp() {
        let mut ratios = Vec::new();
        for n in [4, 8, 16] {
            let s = FeSpace::new(square(32), 1, 1).unwrap();
            let obs = galerkin(&s, 1.0 / n as f64, 1.0);
            let (m, a) = (mass_matrix(&s).unwrap(), stiffness_matrix(&s, 1.0).unwrap());
            let x = s.interpolate(|x, _, _| x, 0.0).unwrap();
            let c = obs.estimate_interp_constant(&m, &a, &[x]).unwrap();
            assert!((c - 1.0 / 12f64.sqrt()).abs() < 1e-10, "{c}");
            ratios.push(c);
            let one = vec![1.0; s.n_dofs()];
            assert!(matches!(obs.estimate_interp_constant(&m, &a, &[one]), Err(Error::ZeroGradient)));
        }
        assert!(ratios.windows(2).all(|w| (w[0] / w[1] - 1.0).abs() < 0.1));
    }

    #[test]
    fn analytic_averages() {
        let s = FeSpace::new(square(5), 1, 2).unwrap();
        let obs = galerkin(&s, 0.5, 1.0);
        let a = obs.averages_of(|x, y, _| [x, x * y], 0.0).unwrap();
        assert_eq!(a.len(), 8);
        assert!((a[0] - 0.25).abs() < 1e-14);
        assert!((a[4] - 0.0625).abs() < 1e-14);
    }
}
