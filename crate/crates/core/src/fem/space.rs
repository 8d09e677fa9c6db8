use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use super::basis::{eval_basis, local_nodes, n_local, LOCAL_EDGES};
use super::CellMap;
use crate::error::{Error, Result};
use crate::mesh::{Marker, Mesh, Point};

/// Identifies a discrete space for snapshot compatibility checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpaceFingerprint {
    pub n_dofs: usize,
    pub degree: usize,
    pub components: usize,
    pub mesh_hash: u64,
}

/// Continuous Lagrange space of degree 1 or 2 with one or two components.
///
/// Vector spaces are component-blocked: all x-DOFs come first, then all
/// y-DOFs. `cell_dofs`, `dof_coords` and `boundary_dofs` are kept per scalar
/// component.
#[derive(Clone, Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    degree: usize,
    components: usize,
    n_local: usize,
    cell_dofs: Vec<usize>,
    dof_coords: Vec<Point>,
    vertex_dofs: Vec<usize>,
    boundary_dofs: BTreeMap<Marker, Vec<usize>>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize, components: usize) -> Result<Self> {
        let n_local = n_local(degree)?;
        if !(1..=2).contains(&components) {
            return Err(Error::InvalidInput(format!("unsupported component count {components}")));
        }
        let (vertex_class, n_vertex_classes) = mesh.vertex_classes();

        let mut dof_coords = vec![[0.0; 2]; n_vertex_classes];
        let mut seen = vec![false; n_vertex_classes];
        for (v, &class) in vertex_class.iter().enumerate() {
            if !seen[class] {
                seen[class] = true;
                dof_coords[class] = mesh.vertices()[v];
            }
        }

        let image = mesh.periodic_image();
        let on_right: Vec<bool> = {
            let mut r = vec![false; mesh.n_vertices()];
            if let Some(pairs) = mesh.periodic_pairs() {
                for &(_, right) in pairs {
                    r[right] = true;
                }
            }
            r
        };
        // an edge lying on the right periodic boundary is the image of its left partner
        let edge_key = |a: usize, b: usize| {
            let (a, b) = if on_right[a] && on_right[b] { (image[a], image[b]) } else { (a, b) };
            if a < b {
                (a, b)
            } else {
                (b, a)
            }
        };

        let mut edge_dof: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cell_dofs = Vec::with_capacity(n_local * mesh.n_cells());
        for cell in mesh.cells() {
            for &v in cell {
                cell_dofs.push(vertex_class[v]);
            }
            if degree == 2 {
                for [i, j] in LOCAL_EDGES {
                    let key = edge_key(cell[i], cell[j]);
                    let next = n_vertex_classes + edge_dof.len();
                    let dof = *edge_dof.entry(key).or_insert_with(|| {
                        let (pa, pb) = (mesh.vertices()[key.0], mesh.vertices()[key.1]);
                        dof_coords.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                        next
                    });
                    cell_dofs.push(dof);
                }
            }
        }

        let mut boundary: BTreeMap<Marker, BTreeSet<usize>> = BTreeMap::new();
        for e in mesh.boundary_edges() {
            let set = boundary.entry(e.marker).or_default();
            let [a, b] = e.vertices;
            set.insert(vertex_class[a]);
            set.insert(vertex_class[b]);
            if degree == 2 {
                set.insert(edge_dof[&edge_key(a, b)]);
            }
        }
        let boundary_dofs = boundary.into_iter().map(|(m, s)| (m, s.into_iter().collect())).collect();

        Ok(FeSpace {
            mesh,
            degree,
            components,
            n_local,
            cell_dofs,
            dof_coords,
            vertex_dofs: vertex_class,
            boundary_dofs,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    /// DOFs per component.
    pub fn n_scalar_dofs(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.components * self.dof_coords.len()
    }

    /// Scalar DOFs of cell `c` in local order.
    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c * self.n_local..(c + 1) * self.n_local]
    }

    pub fn dof_coords(&self) -> &[Point] {
        &self.dof_coords
    }

    /// Scalar DOF located at mesh vertex `v`.
    pub fn vertex_dof(&self, v: usize) -> usize {
        self.vertex_dofs[v]
    }

    /// Scalar DOFs on edges carrying `marker`.
    pub fn boundary_dofs(&self, marker: Marker) -> Result<&[usize]> {
        self.boundary_dofs
            .get(&marker)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownMarker(marker.to_string()))
    }

    pub fn markers(&self) -> impl Iterator<Item = Marker> + '_ {
        self.boundary_dofs.keys().copied()
    }

    /// Offset of component `c` in a blocked coefficient vector.
    pub fn component_offset(&self, c: usize) -> usize {
        c * self.dof_coords.len()
    }

    pub fn fingerprint(&self) -> SpaceFingerprint {
        SpaceFingerprint {
            n_dofs: self.n_dofs(),
            degree: self.degree,
            components: self.components,
            mesh_hash: self.mesh.fingerprint(),
        }
    }

    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || self.mesh.fingerprint() == other.mesh.fingerprint()
    }

    pub fn cell_map(&self, c: usize) -> CellMap {
        CellMap::new(self.mesh.cell_points(c))
    }

    /// Nodal interpolation of a scalar function into a scalar space.
    pub fn interpolate(&self, f: impl Fn(f64, f64, f64) -> f64, t: f64) -> Result<Vec<f64>> {
        let n = self.n_scalar_dofs();
        let mut out = Vec::with_capacity(self.n_dofs());
        for comp in 0..self.components {
            for p in &self.dof_coords {
                let v = f(p[0], p[1], t);
                if !v.is_finite() {
                    return Err(Error::NonFinite("interpolated function"));
                }
                out.push(v);
            }
            debug_assert_eq!(out.len(), (comp + 1) * n);
        }
        Ok(out)
    }

    /// Nodal interpolation of a vector field into a two-component space.
    pub fn interpolate_vector(&self, f: impl Fn(f64, f64, f64) -> [f64; 2], t: f64) -> Result<Vec<f64>> {
        if self.components != 2 {
            return Err(Error::InvalidInput("vector interpolation needs a two-component space".into()));
        }
        let n = self.n_scalar_dofs();
        let mut out = vec![0.0; 2 * n];
        for (i, p) in self.dof_coords.iter().enumerate() {
            let v = f(p[0], p[1], t);
            if !(v[0].is_finite() && v[1].is_finite()) {
                return Err(Error::NonFinite("interpolated vector field"));
            }
            out[i] = v[0];
            out[n + i] = v[1];
        }
        Ok(out)
    }

    /// Value of component `comp` of the FE function `coeffs` at barycentric
    /// point `l` of cell `c`.
    pub fn eval_in_cell(&self, coeffs: &[f64], comp: usize, c: usize, l: [f64; 3]) -> f64 {
        let e = eval_basis(self.degree, l).expect("validated degree");
        let off = self.component_offset(comp);
        self.cell_dofs(c).iter().zip(e.values()).map(|(&d, &phi)| coeffs[off + d] * phi).sum()
    }

    /// Nodes of cell `c` in local order, in physical coordinates.
    pub fn cell_nodes(&self, c: usize) -> Vec<Point> {
        let map = self.cell_map(c);
        local_nodes(self.degree)
            .expect("validated degree")
            .into_iter()
            .map(|l| map.point(l))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::uniform_rect(n, n, Rect::UNIT).unwrap())
    }

    #[test]
    fn dof_counts() {
        for n in [1, 2, 5, 8] {
            let s = FeSpace::new(square(n), 2, 1).unwrap();
            assert_eq!(s.n_dofs(), (2 * n + 1) * (2 * n + 1));
        }
        assert_eq!(FeSpace::new(square(1), 1, 1).unwrap().n_dofs(), 4);
        assert_eq!(FeSpace::new(square(1), 2, 2).unwrap().n_dofs(), 18);
        assert!(matches!(FeSpace::new(square(1), 3, 1), Err(Error::UnsupportedDegree(3))));
    }

    #[test]
    fn periodic_merging_counts() {
        let n = 4;
        let mesh = Arc::new(Mesh::uniform_rect(n, n, Rect::UNIT).unwrap().identify_periodic_x().unwrap());
        let p1 = FeSpace::new(mesh.clone(), 1, 1).unwrap();
        assert_eq!(p1.n_dofs(), n * (n + 1));
        let p2 = FeSpace::new(mesh, 2, 1).unwrap();
        assert_eq!(p2.n_dofs(), 2 * n * (2 * n + 1));
        assert!(p2.cell_dofs.iter().all(|&d| d < p2.n_dofs()));
    }

    #[test]
    fn boundary_dofs_lie_on_boundary() {
        let s = FeSpace::new(square(3), 2, 1).unwrap();
        let mut all = BTreeSet::new();
        for m in [Marker::Bottom, Marker::Top, Marker::Left, Marker::Right] {
            for &d in s.boundary_dofs(m).unwrap() {
                let [x, y] = s.dof_coords()[d];
                let on = x.abs() < 1e-12 || (x - 1.0).abs() < 1e-12 || y.abs() < 1e-12 || (y - 1.0).abs() < 1e-12;
                assert!(on);
                all.insert(d);
            }
        }
        assert_eq!(all.len(), 4 * 6);
        assert!(matches!(s.boundary_dofs(Marker::Inflow), Err(Error::UnknownMarker(_))));
    }

    #[test]
    fn interpolation_examples() {
        let s = FeSpace::new(square(4), 1, 1).unwrap();
        assert!(s.interpolate(|_, _, _| 0.0, 0.0).unwrap().iter().all(|&v| v == 0.0));
        let c = s.interpolate(|x, _, _| x, 0.0).unwrap();
        for (v, p) in c.iter().zip(s.dof_coords()) {
            assert_eq!(*v, p[0]);
        }
        let s2 = FeSpace::new(square(4), 2, 1).unwrap();
        let u = |x: f64, y: f64, t: f64| (t + 2.0 * std::f64::consts::PI * x + std::f64::consts::PI * y).sin();
        let c = s2.interpolate(u, 0.0).unwrap();
        let node = s2.dof_coords().iter().position(|p| (p[0] - 0.25).abs() < 1e-14 && p[1] == 0.0).unwrap();
        assert!((c[node] - 1.0).abs() < 1e-15);
        assert!(matches!(s2.interpolate(|_, _, _| f64::NAN, 0.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn interpolation_reproduces_space_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for degree in [1, 2] {
            let mesh = Arc::new(Mesh::uniform_rect(3, 2, Rect::new(0.0, 0.0, 1.5, 1.0)).unwrap().barycentric_refine());
            let s = FeSpace::new(mesh, degree, 1).unwrap();
            let coeffs: Vec<f64> = (0..s.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
            // evaluate the FE function at every node through the cell basis
            let mut again = vec![f64::NAN; s.n_dofs()];
            let nodes = local_nodes(degree).unwrap();
            for c in 0..s.mesh().n_cells() {
                for (k, &l) in nodes.iter().enumerate() {
                    again[s.cell_dofs(c)[k]] = s.eval_in_cell(&coeffs, 0, c, l);
                }
            }
            for (a, b) in again.iter().zip(&coeffs) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }
}
