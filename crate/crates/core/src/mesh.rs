//! Conforming triangulations of planar domains.
//!
//! Meshes are built once and never mutated afterwards; refinement and
//! periodic identification return new meshes. Cells are stored
//! counter-clockwise, boundary edges carry a [`Marker`], and periodic
//! identification is recorded as vertex pairs so that every finite element
//! space built on the mesh inherits it.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

const PERIODIC_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Marker {
    Bottom,
    Top,
    Left,
    Right,
    Inflow,
    Outflow,
}

impl Marker {
    pub const ALL: [Marker; 6] = [
        Marker::Bottom,
        Marker::Top,
        Marker::Left,
        Marker::Right,
        Marker::Inflow,
        Marker::Outflow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Marker::Bottom => "bottom",
            Marker::Top => "top",
            Marker::Left => "left",
            Marker::Right => "right",
            Marker::Inflow => "inflow",
            Marker::Outflow => "outflow",
        }
    }
}

impl fmt::Display for Marker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Marker {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Marker::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMarker(s.to_string()))
    }
}

/// Axis-aligned box `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect {
        x0: 0.0,
        y0: 0.0,
        x1: 1.0,
        y1: 1.0,
    };

    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

#[derive(Clone, Debug)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub marker: Marker,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    periodic_pairs: Option<Vec<(usize, usize)>>,
    /// Width of the generating rectangle subdivision, when the mesh came
    /// from a structured generator (before barycentric refinement).
    lattice_width: Option<f64>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds a mesh from raw parts and checks every structural invariant.
    pub fn from_parts(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        let mesh = Mesh {
            vertices,
            cells,
            boundary_edges,
            periodic_pairs: None,
            lattice_width: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Uniform `nx × ny` subdivision of `rect`; each sub-rectangle is split
    /// along its lower-left to upper-right diagonal.
    pub fn uniform_rect(nx: usize, ny: usize, rect: Rect) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidInput(format!(
                "mesh subdivision counts must be positive (nx = {nx}, ny = {ny})"
            )));
        }
        let dx = rect.width() / nx as f64;
        let dy = rect.height() / ny as f64;
        let idx = |i: usize, j: usize| j * (nx + 1) + i;

        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                // hit the far edges exactly so periodic matching is exact
                let x = if i == nx { rect.x1 } else { rect.x0 + i as f64 * dx };
                let y = if j == ny { rect.y1 } else { rect.y0 + j as f64 * dy };
                vertices.push([x, y]);
            }
        }

        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }

        let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            boundary_edges.push(BoundaryEdge {
                vertices: [idx(i, 0), idx(i + 1, 0)],
                marker: Marker::Bottom,
            });
            boundary_edges.push(BoundaryEdge {
                vertices: [idx(i + 1, ny), idx(i, ny)],
                marker: Marker::Top,
            });
        }
        for j in 0..ny {
            boundary_edges.push(BoundaryEdge {
                vertices: [idx(0, j + 1), idx(0, j)],
                marker: Marker::Left,
            });
            boundary_edges.push(BoundaryEdge {
                vertices: [idx(nx, j), idx(nx, j + 1)],
                marker: Marker::Right,
            });
        }

        Ok(Mesh {
            vertices,
            cells,
            boundary_edges,
            periodic_pairs: None,
            lattice_width: Some(dx.max(dy)),
        })
    }

    /// Channel bounded by `y = sin x`, `y = 1 + sin x`, `x = 0` and `x = 4π`.
    /// The left end is marked inflow, the right end outflow, and the two
    /// curved walls bottom and top.
    pub fn shear_channel(nx: usize, ny: usize) -> Result<Self> {
        let length = 4.0 * std::f64::consts::PI;
        let mut mesh = Mesh::uniform_rect(nx, ny, Rect::new(0.0, 0.0, length, 1.0))?;
        for v in &mut mesh.vertices {
            v[1] += v[0].sin();
        }
        for e in &mut mesh.boundary_edges {
            e.marker = match e.marker {
                Marker::Left => Marker::Inflow,
                Marker::Right => Marker::Outflow,
                m => m,
            };
        }
        Ok(mesh)
    }

    /// Splits every cell into three at its barycenter.
    pub fn barycentric_refine(&self) -> Mesh {
        let n_old = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.reserve(self.cells.len());
        let mut cells = Vec::with_capacity(3 * self.cells.len());
        for (c, cell) in self.cells.iter().enumerate() {
            let [a, b, d] = *cell;
            let (pa, pb, pd) = (self.vertices[a], self.vertices[b], self.vertices[d]);
            vertices.push([(pa[0] + pb[0] + pd[0]) / 3.0, (pa[1] + pb[1] + pd[1]) / 3.0]);
            let g = n_old + c;
            cells.push([a, b, g]);
            cells.push([b, d, g]);
            cells.push([d, a, g]);
        }
        Mesh {
            vertices,
            cells,
            boundary_edges: self.boundary_edges.clone(),
            periodic_pairs: self.periodic_pairs.clone(),
            lattice_width: self.lattice_width,
        }
    }

    /// Pairs every vertex on the left edge of the bounding box with the
    /// vertex at the same height on the right edge.
    pub fn identify_periodic_x(&self) -> Result<Mesh> {
        let bbox = self.bounding_box();
        let width = bbox.width();
        let tol = PERIODIC_TOL * width.max(1.0);
        let on_left: Vec<usize> = (0..self.vertices.len())
            .filter(|&v| (self.vertices[v][0] - bbox.x0).abs() <= tol)
            .collect();
        let mut on_right: Vec<usize> = (0..self.vertices.len())
            .filter(|&v| (self.vertices[v][0] - bbox.x1).abs() <= tol)
            .collect();
        on_right.sort_by(|&a, &b| self.vertices[a][1].total_cmp(&self.vertices[b][1]));

        let mut pairs = Vec::with_capacity(on_left.len());
        for &l in &on_left {
            let y = self.vertices[l][1];
            let pos = on_right.partition_point(|&r| self.vertices[r][1] < y - PERIODIC_TOL);
            let partner = on_right
                .get(pos)
                .copied()
                .filter(|&r| (self.vertices[r][1] - y).abs() <= PERIODIC_TOL)
                .ok_or(Error::PeriodicMismatch { vertex: l, y })?;
            pairs.push((l, partner));
        }
        if pairs.len() != on_right.len() {
            let orphan = on_right
                .iter()
                .find(|r| !pairs.iter().any(|p| p.1 == **r))
                .copied()
                .unwrap_or(0);
            return Err(Error::PeriodicMismatch {
                vertex: orphan,
                y: self.vertices[orphan][1],
            });
        }
        let mut mesh = self.clone();
        mesh.periodic_pairs = Some(pairs);
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn periodic_pairs(&self) -> Option<&[(usize, usize)]> {
        self.periodic_pairs.as_deref()
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic_pairs.is_some()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn lattice_width(&self) -> Option<f64> {
        self.lattice_width
    }

    pub fn cell_points(&self, c: usize) -> [Point; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        let [a, b, d] = self.cell_points(c);
        signed_area(a, b, d)
    }

    pub fn area(&self) -> f64 {
        (0..self.cells.len()).map(|c| self.cell_area(c)).sum()
    }

    /// Fine scale `h`: the longest edge in the mesh.
    pub fn max_edge_length(&self) -> f64 {
        let len = |a: Point, b: Point| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        self.cells
            .iter()
            .map(|&[a, b, d]| {
                let (pa, pb, pd) = (self.vertices[a], self.vertices[b], self.vertices[d]);
                len(pa, pb).max(len(pb, pd)).max(len(pd, pa))
            })
            .fold(0.0, f64::max)
    }

    pub fn bounding_box(&self) -> Rect {
        let mut r = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            r.x0 = r.x0.min(v[0]);
            r.y0 = r.y0.min(v[1]);
            r.x1 = r.x1.max(v[0]);
            r.y1 = r.y1.max(v[1]);
        }
        r
    }

    /// Equivalence class of every vertex under periodic identification,
    /// numbered densely in order of first appearance, plus the class count.
    pub fn vertex_classes(&self) -> (Vec<usize>, usize) {
        let n = self.vertices.len();
        let mut target: Vec<usize> = (0..n).collect();
        if let Some(pairs) = &self.periodic_pairs {
            for &(l, r) in pairs {
                target[r] = l;
            }
        }
        let mut class = vec![usize::MAX; n];
        let mut count = 0;
        for v in 0..n {
            let rep = target[v];
            if class[rep] == usize::MAX {
                class[rep] = count;
                count += 1;
            }
            class[v] = class[rep];
        }
        (class, count)
    }

    /// Maps a right-boundary vertex to its left partner; identity otherwise.
    pub(crate) fn periodic_image(&self) -> Vec<usize> {
        let mut image: Vec<usize> = (0..self.vertices.len()).collect();
        if let Some(pairs) = &self.periodic_pairs {
            for &(l, r) in pairs {
                image[r] = l;
            }
        }
        image
    }

    /// Checks orientation, conformity and boundary coverage.
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        for (c, cell) in self.cells.iter().enumerate() {
            if cell.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidInput(format!("cell {c} references a missing vertex")));
            }
            let area = self.cell_area(c);
            if !(area > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "cell {c} has non-positive signed area {area:e}"
                )));
            }
        }
        let counts = self.edge_cell_counts();
        let mut boundary: HashMap<(usize, usize), usize> = HashMap::new();
        for e in &self.boundary_edges {
            *boundary.entry(edge_key(e.vertices[0], e.vertices[1])).or_default() += 1;
        }
        for (edge, &n) in &counts {
            match n {
                1 => {
                    if boundary.get(edge) != Some(&1) {
                        return Err(Error::InvalidInput(format!(
                            "topological boundary edge {edge:?} is not marked exactly once"
                        )));
                    }
                }
                2 => {
                    if boundary.contains_key(edge) {
                        return Err(Error::InvalidInput(format!(
                            "interior edge {edge:?} carries a boundary marker"
                        )));
                    }
                }
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "edge {edge:?} is shared by {n} cells"
                    )))
                }
            }
        }
        if boundary.len() != self.boundary_edges.len() || boundary.keys().any(|e| !counts.contains_key(e)) {
            return Err(Error::InvalidInput("boundary edge list does not match the mesh".into()));
        }
        Ok(())
    }

    /// Number of incident cells for every edge.
    pub fn edge_cell_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::with_capacity(3 * self.cells.len() / 2 + self.boundary_edges.len());
        for &[a, b, c] in &self.cells {
            for (p, q) in [(a, b), (b, c), (c, a)] {
                *counts.entry(edge_key(p, q)).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Stable 64-bit FNV-1a digest of the geometry and connectivity.
    pub fn fingerprint(&self) -> u64 {
        const OFFSET: u64 = 0xcbf29ce484222325;
        const PRIME: u64 = 0x100000001b3;
        let mut h = OFFSET;
        let mut eat = |word: u64| {
            for byte in word.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        eat(self.vertices.len() as u64);
        for v in &self.vertices {
            eat(v[0].to_bits());
            eat(v[1].to_bits());
        }
        eat(self.cells.len() as u64);
        for c in &self.cells {
            c.iter().for_each(|&i| eat(i as u64));
        }
        if let Some(pairs) = &self.periodic_pairs {
            for &(l, r) in pairs {
                eat(l as u64);
                eat(r as u64);
            }
        }
        h
    }

    /// Plain-text export: a `vertices N cells M` header, then one `x y` line
    /// per vertex and one `i j k` line per cell.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "vertices {} cells {}", self.vertices.len(), self.cells.len())?;
        for v in &self.vertices {
            writeln!(out, "{:.16e} {:.16e}", v[0], v[1])?;
        }
        for c in &self.cells {
            writeln!(out, "{} {} {}", c[0], c[1], c[2])?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Mesh::write_text`]. The text format
    /// carries no markers, so every boundary edge comes back as `Bottom`.
    pub fn read_text<R: BufRead>(input: R) -> Result<(Vec<Point>, Vec<[usize; 3]>)> {
        let bad = |msg: &str| Error::InvalidInput(format!("mesh text: {msg}"));
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty input"))?
            .map_err(|e| Error::io("<mesh>", e))?;
        let words: Vec<&str> = header.split_whitespace().collect();
        let (nv, nc) = match words.as_slice() {
            ["vertices", n, "cells", m] => (
                n.parse::<usize>().map_err(|_| bad("vertex count"))?,
                m.parse::<usize>().map_err(|_| bad("cell count"))?,
            ),
            _ => return Err(bad("header")),
        };
        let mut vertices = Vec::with_capacity(nv);
        let mut cells = Vec::with_capacity(nc);
        for line in lines {
            let line = line.map_err(|e| Error::io("<mesh>", e))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if vertices.len() < nv {
                let [x, y] = fields[..] else { return Err(bad("vertex line")) };
                vertices.push([
                    x.parse().map_err(|_| bad("coordinate"))?,
                    y.parse().map_err(|_| bad("coordinate"))?,
                ]);
            } else {
                let [i, j, k] = fields[..] else { return Err(bad("cell line")) };
                let p = |s: &str| s.parse::<usize>().map_err(|_| bad("cell index"));
                cells.push([p(i)?, p(j)?, p(k)?]);
            }
        }
        if vertices.len() != nv || cells.len() != nc {
            return Err(bad("truncated input"));
        }
        Ok((vertices, cells))
    }

    /// Index of the vertex nearest to `p`.
    pub fn nearest_vertex(&self, p: Point) -> usize {
        let d2 = |v: &Point| (v[0] - p[0]).powi(2) + (v[1] - p[1]).powi(2);
        (0..self.vertices.len())
            .min_by(|&a, &b| d2(&self.vertices[a]).total_cmp(&d2(&self.vertices[b])))
            .expect("mesh has vertices")
    }

    /// Whether `p` lies in the closed meshed domain (up to `tol` in
    /// barycentric coordinates).
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.cells.iter().any(|&[a, b, c]| {
            let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
            let area = signed_area(pa, pb, pc);
            let l1 = signed_area(p, pb, pc) / area;
            let l2 = signed_area(pa, p, pc) / area;
            let l3 = 1.0 - l1 - l2;
            l1 >= -tol && l2 >= -tol && l3 >= -tol
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn uniform_counts() {
        let m = Mesh::uniform_rect(1, 1, Rect::UNIT).unwrap();
        assert_eq!((m.n_vertices(), m.n_cells()), (4, 2));
        let m = Mesh::uniform_rect(32, 32, Rect::UNIT).unwrap();
        assert_eq!(m.n_cells(), 2048);
        m.validate().unwrap();
    }

    #[test]
    fn uniform_signed_areas_on_stretched_rect() {
        let m = Mesh::uniform_rect(2, 1, Rect::new(0.0, 0.0, 1.0, 0.5)).unwrap();
        assert_eq!(m.n_cells(), 4);
        for c in 0..4 {
            assert!((m.cell_area(c) - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_subdivision_rejected() {
        assert!(Mesh::uniform_rect(0, 3, Rect::UNIT).is_err());
    }

    #[test]
    fn barycentric_refinement_counts_and_area() {
        let m = Mesh::uniform_rect(1, 1, Rect::UNIT).unwrap().barycentric_refine();
        assert_eq!((m.n_vertices(), m.n_cells()), (6, 6));
        m.validate().unwrap();
        assert!((m.area() - 1.0).abs() < 1e-14);

        let base = Mesh::uniform_rect(5, 3, Rect::new(-1.0, 0.0, 2.0, 0.7)).unwrap();
        let fine = base.barycentric_refine();
        assert_eq!(fine.n_vertices(), base.n_vertices() + base.n_cells());
        assert_eq!(fine.n_cells(), 3 * base.n_cells());
        fine.validate().unwrap();
        assert!((fine.area() - base.area()).abs() < 1e-14);
    }

    #[test]
    fn shear_channel_geometry() {
        let m = Mesh::shear_channel(16, 4).unwrap();
        m.validate().unwrap();
        assert!((m.area() - 4.0 * PI).abs() < 1e-12);
        let v = m.vertices();
        assert_eq!(v[0], [0.0, 0.0]);
        assert_eq!(v[4 * 17], [0.0, 1.0]);
        // column i = 2 sits at x = π/2 on a 16-column strip of length 4π
        let p = v[2];
        assert!((p[0] - PI / 2.0).abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
        let markers: std::collections::BTreeSet<_> = m.boundary_edges().iter().map(|e| e.marker).collect();
        assert!(markers.contains(&Marker::Inflow) && markers.contains(&Marker::Outflow));
        assert!(!markers.contains(&Marker::Left));
    }

    #[test]
    fn periodic_pairs_and_classes() {
        let m = Mesh::uniform_rect(4, 4, Rect::UNIT).unwrap().identify_periodic_x().unwrap();
        assert_eq!(m.periodic_pairs().unwrap().len(), 5);
        let (_, n) = m.vertex_classes();
        assert_eq!(n, 4 * 5);
        for &(l, r) in m.periodic_pairs().unwrap() {
            let (pl, pr) = (m.vertices()[l], m.vertices()[r]);
            assert!((pl[1] - pr[1]).abs() <= 1e-12);
            assert!(((pr[0] - pl[0]) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn periodic_mismatch_detected() {
        let mut m = Mesh::uniform_rect(3, 3, Rect::UNIT).unwrap();
        // nudge one right-boundary vertex off the left lattice
        let v = 2 * 4 + 3;
        m.vertices[v][1] += 0.05;
        assert!(matches!(m.identify_periodic_x(), Err(Error::PeriodicMismatch { .. })));
    }

    #[test]
    fn validate_rejects_clockwise_cell() {
        let verts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let edges = vec![
            BoundaryEdge { vertices: [0, 1], marker: Marker::Bottom },
            BoundaryEdge { vertices: [1, 2], marker: Marker::Top },
            BoundaryEdge { vertices: [2, 0], marker: Marker::Left },
        ];
        assert!(Mesh::from_parts(verts.clone(), vec![[0, 1, 2]], edges.clone()).is_ok());
        assert!(Mesh::from_parts(verts, vec![[0, 2, 1]], edges).is_err());
    }

    #[test]
    fn text_export_round_trips() {
        let m = Mesh::uniform_rect(3, 2, Rect::new(0.0, 0.0, 1.0 / 3.0, 0.7)).unwrap().barycentric_refine();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&format!("vertices {} cells {}\n", m.n_vertices(), m.n_cells())));
        let (v, c) = Mesh::read_text(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(v, m.vertices());
        assert_eq!(c, m.cells());
    }

    #[test]
    fn marker_parse() {
        assert_eq!("inflow".parse::<Marker>().unwrap(), Marker::Inflow);
        assert!(matches!("wall".parse::<Marker>(), Err(Error::UnknownMarker(_))));
    }
}
