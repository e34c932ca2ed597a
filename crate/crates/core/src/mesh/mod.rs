//! Polygonal meshes with straight edges and hanging vertices.

mod patch;
mod refine;
pub mod samples;
mod validate;

pub use patch::VertexPatch;
pub use validate::{CellCheck, ValidationReport};

use crate::error::{Result, VemError};
use crate::polybasis::quadrature::signed_area;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub type Point = nalgebra::Vector2<f64>;

/// A mesh edge, oriented as traversed by its `left` cell (counter-clockwise).
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub v: [usize; 2],
    pub left: usize,
    pub right: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }

    pub fn contains(&self, vertex: usize) -> bool {
        self.v[0] == vertex || self.v[1] == vertex
    }
}

/// Reference from a cell's local edge to the global edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellEdge {
    pub edge: usize,
    /// `true` when the cell traverses the edge from `v[0]` to `v[1]`.
    pub forward: bool,
}

#[derive(Debug, Clone)]
pub struct PolygonalMesh {
    pub vertices: Vec<Point>,
    pub cells: Vec<Vec<usize>>,
    pub edges: Vec<Edge>,
    pub boundary_flags: Vec<bool>,
    /// Local edge `i` of cell `k` joins `cells[k][i]` to `cells[k][i+1]`.
    pub cell_edges: Vec<Vec<CellEdge>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MeshFile {
    vertices: Vec<[f64; 2]>,
    cells: Vec<Vec<usize>>,
}

impl PolygonalMesh {
    /// Build a mesh from raw vertices and CCW cell loops, deriving topology
    /// and checking the mesh invariants.
    pub fn new(vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self> {
        for (k, cell) in cells.iter().enumerate() {
            if cell.len() < 3 {
                return Err(VemError::InvalidCell {
                    cell: k,
                    reason: "fewer than three vertices".into(),
                });
            }
            if let Some(&bad) = cell.iter().find(|&&v| v >= vertices.len()) {
                return Err(VemError::InvalidCell {
                    cell: k,
                    reason: format!("vertex index {bad} out of range"),
                });
            }
        }
        let (edges, cell_edges) = derive_topology(&cells)?;
        let boundary_flags = edges.iter().map(Edge::is_boundary).collect();
        let mesh = Self {
            vertices,
            cells,
            edges,
            boundary_flags,
            cell_edges,
        };
        mesh.check_cells()?;
        mesh.check_boundary_conformity()?;
        Ok(mesh)
    }

    pub fn from_json(source: &str) -> Result<Self> {
        let f: MeshFile = serde_json::from_str(source).map_err(|e| VemError::MeshParse(e.to_string()))?;
        let vertices = f.vertices.iter().map(|p| Point::new(p[0], p[1])).collect();
        Self::new(vertices, f.cells)
    }

    pub fn to_json(&self) -> String {
        let f = MeshFile {
            vertices: self.vertices.iter().map(|p| [p.x, p.y]).collect(),
            cells: self.cells.clone(),
        };
        serde_json::to_string(&f).expect("mesh serializes")
    }

    /// Uniform `n × n` grid of squares on `(0,1)²`.
    pub fn square(n: usize) -> Self {
        grid(n, 0.0, 1.0, |_, _| true)
    }

    /// `(-1,1)² \ (-1,0]²` tiled by `n²` squares per unit quadrant.
    pub fn lshape(n: usize) -> Self {
        grid(2 * n, -1.0, 1.0, |i, j| !(i < n && j < n))
    }

    /// Parse a builtin generator spec: `square(n)` or `lshape(n)`.
    pub fn builtin(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let parse = |s: &str| -> Result<usize> {
            s.trim_end_matches(')')
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| VemError::MeshParse(format!("bad generator argument in {spec:?}")))
        };
        if let Some(rest) = spec.strip_prefix("square(") {
            Ok(Self::square(parse(rest)?))
        } else if let Some(rest) = spec.strip_prefix("lshape(") {
            Ok(Self::lshape(parse(rest)?))
        } else {
            Err(VemError::MeshParse(format!("unknown generator {spec:?}")))
        }
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_points(&self, k: usize) -> Vec<Point> {
        self.cells[k].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn cell_area(&self, k: usize) -> f64 {
        signed_area(&self.cell_points(k))
    }

    pub fn cell_diameter(&self, k: usize) -> f64 {
        crate::polybasis::diameter(&self.cell_points(k))
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].v;
        (self.vertices[b] - self.vertices[a]).norm()
    }

    /// Unit normal of edge `e` pointing out of its left cell.
    pub fn edge_normal(&self, e: usize) -> Point {
        let [a, b] = self.edges[e].v;
        let d = self.vertices[b] - self.vertices[a];
        Point::new(d.y, -d.x) / d.norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_cells()).map(|k| self.cell_area(k)).sum()
    }

    pub fn internal_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().enumerate().filter(|(_, e)| !e.is_boundary()).map(|(i, _)| i)
    }

    pub fn n_internal_edges(&self) -> usize {
        self.internal_edges().count()
    }

    /// Vertices lying on the domain boundary.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut flags = vec![false; self.n_vertices()];
        for e in self.edges.iter().filter(|e| e.is_boundary()) {
            flags[e.v[0]] = true;
            flags[e.v[1]] = true;
        }
        flags
    }

    /// Cells containing each vertex in their loop.
    pub fn vertex_cells(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_vertices()];
        for (k, cell) in self.cells.iter().enumerate() {
            for &v in cell {
                out[v].push(k);
            }
        }
        out
    }

    pub fn validate(&self, gamma: f64, gamma_tilde: f64) -> ValidationReport {
        validate::validate(self, gamma, gamma_tilde)
    }

    pub fn vertex_patches(&self) -> Vec<VertexPatch> {
        patch::vertex_patches(self)
    }

    /// Split marked cells; unmarked neighbours pick up hanging vertices.
    pub fn refine(&self, marked: &[usize]) -> Result<(Self, Vec<usize>)> {
        refine::refine(self, marked)
    }

    fn check_cells(&self) -> Result<()> {
        for k in 0..self.n_cells() {
            let pts = self.cell_points(k);
            let a = signed_area(&pts);
            let scale = crate::polybasis::diameter(&pts).powi(2);
            if a <= 1e-14 * scale {
                return Err(VemError::InvalidCell {
                    cell: k,
                    reason: format!("orientation error: signed area {a:e} is not positive (loop must be CCW)"),
                });
            }
            if !is_simple(&pts) {
                return Err(VemError::InvalidCell {
                    cell: k,
                    reason: "polygon is not simple".into(),
                });
            }
        }
        Ok(())
    }

    /// A boundary edge overlapping another boundary edge means a neighbour
    /// loop is missing a hanging vertex.
    fn check_boundary_conformity(&self) -> Result<()> {
        let bnd: Vec<usize> = (0..self.edges.len()).filter(|&e| self.edges[e].is_boundary()).collect();
        if bnd.len() > 2000 {
            return Ok(());
        }
        for &e in &bnd {
            let [a, b] = self.edges[e].v;
            let mid = (self.vertices[a] + self.vertices[b]) * 0.5;
            for &f in &bnd {
                if f == e {
                    continue;
                }
                let [c, d] = self.edges[f].v;
                if on_open_segment(&mid, &self.vertices[c], &self.vertices[d]) {
                    return Err(VemError::Topology(format!(
                        "edges {e} and {f} overlap: a neighbour loop misses a hanging vertex"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn on_open_segment(p: &Point, a: &Point, b: &Point) -> bool {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = (p - a).dot(&d) / len2;
    if t <= 1e-12 || t >= 1.0 - 1e-12 {
        return false;
    }
    let cross = (p - a).x * d.y - (p - a).y * d.x;
    cross.abs() <= 1e-12 * len2
}

fn segments_intersect(p1: &Point, p2: &Point, q1: &Point, q2: &Point) -> bool {
    let orient = |a: &Point, b: &Point, c: &Point| (b - a).x * (c - a).y - (b - a).y * (c - a).x;
    let scale = ((p2 - p1).norm() * (q2 - q1).norm()).max(1e-300);
    let tol = 1e-13 * scale;
    let (d1, d2) = (orient(q1, q2, p1), orient(q1, q2, p2));
    let (d3, d4) = (orient(p1, p2, q1), orient(p1, p2, q2));
    if ((d1 > tol && d2 < -tol) || (d1 < -tol && d2 > tol)) && ((d3 > tol && d4 < -tol) || (d3 < -tol && d4 > tol)) {
        return true;
    }
    // touching or collinear overlap
    (d1.abs() <= tol && on_closed(p1, q1, q2))
        || (d2.abs() <= tol && on_closed(p2, q1, q2))
        || (d3.abs() <= tol && on_closed(q1, p1, p2))
        || (d4.abs() <= tol && on_closed(q2, p1, p2))
}

fn on_closed(p: &Point, a: &Point, b: &Point) -> bool {
    let d = b - a;
    let t = (p - a).dot(&d) / d.norm_squared();
    (-1e-12..=1.0 + 1e-12).contains(&t)
}

/// No repeated vertices and no intersections between non-adjacent edges.
pub(crate) fn is_simple(pts: &[Point]) -> bool {
    let n = pts.len();
    for i in 0..n {
        for j in i + 1..n {
            if (pts[i] - pts[j]).norm() == 0.0 {
                return false;
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(&pts[i], &pts[(i + 1) % n], &pts[j], &pts[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

type Topology = (Vec<Edge>, Vec<Vec<CellEdge>>);

fn derive_topology(cells: &[Vec<usize>]) -> Result<Topology> {
    let mut edges: Vec<Edge> = Vec::new();
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
    let mut cell_edges = Vec::with_capacity(cells.len());
    for (k, cell) in cells.iter().enumerate() {
        let n = cell.len();
        let mut local = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (cell[i], cell[(i + 1) % n]);
            if a == b {
                return Err(VemError::InvalidCell {
                    cell: k,
                    reason: "repeated consecutive vertex".into(),
                });
            }
            let key = (a.min(b), a.max(b));
            match lookup.get(&key) {
                None => {
                    lookup.insert(key, edges.len());
                    local.push(CellEdge {
                        edge: edges.len(),
                        forward: true,
                    });
                    edges.push(Edge {
                        v: [a, b],
                        left: k,
                        right: None,
                    });
                }
                Some(&e) => {
                    let edge = &mut edges[e];
                    if edge.v != [b, a] {
                        return Err(VemError::Topology(format!(
                            "edge ({a},{b}) traversed in the same direction by cells {} and {k}",
                            edge.left
                        )));
                    }
                    if edge.right.is_some() {
                        return Err(VemError::Topology(format!("edge ({a},{b}) shared by more than two cells")));
                    }
                    edge.right = Some(k);
                    local.push(CellEdge { edge: e, forward: false });
                }
            }
        }
        cell_edges.push(local);
    }
    Ok((edges, cell_edges))
}

fn grid(n: usize, lo: f64, hi: f64, keep: impl Fn(usize, usize) -> bool) -> PolygonalMesh {
    let step = (hi - lo) / n as f64;
    let mut ids = vec![usize::MAX; (n + 1) * (n + 1)];
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    let mut vid = |i: usize, j: usize, vertices: &mut Vec<Point>| {
        let k = j * (n + 1) + i;
        if ids[k] == usize::MAX {
            ids[k] = vertices.len();
            vertices.push(Point::new(lo + i as f64 * step, lo + j as f64 * step));
        }
        ids[k]
    };
    for j in 0..n {
        for i in 0..n {
            if !keep(i, j) {
                continue;
            }
            let c = vec![
                vid(i, j, &mut vertices),
                vid(i + 1, j, &mut vertices),
                vid(i + 1, j + 1, &mut vertices),
                vid(i, j + 1, &mut vertices),
            ];
            cells.push(c);
        }
    }
    PolygonalMesh::new(vertices, cells).expect("generated grid is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_square_cell() {
        let m = PolygonalMesh::from_json(r#"{"vertices":[[0,0],[1,0],[1,1],[0,1]],"cells":[[0,1,2,3]]}"#).unwrap();
        assert_eq!(m.edges.len(), 4);
        assert_eq!(m.n_internal_edges(), 0);
    }

    #[test]
    fn two_by_two_grid_counts() {
        let m = PolygonalMesh::square(2);
        assert_eq!(m.n_cells(), 4);
        assert_eq!(m.edges.len(), 12);
        assert_eq!(m.n_internal_edges(), 4);
    }

    #[test]
    fn lshape_twelve_squares() {
        let m = PolygonalMesh::lshape(2);
        assert_eq!(m.n_cells(), 12);
        assert!((m.total_area() - 3.0).abs() < 1e-12);
        assert_eq!(m.n_cells(), PolygonalMesh::builtin("lshape(2)").unwrap().n_cells());
    }

    #[test]
    fn clockwise_cell_is_rejected_with_index() {
        let err = PolygonalMesh::from_json(r#"{"vertices":[[0,0],[1,0],[1,1],[0,1],[2,0],[2,1]],"cells":[[0,1,2,3],[1,4,5,2],[0,0,0]]}"#);
        assert!(err.is_err());
        let err = PolygonalMesh::from_json(r#"{"vertices":[[0,0],[1,0],[1,1],[0,1]],"cells":[[0,3,2,1]]}"#).unwrap_err();
        assert!(matches!(err, VemError::InvalidCell { cell: 0, .. }), "{err}");
    }

    #[test]
    fn bowtie_is_not_simple() {
        let err = PolygonalMesh::from_json(r#"{"vertices":[[0,0],[2,0],[0,1],[2,1]],"cells":[[0,1,2,3]]}"#);
        assert!(err.is_err());
    }

    #[test]
    fn garbage_json_is_a_parse_error() {
        assert!(matches!(PolygonalMesh::from_json("{\"vertices\": 3}"), Err(VemError::MeshParse(_))));
    }

    #[test]
    fn missing_hanging_vertex_is_detected() {
        // right cell split into two, left cell does not list vertex 6
        let src = r#"{"vertices":[[0,0],[1,0],[1,1],[0,1],[2,0],[2,1],[1,0.5],[2,0.5]],
                      "cells":[[0,1,2,3],[1,4,7,6],[6,7,5,2]]}"#;
        assert!(PolygonalMesh::from_json(src).is_err());
    }

    #[test]
    fn divergence_identity_per_cell() {
        // ∮ (x,y)·n ds = 2|K|
        let m = PolygonalMesh::lshape(2).refine(&[0, 5]).unwrap().0;
        for k in 0..m.n_cells() {
            let pts = m.cell_points(k);
            let n = pts.len();
            let flux: f64 = (0..n)
                .map(|i| {
                    let (a, b) = (pts[i], pts[(i + 1) % n]);
                    let d = b - a;
                    let nrm = Point::new(d.y, -d.x);
                    ((a + b) * 0.5).dot(&nrm)
                })
                .sum();
            assert!((flux - 2.0 * m.cell_area(k)).abs() < 1e-12 * m.cell_area(k));
        }
    }

    #[test]
    fn topology_is_idempotent() {
        let m = PolygonalMesh::lshape(2);
        let again = PolygonalMesh::new(m.vertices.clone(), m.cells.clone()).unwrap();
        assert_eq!(m.edges, again.edges);
        assert_eq!(m.cell_edges, again.cell_edges);
    }

    #[test]
    fn json_roundtrip() {
        let m = PolygonalMesh::lshape(2).refine(&[3]).unwrap().0;
        let back = PolygonalMesh::from_json(&m.to_json()).unwrap();
        assert_eq!(back.cells, m.cells);
        assert_eq!(back.vertices, m.vertices);
    }
}
