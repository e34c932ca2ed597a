use super::{Point, PolygonalMesh};
use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CellCheck {
    pub cell: usize,
    /// Radius of the largest ball in the kernel of the polygon.
    pub inscribed_radius: f64,
    pub center: [f64; 2],
    pub diameter: f64,
    pub star_ratio: f64,
    /// `h_K / min_e h_e` over the cell's edges.
    pub edge_ratio: f64,
    pub passes_star: bool,
    pub passes_edges: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub gamma: f64,
    pub gamma_tilde: f64,
    pub cells: Vec<CellCheck>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn worst_star_ratio(&self) -> f64 {
        self.cells.iter().map(|c| c.star_ratio).fold(f64::INFINITY, f64::min)
    }

    pub fn worst_edge_ratio(&self) -> f64 {
        self.cells.iter().map(|c| c.edge_ratio).fold(0.0, f64::max)
    }
}

/// Chebyshev center of the intersection of the inner half-planes of all
/// edges, i.e. the largest ball w.r.t. which the polygon is star-shaped.
/// Returns `(center, radius)`; radius is zero if the kernel is degenerate.
pub fn chebyshev_center(pts: &[Point]) -> (Point, f64) {
    let n = pts.len();
    let mut rows: Vec<(Point, f64)> = Vec::with_capacity(n);
    for i in 0..n {
        let d = pts[(i + 1) % n] - pts[i];
        let nrm = Point::new(d.y, -d.x) / d.norm();
        let b = nrm.dot(&pts[i]);
        // drop duplicated supporting lines from collinear (hanging) vertices
        if rows
            .iter()
            .any(|(m, c)| (m - nrm).norm() < 1e-12 && (c - b).abs() < 1e-12 * (1.0 + b.abs()))
        {
            continue;
        }
        rows.push((nrm, b));
    }
    let scale = crate::polybasis::diameter(pts);
    let mut best = (pts[0], 0.0);
    let m = rows.len();
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let a = Matrix3::new(
                    rows[i].0.x,
                    rows[i].0.y,
                    1.0,
                    rows[j].0.x,
                    rows[j].0.y,
                    1.0,
                    rows[k].0.x,
                    rows[k].0.y,
                    1.0,
                );
                let rhs = Vector3::new(rows[i].1, rows[j].1, rows[k].1);
                let Some(sol) = a.lu().solve(&rhs) else { continue };
                let (c, r) = (Point::new(sol[0], sol[1]), sol[2]);
                if !(r.is_finite() && r > best.1) {
                    continue;
                }
                let feasible = rows.iter().all(|(nrm, b)| nrm.dot(&c) + r <= b + 1e-12 * scale);
                if feasible {
                    best = (c, r);
                }
            }
        }
    }
    best
}

pub(super) fn validate(mesh: &PolygonalMesh, gamma: f64, gamma_tilde: f64) -> ValidationReport {
    let cells: Vec<CellCheck> = (0..mesh.n_cells())
        .map(|k| {
            let pts = mesh.cell_points(k);
            let (c, r) = chebyshev_center(&pts);
            let h = mesh.cell_diameter(k);
            let min_edge = mesh.cell_edges[k]
                .iter()
                .map(|ce| mesh.edge_length(ce.edge))
                .fold(f64::INFINITY, f64::min);
            let star_ratio = r / h;
            let edge_ratio = h / min_edge;
            CellCheck {
                cell: k,
                inscribed_radius: r,
                center: [c.x, c.y],
                diameter: h,
                star_ratio,
                edge_ratio,
                passes_star: star_ratio >= gamma,
                passes_edges: edge_ratio <= gamma_tilde,
            }
        })
        .collect();
    let passed = cells.iter().all(|c| c.passes_star && c.passes_edges);
    ValidationReport {
        gamma,
        gamma_tilde,
        cells,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_ratio() {
        let m = PolygonalMesh::square(1);
        let r = m.validate(0.3, 2.0);
        assert!(r.passed);
        assert!((r.cells[0].star_ratio - 0.5 / 2f64.sqrt()).abs() < 1e-12);
        assert!((r.cells[0].center[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sliver_fails_star_condition() {
        let m = PolygonalMesh::from_json(r#"{"vertices":[[0,0],[100,0],[100,1],[0,1]],"cells":[[0,1,2,3]]}"#).unwrap();
        let r = m.validate(0.3, 1000.0);
        assert!(!r.passed);
        assert!(r.cells[0].star_ratio < 0.01);
    }

    #[test]
    fn lshape_mesh_passes() {
        assert!(PolygonalMesh::lshape(2).validate(0.3, 2.0).passed);
    }

    #[test]
    fn nonconvex_kernel() {
        // kernel of this L-shaped hexagon is the square [-1,0]x[0,1]
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (0.0, -1.0)].map(|(x, y)| Point::new(x, y));
        let (_, r) = chebyshev_center(&pts);
        assert!((r - 0.5).abs() < 1e-12, "{r}");
    }
}
