//! Residuals, partition of unity and equilibrated flux reconstructions.
//!
//! Sign conventions: `r^K = f + ΔΠ∇u` and `r^e = ∇Π∇u|_{K+}·n_{K+} + ∇Π∇u|_{K-}·n_{K-}`,
//! both outward normals, so no edge orientation enters the jump. The reconstructed
//! fluxes satisfy `div σ = r^K` and `⟦σ⟧ = r^e` in the same convention.

mod global;
mod local;

pub use global::{global_reconstruct, jump_values, GlobalFlux};
pub use local::{local_reconstruct, reconstruct_all_local, sum_local_fluxes, LocalFlux, LocalizedFlux};

use crate::mesh::PolygonalMesh;
use crate::mixed::{edge_nodes, lagrange_matrix};
use crate::polybasis::{dim, laplacian, multiply, resize};
use crate::primal::{PrimalElement, PrimalSolution, Stabilization};
use nalgebra::DVector;
use rayon::prelude::*;

/// Edge polynomial stored by its values at the Gauss nodes of its degree,
/// in the edge's canonical orientation (`v[0]` to `v[1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePoly {
    pub degree: usize,
    pub values: Vec<f64>,
}

impl EdgePoly {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            values: vec![0.0; degree + 1],
        }
    }

    /// Values at the Gauss nodes of degree `q ≥ self.degree`.
    pub fn at_degree(&self, q: usize) -> Vec<f64> {
        if q == self.degree {
            return self.values.clone();
        }
        let (from, _) = edge_nodes(self.degree);
        let (to, _) = edge_nodes(q);
        (lagrange_matrix(&from, &to) * DVector::from_column_slice(&self.values))
            .as_slice()
            .to_vec()
    }

    /// Product with the linear function equal to `a` at `v[0]` and `b` at `v[1]`.
    pub fn times_linear(&self, a: f64, b: f64) -> Self {
        let q = self.degree + 1;
        let (t, _) = edge_nodes(q);
        let vals = self.at_degree(q);
        Self {
            degree: q,
            values: vals.iter().zip(&t).map(|(v, s)| v * (a * (1.0 - s) + b * s)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct ResidualData {
    /// `r^K` per cell, degree `p_K - 1`, in the cell frame.
    pub bulk: Vec<Vec<f64>>,
    /// `r^e` on internal edges, degree `p_e - 1`; `None` on boundary edges.
    pub edge: Vec<Option<EdgePoly>>,
}

pub fn compute_residuals(mesh: &PolygonalMesh, sol: &PrimalSolution) -> ResidualData {
    let bulk = sol
        .elements
        .iter()
        .enumerate()
        .map(|(k, el)| {
            let p = el.degree as i64;
            let mut r = resize(&sol.f_coeffs[k], p - 1);
            for (ri, li) in r.iter_mut().zip(laplacian(&sol.pi_coeffs[k], el.space.h())) {
                *ri += li;
            }
            r
        })
        .collect();
    let edge = mesh
        .edges
        .par_iter()
        .enumerate()
        .map(|(e, edge)| {
            let r = edge.right?;
            let q = sol.degrees.edges[e] - 1;
            let (t, _) = edge_nodes(q);
            let (a, b) = (mesh.vertices[edge.v[0]], mesh.vertices[edge.v[1]]);
            let n = mesh.edge_normal(e);
            let (el, er) = (&sol.elements[edge.left], &sol.elements[r]);
            let values = t
                .iter()
                .map(|s| {
                    let x = a + (b - a) * *s;
                    let gl = el.space.frame.grad(&sol.pi_coeffs[edge.left], &x);
                    let gr = er.space.frame.grad(&sol.pi_coeffs[r], &x);
                    (gl[0] - gr[0]) * n.x + (gl[1] - gr[1]) * n.y
                })
                .collect();
            Some(EdgePoly { degree: q, values })
        })
        .collect();
    ResidualData { bulk, edge }
}

/// Lowest-order hat functions projected elementwise: for each cell and each
/// vertex of its loop, the `P_1` coefficients of `Π∇_1 φ_ν` in the cell frame.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    pub cells: Vec<Vec<(usize, Vec<f64>)>>,
}

impl PartitionOfUnity {
    pub fn new(mesh: &PolygonalMesh) -> crate::Result<Self> {
        let cells = (0..mesh.n_cells())
            .into_par_iter()
            .map(|k| {
                let pts = mesh.cell_points(k);
                let el = PrimalElement::new(k, &pts, 1, &vec![1; pts.len()], Stabilization::DofiDofi)?;
                Ok(mesh.cells[k]
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (v, el.pi_nabla.column(i).iter().copied().collect()))
                    .collect())
            })
            .collect::<crate::Result<Vec<_>>>()?;
        Ok(Self { cells })
    }

    /// Largest coefficient deviation of `Σ_ν Π∇_1 φ_ν` from the constant 1.
    pub fn defect(&self) -> f64 {
        self.cells
            .iter()
            .map(|hats| {
                let mut s = [0.0; 3];
                for (_, c) in hats {
                    for i in 0..3 {
                        s[i] += c[i];
                    }
                }
                (s[0] - 1.0).abs().max(s[1].abs()).max(s[2].abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Localized residual data: `r^K_ν` per cell and loop vertex, `r^e_ν` per
/// internal edge for its two end vertices.
#[derive(Debug, Clone)]
pub struct LocalizedResiduals {
    /// `bulk[k][i]` belongs to vertex `cells[k][i]`, degree `p_K`.
    pub bulk: Vec<Vec<Vec<f64>>>,
    /// `edge[e] = [r^e_{v0}, r^e_{v1}]`, degree `p_e`.
    pub edge: Vec<Option<[EdgePoly; 2]>>,
}

pub fn localize_residuals(res: &ResidualData, pou: &PartitionOfUnity) -> LocalizedResiduals {
    let bulk = pou
        .cells
        .iter()
        .zip(&res.bulk)
        .map(|(hats, r)| hats.iter().map(|(_, c)| multiply(c, r)).collect())
        .collect();
    let edge = res
        .edge
        .iter()
        .map(|r| r.as_ref().map(|r| [r.times_linear(1.0, 0.0), r.times_linear(0.0, 1.0)]))
        .collect();
    LocalizedResiduals { bulk, edge }
}

impl LocalizedResiduals {
    /// Largest deviation of `Σ_ν r^K_ν` from `r^K` and of `Σ_ν r^e_ν` from `r^e`.
    pub fn partition_defect(&self, res: &ResidualData) -> f64 {
        let mut worst: f64 = 0.0;
        for (parts, r) in self.bulk.iter().zip(&res.bulk) {
            let n = parts.first().map_or(0, |p| p.len());
            let mut s = vec![0.0; n];
            for part in parts {
                for (si, pi) in s.iter_mut().zip(part) {
                    *si += pi;
                }
            }
            let r = resize(r, crate::polybasis::degree_of_len(n.max(1)) as i64);
            for (si, ri) in s.iter().zip(&r) {
                worst = worst.max((si - ri).abs());
            }
        }
        for (parts, r) in self.edge.iter().zip(&res.edge) {
            if let (Some([a, b]), Some(r)) = (parts, r) {
                let full = r.at_degree(a.degree);
                for i in 0..full.len() {
                    worst = worst.max((a.values[i] + b.values[i] - full[i]).abs());
                }
            }
        }
        worst
    }
}

/// `(r, m_γ)_{0,K}` for `|γ| ≤ q`, with `r` of any degree.
pub(crate) fn moments(space: &crate::polybasis::ScaledMonomialSpace, r: &[f64], q: usize) -> Vec<f64> {
    if r.is_empty() {
        return vec![0.0; dim(q as i64)];
    }
    let dr = crate::polybasis::degree_of_len(r.len()) as i64;
    (space.mass(q as i64, dr) * DVector::from_column_slice(r)).as_slice().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Point;
    use crate::primal::{assemble_and_solve, DegreeMap};

    #[test]
    fn partition_of_unity_identities() {
        let mesh = PolygonalMesh::square(2).refine(&[0]).unwrap().0;
        let pou = PartitionOfUnity::new(&mesh).unwrap();
        assert!(pou.defect() < 1e-12);
        assert!(mesh.cells.iter().any(|c| c.len() == 5));
        // triangles: the hat projections are the hats themselves
        let tri = PolygonalMesh::new(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.2, 0.9)],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        let pou = PartitionOfUnity::new(&tri).unwrap();
        let frame = crate::polybasis::ScaledMonomialSpace::new(0, &tri.vertices, 1).frame;
        for (i, (_, c)) in pou.cells[0].iter().enumerate() {
            for (j, v) in tri.vertices.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((frame.eval(c, v) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn edge_residual_is_orientation_free() {
        let v = [(0.0, 0.0), (0.5, 0.0), (1.0, 0.0), (1.0, 1.0), (0.5, 1.0), (0.0, 1.0)];
        let mesh = PolygonalMesh::new(
            v.iter().map(|&(x, y)| Point::new(x, y)).collect(),
            vec![vec![0, 1, 4, 5], vec![1, 2, 3, 4]],
        )
        .unwrap();
        let mut sol = assemble_and_solve(&mesh, &DegreeMap::uniform(&mesh, 1), &|_| 0.0, &|_| 0.0, Stabilization::DofiDofi).unwrap();
        // Π∇u = x on the left cell and 0 on the right cell
        let fr = sol.elements[0].space.frame;
        sol.pi_coeffs[0] = vec![fr.center.x, fr.h, 0.0];
        sol.pi_coeffs[1] = vec![0.0; 3];
        let res = compute_residuals(&mesh, &sol);
        let e = mesh.internal_edges().next().unwrap();
        assert!(res.edge[e].as_ref().unwrap().values.iter().all(|r| (r - 1.0).abs() < 1e-14));
        assert!(res.bulk.iter().flatten().all(|r| r.abs() < 1e-14));
    }

    #[test]
    fn localized_residuals_reassemble() {
        let mesh = PolygonalMesh::lshape(2).refine(&[0, 5]).unwrap().0;
        let degrees = DegreeMap::from_cells(&mesh, (0..mesh.n_cells()).map(|k| 1 + k % 3).collect()).unwrap();
        let sol = assemble_and_solve(
            &mesh,
            &degrees,
            &|x| x.x * x.y,
            &|x| (x.x * 3.0).sin() + x.y,
            Stabilization::DofiDofi,
        )
        .unwrap();
        let res = compute_residuals(&mesh, &sol);
        let pou = PartitionOfUnity::new(&mesh).unwrap();
        let loc = localize_residuals(&res, &pou);
        assert!(loc.partition_defect(&res) < 1e-10);
    }

    fn lshape_solution(p: usize) -> (PolygonalMesh, PrimalSolution) {
        let mesh = PolygonalMesh::lshape(4);
        let g = crate::problem::lshape_solution;
        let sol = assemble_and_solve(&mesh, &DegreeMap::uniform(&mesh, p), &|_| 0.0, &g, Stabilization::DofiDofi).unwrap();
        (mesh, sol)
    }

    #[test]
    fn global_flux_equilibrates() {
        for p in 1..=3 {
            let (mesh, sol) = lshape_solution(p);
            assert_eq!(mesh.n_cells(), 48);
            let res = compute_residuals(&mesh, &sol);
            let gf = global_reconstruct(&mesh, &sol.degrees.cells, &res).unwrap();
            let (b, j) = gf.equilibration_defect(&mesh, &res);
            assert!(b < 1e-9 && j < 1e-9, "p={p}: {b:e} {j:e}");
            assert!(gf.energies().iter().sum::<f64>() > 0.0);
        }
    }

    #[test]
    fn local_fluxes_equilibrate_and_stay_in_patch() {
        for p in 1..=3 {
            let (mesh, sol) = lshape_solution(p);
            let res = compute_residuals(&mesh, &sol);
            let pou = PartitionOfUnity::new(&mesh).unwrap();
            let loc = localize_residuals(&res, &pou);
            let lf = reconstruct_all_local(&mesh, &sol.degrees.cells, &loc).unwrap();
            assert!(lf.equilibration_defect(&mesh, &res) < 1e-9);
            assert!(lf.jump_defect(&mesh, &res) < 1e-9);
            for patch in &lf.patches {
                for &k in &patch.cells {
                    assert!(mesh.cells[k].contains(&patch.vertex));
                }
            }
        }
    }

    #[test]
    fn boundary_vertex_constraint_count() {
        let (mesh, sol) = lshape_solution(2);
        let res = compute_residuals(&mesh, &sol);
        let pou = PartitionOfUnity::new(&mesh).unwrap();
        let loc = localize_residuals(&res, &pou);
        let elements: Vec<_> = (0..mesh.n_cells())
            .map(|k| crate::mixed::FluxElement::new(k, &mesh.cell_points(k), 2).unwrap())
            .collect();
        for patch in mesh.vertex_patches().iter().filter(|p| p.is_boundary_vertex) {
            let lf = local_reconstruct(&mesh, patch, &elements, &loc).unwrap();
            let rim_without = patch.rim_edges.iter().filter(|&&e| !mesh.edges[e].contains(patch.vertex)).count();
            assert_eq!(lf.n_constrained, 3 * rim_without);
        }
    }

    #[test]
    fn patch_test_gives_zero_fluxes() {
        let mesh = PolygonalMesh::square(3);
        let sol = assemble_and_solve(
            &mesh,
            &DegreeMap::uniform(&mesh, 2),
            &|_| -2.0,
            &|x| x.x * x.x + x.y,
            Stabilization::DofiDofi,
        )
        .unwrap();
        let res = compute_residuals(&mesh, &sol);
        let gf = global_reconstruct(&mesh, &sol.degrees.cells, &res).unwrap();
        assert!(gf.energies().iter().sum::<f64>() < 1e-20);
        let loc = localize_residuals(&res, &PartitionOfUnity::new(&mesh).unwrap());
        let lf = reconstruct_all_local(&mesh, &sol.degrees.cells, &loc).unwrap();
        assert!(lf.energies().iter().sum::<f64>() < 1e-20);
    }
}
