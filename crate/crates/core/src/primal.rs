//! Primal virtual elements for `-Δu = f` with Dirichlet data.
//!
//! Local DOF layout on a cell with `n` vertices: the `n` vertex values, then
//! for each local edge `i` (from vertex `i` to `i+1`) the `p_e - 1` values at the
//! interior Gauss-Lobatto nodes in loop direction, then the scaled moments
//! `(1/|K|) ∫_K v m_α` for `|α| ≤ p - 2`.

use crate::error::{Result, VemError};
use crate::mesh::{Point, PolygonalMesh};
use crate::polybasis::quadrature::unit_interval;
use crate::polybasis::{dim, laplacian, polygon_quadrature, EdgeFamily, ScaledMonomialSpace};
use crate::sparse::TripletMatrix;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stabilization {
    /// Identity on the DOF space.
    DofiDofi,
    /// `h⁻¹`-scaled Gauss-Lobatto weighted trace values plus moment values.
    Boundary,
}

impl FromStr for Stabilization {
    type Err = VemError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dofi-dofi" | "dofi" => Ok(Self::DofiDofi),
            "boundary" => Ok(Self::Boundary),
            _ => Err(VemError::Config(format!("unknown stabilization '{s}'"))),
        }
    }
}

impl std::fmt::Display for Stabilization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::DofiDofi => "dofi-dofi",
            Self::Boundary => "boundary",
        })
    }
}

/// Per-cell degrees and the induced edge trace degrees (max of the neighbours).
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeMap {
    pub cells: Vec<usize>,
    pub edges: Vec<usize>,
}

impl DegreeMap {
    pub fn uniform(mesh: &PolygonalMesh, p: usize) -> Self {
        Self {
            cells: vec![p; mesh.n_cells()],
            edges: vec![p; mesh.edges.len()],
        }
    }

    pub fn from_cells(mesh: &PolygonalMesh, cells: Vec<usize>) -> Result<Self> {
        if cells.len() != mesh.n_cells() {
            return Err(VemError::DegreeMap(format!("{} degrees for {} cells", cells.len(), mesh.n_cells())));
        }
        if let Some(k) = cells.iter().position(|&p| p == 0) {
            return Err(VemError::DegreeMap(format!("cell {k} has degree 0")));
        }
        let edges = mesh
            .edges
            .iter()
            .map(|e| e.right.map_or(cells[e.left], |r| cells[e.left].max(cells[r])))
            .collect();
        Ok(Self { cells, edges })
    }

    pub fn check(&self, mesh: &PolygonalMesh) -> Result<()> {
        let expect = Self::from_cells(mesh, self.cells.clone())?;
        if expect.edges != self.edges {
            return Err(VemError::DegreeMap("edge degrees are not the max of the adjacent cells".into()));
        }
        Ok(())
    }

    pub fn min(&self) -> usize {
        self.cells.iter().copied().min().unwrap_or(0)
    }

    pub fn max(&self) -> usize {
        self.cells.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct PrimalElement {
    pub element_id: usize,
    pub degree: usize,
    pub edge_degrees: Vec<usize>,
    pub vertices: Vec<Point>,
    pub space: ScaledMonomialSpace,
    pub n_dofs: usize,
    /// First DOF of the interior nodes of each local edge.
    pub edge_offsets: Vec<usize>,
    pub moment_offset: usize,
    /// Positions of the boundary DOFs (vertices and edge nodes), in layout order.
    pub nodes: Vec<Point>,
    /// Boundary quadrature weight carried by each boundary DOF.
    pub node_weights: Vec<f64>,
    /// DOFs → coefficients of `Π∇_p`.
    pub pi_nabla: DMatrix<f64>,
    /// Monomial coefficients → DOFs.
    pub dof_of_poly: DMatrix<f64>,
    /// DOFs → coefficients of `Π⁰_{p-2}` (zero rows for `p < 2`).
    pub pi0: DMatrix<f64>,
    pub consistency: DMatrix<f64>,
    /// `(I - Π)ᵀ S (I - Π)` in DOF space.
    pub stabilization: DMatrix<f64>,
    /// `I - Π` in DOF space.
    pub nonpolynomial: DMatrix<f64>,
    /// Diagonal of `S`.
    pub stab_weights: Vec<f64>,
}

impl PrimalElement {
    pub fn new(element_id: usize, vertices: &[Point], degree: usize, edge_degrees: &[usize], stab: Stabilization) -> Result<Self> {
        let nv = vertices.len();
        if edge_degrees.len() != nv || edge_degrees.iter().any(|&pe| pe < degree) || degree == 0 {
            return Err(VemError::DegreeMap(format!("element {element_id}: inconsistent edge degrees")));
        }
        let p = degree;
        let space = ScaledMonomialSpace::new(element_id, vertices, p);
        let h = space.h();
        let area = space.area;
        let np = dim(p as i64);
        let nm = dim(p as i64 - 2);

        let mut edge_offsets = Vec::with_capacity(nv);
        let mut off = nv;
        for &pe in edge_degrees {
            edge_offsets.push(off);
            off += pe - 1;
        }
        let moment_offset = off;
        let n = off + nm;

        let mut nodes = vertices.to_vec();
        let mut node_weights = vec![0.0; moment_offset];
        // (dof index, weight, normal) for every boundary quadrature node
        let mut bnodes: Vec<(usize, f64, Point)> = Vec::new();
        for i in 0..nv {
            let (a, b) = (vertices[i], vertices[(i + 1) % nv]);
            let d = b - a;
            let len = d.norm();
            let normal = Point::new(d.y, -d.x) / len;
            let pe = edge_degrees[i];
            let (t, w) = unit_interval(pe + 1, EdgeFamily::GaussLobatto);
            for j in 0..=pe {
                let dof = if j == 0 {
                    i
                } else if j == pe {
                    (i + 1) % nv
                } else {
                    edge_offsets[i] + j - 1
                };
                if j > 0 && j < pe {
                    nodes.push(a + d * t[j]);
                }
                node_weights[dof] += w[j] * len;
                bnodes.push((dof, w[j] * len, normal));
            }
        }
        let node_pos = |dof: usize| nodes[dof];

        let mut d_mat = DMatrix::zeros(n, np);
        for dof in 0..moment_offset {
            let vals = space.frame.eval_basis(p, &node_pos(dof));
            for (a, v) in vals.into_iter().enumerate() {
                d_mat[(dof, a)] = v;
            }
        }
        let mom = space.mass(p as i64 - 2, p as i64);
        for r in 0..nm {
            for a in 0..np {
                d_mat[(moment_offset + r, a)] = mom[(r, a)] / area;
            }
        }

        let mut b_mat = DMatrix::zeros(np, n);
        for dof in 0..moment_offset {
            b_mat[(0, dof)] = node_weights[dof];
        }
        for &(dof, w, normal) in &bnodes {
            let g = space.frame.grad_basis(p, &node_pos(dof));
            for a in 1..np {
                b_mat[(a, dof)] += w * (normal.x * g[a][0] + normal.y * g[a][1]);
            }
        }
        if p >= 2 {
            for a in 1..np {
                let mut unit = vec![0.0; np];
                unit[a] = 1.0;
                for (r, c) in laplacian(&unit, h).into_iter().enumerate() {
                    b_mat[(a, moment_offset + r)] -= c * area;
                }
            }
        }

        let g_mat = &b_mat * &d_mat;
        let lu = g_mat.clone().lu();
        let pi_nabla = lu.solve(&b_mat).ok_or_else(|| VemError::SingularLocal {
            element: element_id,
            what: "energy projector system".into(),
        })?;
        // guard against a numerically singular G
        let check = &g_mat * &pi_nabla - &b_mat;
        if !(check.amax() <= 1e-8 * b_mat.amax().max(1.0)) {
            return Err(VemError::SingularLocal {
                element: element_id,
                what: "energy projector system".into(),
            });
        }

        let pi0 = if p >= 2 {
            let m = space.mass(p as i64 - 2, p as i64 - 2);
            let chol = m.cholesky().ok_or_else(|| VemError::SingularLocal {
                element: element_id,
                what: "moment mass matrix".into(),
            })?;
            let mut sel = DMatrix::zeros(nm, n);
            for r in 0..nm {
                sel[(r, moment_offset + r)] = area;
            }
            chol.solve(&sel)
        } else {
            DMatrix::zeros(1, n)
        };

        let stiff = space.stiffness(p);
        let consistency = pi_nabla.transpose() * &stiff * &pi_nabla;
        let proj = &d_mat * &pi_nabla;
        let i_minus = DMatrix::identity(n, n) - proj;
        let s_diag: Vec<f64> = match stab {
            Stabilization::DofiDofi => vec![1.0; n],
            Stabilization::Boundary => (0..n).map(|i| if i < moment_offset { node_weights[i] / h } else { 1.0 }).collect(),
        };
        let s = DMatrix::from_diagonal(&DVector::from_vec(s_diag.clone()));
        let stabilization = i_minus.transpose() * s * &i_minus;

        Ok(Self {
            element_id,
            degree,
            edge_degrees: edge_degrees.to_vec(),
            vertices: vertices.to_vec(),
            space,
            n_dofs: n,
            edge_offsets,
            moment_offset,
            nodes,
            node_weights,
            pi_nabla,
            dof_of_poly: d_mat,
            pi0,
            consistency,
            stabilization,
            nonpolynomial: i_minus,
            stab_weights: s_diag,
        })
    }

    pub fn stiffness(&self) -> DMatrix<f64> {
        &self.consistency + &self.stabilization
    }

    /// DOFs of a smooth function (moments by polygon quadrature).
    pub fn interpolate(&self, u: impl Fn(&Point) -> f64) -> Vec<f64> {
        let mut out: Vec<f64> = self.nodes.iter().map(&u).collect();
        let p = self.degree;
        if p >= 2 {
            let rule = polygon_quadrature(&self.vertices, 2 * p + 6);
            let mut mom = vec![0.0; dim(p as i64 - 2)];
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let ux = u(x) * w / self.space.area;
                for (m, b) in mom.iter_mut().zip(self.space.frame.eval_basis(p - 2, x)) {
                    *m += ux * b;
                }
            }
            out.extend(mom);
        }
        out
    }

    /// DOFs of a polynomial given by coefficients in the element frame.
    pub fn dofs_of_poly(&self, coeffs: &[f64]) -> Vec<f64> {
        let c = DVector::from_iterator(
            self.dof_of_poly.ncols(),
            (0..self.dof_of_poly.ncols()).map(|i| coeffs.get(i).copied().unwrap_or(0.0)),
        );
        (&self.dof_of_poly * c).as_slice().to_vec()
    }

    pub fn project(&self, dofs: &[f64]) -> Vec<f64> {
        (&self.pi_nabla * DVector::from_column_slice(dofs)).as_slice().to_vec()
    }

    pub fn project_l2(&self, dofs: &[f64]) -> Vec<f64> {
        (&self.pi0 * DVector::from_column_slice(dofs)).as_slice().to_vec()
    }

    /// Load vector for `f` given as coefficients in the element frame:
    /// `(f, Π⁰_{p-2} φ_i)` for `p ≥ 2` and `(f, Π∇_1 φ_i)` for `p = 1`.
    pub fn load(&self, f: &[f64]) -> Vec<f64> {
        if f.iter().all(|&v| v == 0.0) {
            return vec![0.0; self.n_dofs];
        }
        let df = crate::polybasis::degree_of_len(f.len()) as i64;
        let fv = DVector::from_column_slice(f);
        let out = if self.degree >= 2 {
            let m = self.space.mass(self.degree as i64 - 2, df);
            self.pi0.transpose() * (m * fv)
        } else {
            let m = self.space.mass(self.degree as i64, df);
            self.pi_nabla.transpose() * (m * fv)
        };
        out.as_slice().to_vec()
    }

    /// `S((I-Π)v, (I-Π)v)`.
    pub fn stabilization_energy(&self, dofs: &[f64]) -> f64 {
        let w = &self.nonpolynomial * DVector::from_column_slice(dofs);
        w.iter().zip(&self.stab_weights).map(|(x, s)| s * x * x).sum()
    }
}

/// Global numbering: vertices, then edge interior nodes, then cell moments.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub n_dofs: usize,
    pub edge_offsets: Vec<usize>,
    pub cell_offsets: Vec<usize>,
    pub local_to_global: Vec<Vec<usize>>,
    pub dirichlet: Vec<bool>,
    /// Position of each boundary-type DOF (unused for moments).
    pub positions: Vec<Option<Point>>,
}

impl DofMap {
    pub fn new(mesh: &PolygonalMesh, degrees: &DegreeMap) -> Self {
        let nv = mesh.n_vertices();
        let mut positions: Vec<Option<Point>> = mesh.vertices.iter().map(|p| Some(*p)).collect();
        let mut dirichlet = mesh.boundary_vertices();
        let mut edge_offsets = Vec::with_capacity(mesh.edges.len());
        let mut off = nv;
        for (e, edge) in mesh.edges.iter().enumerate() {
            edge_offsets.push(off);
            let pe = degrees.edges[e];
            let (t, _) = unit_interval(pe + 1, EdgeFamily::GaussLobatto);
            let (a, b) = (mesh.vertices[edge.v[0]], mesh.vertices[edge.v[1]]);
            for tj in &t[1..pe] {
                positions.push(Some(a + (b - a) * *tj));
                dirichlet.push(edge.is_boundary());
            }
            off += pe - 1;
        }
        let mut cell_offsets = Vec::with_capacity(mesh.n_cells());
        for &p in &degrees.cells {
            cell_offsets.push(off);
            let nm = dim(p as i64 - 2);
            positions.extend(std::iter::repeat_n(None, nm));
            dirichlet.extend(std::iter::repeat_n(false, nm));
            off += nm;
        }
        let local_to_global = (0..mesh.n_cells())
            .map(|k| {
                let mut map: Vec<usize> = mesh.cells[k].clone();
                for ce in &mesh.cell_edges[k] {
                    let pe = degrees.edges[ce.edge];
                    for j in 1..pe {
                        let c = if ce.forward { j - 1 } else { pe - 1 - j };
                        map.push(edge_offsets[ce.edge] + c);
                    }
                }
                map.extend((0..dim(degrees.cells[k] as i64 - 2)).map(|r| cell_offsets[k] + r));
                map
            })
            .collect();
        Self {
            n_dofs: off,
            edge_offsets,
            cell_offsets,
            local_to_global,
            dirichlet,
            positions,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PrimalSolution {
    pub degrees: DegreeMap,
    pub dofmap: DofMap,
    pub dofs: Vec<f64>,
    pub elements: Vec<PrimalElement>,
    pub local_dofs: Vec<Vec<f64>>,
    /// `Π∇_p u` per element, in the element frame.
    pub pi_coeffs: Vec<Vec<f64>>,
    pub stab_energy: Vec<f64>,
    /// Load data projected onto `P_{p-1}(K)`.
    pub f_coeffs: Vec<Vec<f64>>,
    pub relative_residual: f64,
}

impl PrimalSolution {
    pub fn n_dofs(&self) -> usize {
        self.dofmap.n_dofs
    }
}

pub fn build_elements(mesh: &PolygonalMesh, degrees: &DegreeMap, stab: Stabilization) -> Result<Vec<PrimalElement>> {
    (0..mesh.n_cells())
        .into_par_iter()
        .map(|k| {
            let pe: Vec<usize> = mesh.cell_edges[k].iter().map(|ce| degrees.edges[ce.edge]).collect();
            PrimalElement::new(k, &mesh.cell_points(k), degrees.cells[k], &pe, stab)
        })
        .collect()
}

/// Assemble the primal system, impose `g` on boundary DOFs by interpolation and solve.
pub fn assemble_and_solve(
    mesh: &PolygonalMesh,
    degrees: &DegreeMap,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    g: &(dyn Fn(&Point) -> f64 + Sync),
    stab: Stabilization,
) -> Result<PrimalSolution> {
    degrees.check(mesh)?;
    let elements = build_elements(mesh, degrees, stab)?;
    let f_coeffs: Vec<Vec<f64>> = elements
        .par_iter()
        .map(|el| el.space.project(&el.vertices, el.degree - 1, f, 4))
        .collect();
    let dofmap = DofMap::new(mesh, degrees);
    let n = dofmap.n_dofs;
    let mut full = vec![0.0; n];
    for i in 0..n {
        if dofmap.dirichlet[i] {
            full[i] = g(&dofmap.positions[i].expect("boundary DOF has a position"));
        }
    }
    let mut free_index = vec![usize::MAX; n];
    let mut n_free = 0;
    for i in 0..n {
        if !dofmap.dirichlet[i] {
            free_index[i] = n_free;
            n_free += 1;
        }
    }
    let locals: Vec<(DMatrix<f64>, Vec<f64>)> = elements
        .par_iter()
        .zip(&f_coeffs)
        .map(|(el, fk)| (el.stiffness(), el.load(fk)))
        .collect();
    let mut a = TripletMatrix::new(n_free);
    let mut rhs = vec![0.0; n_free];
    for (k, (ak, bk)) in locals.iter().enumerate() {
        let map = &dofmap.local_to_global[k];
        for (i, &gi) in map.iter().enumerate() {
            let fi = free_index[gi];
            if fi == usize::MAX {
                continue;
            }
            rhs[fi] += bk[i];
            for (j, &gj) in map.iter().enumerate() {
                let fj = free_index[gj];
                if fj == usize::MAX {
                    rhs[fi] -= ak[(i, j)] * full[gj];
                } else {
                    a.push(fi, fj, ak[(i, j)]);
                }
            }
        }
    }
    let x = a.solve(&rhs, 1e-10)?;
    let relative_residual = a.relative_residual(&x, &rhs);
    for i in 0..n {
        if free_index[i] != usize::MAX {
            full[i] = x[free_index[i]];
        }
    }
    let local_dofs: Vec<Vec<f64>> = dofmap
        .local_to_global
        .iter()
        .map(|m| m.iter().map(|&i| full[i]).collect())
        .collect();
    let pi_coeffs = elements.iter().zip(&local_dofs).map(|(el, u)| el.project(u)).collect();
    let stab_energy = elements.iter().zip(&local_dofs).map(|(el, u)| el.stabilization_energy(u)).collect();
    Ok(PrimalSolution {
        degrees: degrees.clone(),
        dofmap,
        dofs: full,
        elements,
        local_dofs,
        pi_coeffs,
        stab_energy,
        f_coeffs,
        relative_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]
    }

    fn element(pts: &[Point], p: usize) -> PrimalElement {
        PrimalElement::new(0, pts, p, &vec![p; pts.len()], Stabilization::DofiDofi).unwrap()
    }

    #[test]
    fn hat_function_projection() {
        let el = element(&unit_square(), 1);
        let c = el.project(&[1.0, 0.0, 0.0, 0.0]);
        // Π∇ φ = 3/4 - x/2 - y/2
        for (x, y) in [(0.0, 0.0), (1.0, 1.0), (0.3, 0.8)] {
            let v = el.space.frame.eval(&c, &Point::new(x, y));
            assert!((v - (0.75 - x / 2.0 - y / 2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn reproduces_quadratic() {
        let el = element(&unit_square(), 2);
        let q = |x: &Point| x.x * x.x - x.y * x.y;
        let c = el.project(&el.interpolate(q));
        for pt in [Point::new(0.1, 0.7), Point::new(0.9, 0.2)] {
            assert!((el.space.frame.eval(&c, &pt) - q(&pt)).abs() < 1e-12);
        }
    }

    #[test]
    fn l2_projector_examples() {
        let el = element(&unit_square(), 2);
        let c = el.project_l2(&el.interpolate(|x| x.x * x.x));
        assert_eq!(c.len(), 1);
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-13);
        let el = element(&unit_square(), 3);
        let c = el.project_l2(&el.interpolate(|x| x.x));
        let pt = Point::new(0.3, 0.9);
        assert!((el.space.frame.eval(&c, &pt) - 0.3).abs() < 1e-13);
        let mut zero_moments = el.interpolate(|x| x.x * x.y);
        for v in &mut zero_moments[el.moment_offset..] {
            *v = 0.0;
        }
        assert!(el.project_l2(&zero_moments).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn lowest_order_square_stiffness() {
        let el = element(&unit_square(), 1);
        let a = el.stiffness();
        assert!((&a - a.transpose()).amax() < 1e-14);
        for i in 0..4 {
            assert!(a.row(i).sum().abs() < 1e-14);
        }
        let eig = a.symmetric_eigen().eigenvalues;
        let zero = eig.iter().filter(|v| v.abs() < 1e-12).count();
        assert_eq!(zero, 1);
        assert!(eig.iter().all(|&v| v > -1e-13));
    }

    #[test]
    fn stiffness_is_consistent_on_polynomials() {
        let hex: Vec<Point> = (0..6)
            .map(|i| {
                let t = std::f64::consts::PI / 3.0 * i as f64;
                Point::new(0.3 + t.cos(), -0.2 + 0.8 * t.sin())
            })
            .collect();
        for p in 1..=4 {
            let el = element(&hex, p);
            let q = |x: &Point| x.x * x.x * x.y - 0.5 * x.y + if p >= 3 { 1.0 } else { 0.0 };
            let grad = |x: &Point| [2.0 * x.x * x.y, x.x * x.x - 0.5];
            let dq = el.interpolate(|x| if p >= 3 { q(x) } else { x.x - 0.5 * x.y });
            let energy: f64 = if p >= 3 {
                polygon_quadrature(&hex, 8).integrate(|x| {
                    let g = grad(x);
                    g[0] * g[0] + g[1] * g[1]
                })
            } else {
                1.25 * el.space.area
            };
            let v = DVector::from_vec(dq.clone());
            let a = (v.transpose() * el.stiffness() * &v)[(0, 0)];
            assert!((a - energy).abs() < 1e-10 * energy, "p={p}: {a} vs {energy}");
            assert!(el.stabilization_energy(&dq) < 1e-12);
        }
    }

    fn gradient_error(sol: &PrimalSolution, mesh: &PolygonalMesh, grad: impl Fn(&Point) -> [f64; 2]) -> f64 {
        (0..mesh.n_cells())
            .map(|k| {
                let el = &sol.elements[k];
                polygon_quadrature(&el.vertices, 2 * el.degree + 4).integrate(|x| {
                    let g = grad(x);
                    let gh = el.space.frame.grad(&sol.pi_coeffs[k], x);
                    (g[0] - gh[0]).powi(2) + (g[1] - gh[1]).powi(2)
                })
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn linear_patch_test() {
        let mesh = PolygonalMesh::square(2);
        let u = |x: &Point| x.x + x.y;
        let sol = assemble_and_solve(&mesh, &DegreeMap::uniform(&mesh, 1), &|_| 0.0, &u, Stabilization::DofiDofi).unwrap();
        for (v, p) in mesh.vertices.iter().enumerate() {
            assert!((sol.dofs[v] - u(p)).abs() < 1e-10);
        }
    }

    #[test]
    fn harmonic_cubic_patch_test() {
        let mesh = PolygonalMesh::square(2);
        let u = |x: &Point| x.x.powi(3) - 3.0 * x.x * x.y * x.y;
        let grad = |x: &Point| [3.0 * x.x * x.x - 3.0 * x.y * x.y, -6.0 * x.x * x.y];
        let sol = assemble_and_solve(&mesh, &DegreeMap::uniform(&mesh, 3), &|_| 0.0, &u, Stabilization::DofiDofi).unwrap();
        assert!(gradient_error(&sol, &mesh, grad) < 1e-8);
        assert!(sol.stab_energy.iter().all(|&s| s < 1e-20));
    }

    #[test]
    fn poisson_with_load_and_mixed_degrees() {
        // u = x² + y², -Δu = -4
        let mesh = PolygonalMesh::square(2).refine(&[0]).unwrap().0;
        let u = |x: &Point| x.x * x.x + x.y * x.y;
        let grad = |x: &Point| [2.0 * x.x, 2.0 * x.y];
        let degrees = DegreeMap::from_cells(&mesh, (0..mesh.n_cells()).map(|k| 2 + k % 2).collect()).unwrap();
        for stab in [Stabilization::DofiDofi, Stabilization::Boundary] {
            let sol = assemble_and_solve(&mesh, &degrees, &|_| -4.0, &u, stab).unwrap();
            assert!(gradient_error(&sol, &mesh, grad) < 1e-9);
        }
    }

    #[test]
    fn degree_map_rejects_inconsistent_edges() {
        let mesh = PolygonalMesh::square(2);
        let mut d = DegreeMap::from_cells(&mesh, vec![1, 2, 1, 1]).unwrap();
        assert!(d.check(&mesh).is_ok());
        d.edges.iter_mut().for_each(|p| *p = 1);
        assert!(d.check(&mesh).is_err());
        assert!(DegreeMap::from_cells(&mesh, vec![1, 0, 1, 1]).is_err());
    }
}
