//! Broken mixed virtual elements for fluxes and edge multipliers.
//!
//! Local DOF layout at flux degree `q` on a cell with `n` edges: for each local
//! edge in loop direction the outward normal trace at the `q+1` Gauss nodes,
//! then the moments `(1/|K|) ∫ τ·h∇m_α` for `1 ≤ |α| ≤ q`, then the moments
//! `(1/|K|) ∫ τ·m_β(Y,-X)` for `|β| ≤ q-1`.

use crate::error::{Result, VemError};
use crate::mesh::{Point, PolygonalMesh};
use crate::polybasis::decomposition::build_decomposition;
use crate::polybasis::quadrature::unit_interval;
use crate::polybasis::{dim, polygon_quadrature, EdgeFamily, ScaledMonomialSpace, VectorPoly};
use nalgebra::{DMatrix, DVector};

/// Gauss nodes and weights on [0, 1] carrying a degree-`q` edge polynomial.
pub fn edge_nodes(q: usize) -> (Vec<f64>, Vec<f64>) {
    unit_interval(q + 1, EdgeFamily::Gauss)
}

/// Lagrange interpolation from values at `from` to values at `to`.
pub fn lagrange_matrix(from: &[f64], to: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(to.len(), from.len(), |i, j| {
        let mut l = 1.0;
        for (k, xk) in from.iter().enumerate() {
            if k != j {
                l *= (to[i] - xk) / (from[j] - xk);
            }
        }
        l
    })
}

#[derive(Debug, Clone)]
pub struct FluxElement {
    pub element_id: usize,
    pub degree: usize,
    pub vertices: Vec<Point>,
    pub space: ScaledMonomialSpace,
    pub n_dofs: usize,
    pub n_edges: usize,
    pub grad_offset: usize,
    pub perp_offset: usize,
    /// Gauss nodes on [0, 1] (loop direction) and weights.
    pub node_t: Vec<f64>,
    pub node_w: Vec<f64>,
    pub edge_lengths: Vec<f64>,
    pub normals: Vec<Point>,
    /// Union basis: gradients then completion fields, all of degree `q`.
    pub basis: Vec<VectorPoly>,
    /// Mass Gram of the union basis.
    pub gram: DMatrix<f64>,
    /// Inverse of the map from moment DOFs to raw moments against the union basis.
    pub moment_factor_inv: DMatrix<f64>,
    /// Mass matrix of `P_q`.
    pub mass_q: DMatrix<f64>,
    /// DOFs → coefficients of `div τ` in `P_q`.
    pub div: DMatrix<f64>,
    /// DOFs → union-basis coefficients of `Π⁰_q τ`.
    pub pi0: DMatrix<f64>,
    /// Union-basis coefficients → DOFs.
    pub dof_of_basis: DMatrix<f64>,
    /// `S` on the full DOF space.
    pub stab_form: DMatrix<f64>,
    /// `I - Π` in DOF space.
    pub nonpolynomial: DMatrix<f64>,
    pub consistency: DMatrix<f64>,
    pub mass: DMatrix<f64>,
}

impl FluxElement {
    pub fn new(element_id: usize, vertices: &[Point], q: usize) -> Result<Self> {
        let nv = vertices.len();
        let space = ScaledMonomialSpace::new(element_id, vertices, q + 1);
        let h = space.h();
        let area = space.area;
        let dec = build_decomposition(&space, q)?;
        let basis: Vec<VectorPoly> = dec.union().cloned().collect();
        let nu = basis.len();
        let nq = dim(q as i64);
        let n_grad = nq - 1;
        let n_perp = dim(q as i64 - 1);
        let grad_offset = nv * (q + 1);
        let perp_offset = grad_offset + n_grad;
        let n = perp_offset + n_perp;
        let (node_t, node_w) = edge_nodes(q);

        let mut edge_lengths = Vec::with_capacity(nv);
        let mut normals = Vec::with_capacity(nv);
        let mut node_pts = Vec::with_capacity(grad_offset);
        for i in 0..nv {
            let (a, b) = (vertices[i], vertices[(i + 1) % nv]);
            let d = b - a;
            let len = d.norm();
            edge_lengths.push(len);
            normals.push(Point::new(d.y, -d.x) / len);
            node_pts.extend(node_t.iter().map(|t| a + d * *t));
        }
        let weight = |dof: usize| node_w[dof % (q + 1)] * edge_lengths[dof / (q + 1)];
        let normal = |dof: usize| normals[dof / (q + 1)];

        let gram = dec.gram(&space);
        let mass_q = space.mass(q as i64, q as i64);
        let ng_all = dec.g_dim();
        // raw moments (τ, u_i) = factor · moment DOFs; the DOF test fields are orthonormal
        let n_mom = n_grad + n_perp;
        let mut factor = DMatrix::zeros(n_mom, n_mom);
        for (start, len, src) in [(0, n_grad, 0), (n_grad, n_perp, ng_all)] {
            if len == 0 {
                continue;
            }
            let block = gram.view((src, src), (len, len)).into_owned();
            let l = block.cholesky().ok_or_else(|| VemError::SingularLocal {
                element: element_id,
                what: "moment Gram".into(),
            })?;
            factor.view_mut((start, start), (len, len)).copy_from(&(l.l() * area.sqrt()));
        }
        let factor_inv = factor.clone().try_inverse().ok_or_else(|| VemError::SingularLocal {
            element: element_id,
            what: "moment Gram".into(),
        })?;

        // (div τ, m_γ) for |γ| ≤ q
        let mut div_mom = DMatrix::zeros(nq, n);
        for g in 1..nq {
            for j in 0..n_grad {
                div_mom[(g, grad_offset + j)] -= factor[(g - 1, j)] / h;
            }
        }
        for dof in 0..grad_offset {
            let m = space.frame.eval_basis(q, &node_pts[dof]);
            for g in 0..nq {
                div_mom[(g, dof)] += weight(dof) * m[g];
            }
        }
        let mass_chol = mass_q.clone().cholesky().ok_or_else(|| VemError::SingularLocal {
            element: element_id,
            what: "scalar mass matrix".into(),
        })?;
        let div = mass_chol.solve(&div_mom);

        // (τ, u_i) for the union basis
        let mut mom = DMatrix::zeros(nu, n);
        for i in 0..n_grad {
            for j in 0..n_grad {
                mom[(i, grad_offset + j)] = factor[(i, j)];
            }
        }
        if ng_all > n_grad {
            let nq1 = dim(q as i64 + 1);
            let cross = space.mass(q as i64, q as i64 + 1);
            for a in nq..nq1 {
                let i = a - 1;
                // h[-(div τ, m_α) + (τ·n, m_α)_∂K]
                for dof in 0..n {
                    let mut v = 0.0;
                    for g in 0..nq {
                        v -= div[(g, dof)] * cross[(g, a)];
                    }
                    mom[(i, dof)] = h * v;
                }
                for dof in 0..grad_offset {
                    let m = space.frame.eval_basis(q + 1, &node_pts[dof]);
                    mom[(i, dof)] += h * weight(dof) * m[a];
                }
            }
        }
        for i in 0..n_perp {
            for j in 0..n_perp {
                mom[(ng_all + i, perp_offset + j)] = factor[(n_grad + i, n_grad + j)];
            }
        }
        let gram_chol = gram.clone().cholesky().ok_or_else(|| VemError::SingularLocal {
            element: element_id,
            what: "vector mass Gram".into(),
        })?;
        let pi0 = gram_chol.solve(&mom);

        let mut dof_of_basis = DMatrix::zeros(n, nu);
        for (c, u) in basis.iter().enumerate() {
            for dof in 0..grad_offset {
                let pt = &node_pts[dof];
                let nn = normal(dof);
                dof_of_basis[(dof, c)] = nn.x * space.frame.eval(&u.x, pt) + nn.y * space.frame.eval(&u.y, pt);
            }
            let raw = DVector::from_iterator(
                n_mom,
                (0..n_grad)
                    .map(|i| u.inner(&basis[i], &space))
                    .chain((0..n_perp).map(|j| u.inner(&basis[ng_all + j], &space))),
            );
            let m = &factor_inv * raw;
            for i in 0..n_mom {
                dof_of_basis[(grad_offset + i, c)] = m[i];
            }
        }

        let mut stab_form = h * h * div.transpose() * &mass_q * &div;
        for dof in 0..grad_offset {
            stab_form[(dof, dof)] += h * weight(dof);
        }
        let nonpolynomial = DMatrix::identity(n, n) - &dof_of_basis * &pi0;
        let consistency = pi0.transpose() * &gram * &pi0;
        let mut mass = &consistency + nonpolynomial.transpose() * &stab_form * &nonpolynomial;
        mass = (&mass + mass.transpose()) * 0.5;

        Ok(Self {
            element_id,
            degree: q,
            vertices: vertices.to_vec(),
            space,
            n_dofs: n,
            n_edges: nv,
            grad_offset,
            perp_offset,
            node_t,
            node_w,
            edge_lengths,
            normals,
            basis,
            gram,
            moment_factor_inv: factor_inv,
            mass_q,
            div,
            pi0,
            dof_of_basis,
            stab_form,
            nonpolynomial,
            consistency,
            mass,
        })
    }

    pub fn nodes_per_edge(&self) -> usize {
        self.degree + 1
    }

    /// DOF range of the normal trace on local edge `i`.
    pub fn edge_dofs(&self, i: usize) -> std::ops::Range<usize> {
        let m = self.nodes_per_edge();
        i * m..(i + 1) * m
    }

    /// Moments `(div τ, m_γ)`, `|γ| ≤ q` (the `b` form up to sign).
    pub fn div_moments(&self) -> DMatrix<f64> {
        &self.mass_q * &self.div
    }

    /// DOFs of a smooth vector field; moments by polygon quadrature.
    pub fn interpolate(&self, field: impl Fn(&Point) -> [f64; 2]) -> Vec<f64> {
        let q = self.degree;
        let nv = self.n_edges;
        let mut out = Vec::with_capacity(self.n_dofs);
        for i in 0..nv {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % nv]);
            let nn = self.normals[i];
            for t in &self.node_t {
                let v = field(&(a + (b - a) * *t));
                out.push(v[0] * nn.x + v[1] * nn.y);
            }
        }
        let n_grad = self.perp_offset - self.grad_offset;
        let n_perp = self.n_dofs - self.perp_offset;
        let ng_all = self.basis.len() - n_perp;
        let mut mom = vec![0.0; n_grad + n_perp];
        let rule = polygon_quadrature(&self.vertices, 2 * q + 8);
        let frame = &self.space.frame;
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            let v = field(x);
            for (i, m) in mom.iter_mut().enumerate() {
                let u = if i < n_grad {
                    &self.basis[i]
                } else {
                    &self.basis[ng_all + i - n_grad]
                };
                *m += w * (v[0] * frame.eval(&u.x, x) + v[1] * frame.eval(&u.y, x));
            }
        }
        out.extend((&self.moment_factor_inv * DVector::from_vec(mom)).iter());
        out
    }

    pub fn dofs_of(&self, v: &VectorPoly) -> Vec<f64> {
        let c = self.basis_coefficients(v);
        (&self.dof_of_basis * c).as_slice().to_vec()
    }

    /// Union-basis coefficients of a polynomial field (L² fit, exact on `[P_q]²`).
    fn basis_coefficients(&self, v: &VectorPoly) -> DVector<f64> {
        let rhs = DVector::from_iterator(self.basis.len(), self.basis.iter().map(|u| u.inner(v, &self.space)));
        self.gram.clone().cholesky().expect("vector Gram is SPD").solve(&rhs)
    }

    /// `Π⁰_q τ` as a vector polynomial.
    pub fn project(&self, dofs: &[f64]) -> VectorPoly {
        let c = &self.pi0 * DVector::from_column_slice(dofs);
        let mut out = VectorPoly::zero(self.degree);
        for (ci, u) in c.iter().zip(&self.basis) {
            out.axpy(*ci, u);
        }
        out
    }

    pub fn divergence(&self, dofs: &[f64]) -> Vec<f64> {
        (&self.div * DVector::from_column_slice(dofs)).as_slice().to_vec()
    }

    /// `a^K(τ, τ)` through the stabilized mass matrix.
    pub fn energy(&self, dofs: &[f64]) -> f64 {
        let v = DVector::from_column_slice(dofs);
        let c = &self.pi0 * &v;
        let w = &self.nonpolynomial * &v;
        let cons = (c.transpose() * &self.gram * &c)[(0, 0)];
        let stab = (w.transpose() * &self.stab_form * &w)[(0, 0)];
        cons.max(0.0) + stab.max(0.0)
    }

    /// Map from DOFs to the normal trace of local edge `i` at points `t` of
    /// [0, 1] measured in loop direction.
    pub fn trace_matrix(&self, i: usize, t: &[f64]) -> DMatrix<f64> {
        let l = lagrange_matrix(&self.node_t, t);
        let mut out = DMatrix::zeros(t.len(), self.n_dofs);
        out.view_mut((0, i * self.nodes_per_edge()), (t.len(), self.nodes_per_edge()))
            .copy_from(&l);
        out
    }
}

/// Multipliers on internal edges: values at the Gauss nodes of each edge.
#[derive(Debug, Clone)]
pub struct EdgeMultiplierSpace {
    /// Degree per mesh edge (`None` on the boundary or outside the selection).
    pub degrees: Vec<Option<usize>>,
    pub offsets: Vec<usize>,
    pub n_dofs: usize,
}

impl EdgeMultiplierSpace {
    /// Internal edges carry degree `max(q_left, q_right)`.
    pub fn new(mesh: &PolygonalMesh, cell_degrees: &[usize]) -> Self {
        let degrees: Vec<Option<usize>> = mesh
            .edges
            .iter()
            .map(|e| e.right.map(|r| cell_degrees[e.left].max(cell_degrees[r])))
            .collect();
        Self::from_degrees(degrees)
    }

    pub fn from_degrees(degrees: Vec<Option<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(degrees.len());
        let mut n = 0;
        for d in &degrees {
            offsets.push(n);
            n += d.map_or(0, |q| q + 1);
        }
        Self {
            degrees,
            offsets,
            n_dofs: n,
        }
    }
}

/// Rows of `c(τ, μ)` for one side of an internal edge: entry `(j, dof)` is
/// `w_j |e| (n_K·τ)(t_j)` with `t_j` the multiplier nodes in the edge's canonical
/// orientation.
pub fn jump_rows(el: &FluxElement, local_edge: usize, forward: bool, q_edge: usize) -> DMatrix<f64> {
    let (t, w) = edge_nodes(q_edge);
    let t_loop: Vec<f64> = if forward { t.clone() } else { t.iter().map(|s| 1.0 - s).collect() };
    let mut rows = el.trace_matrix(local_edge, &t_loop);
    let len = el.edge_lengths[local_edge];
    for (j, wj) in w.iter().enumerate() {
        rows.row_mut(j).scale_mut(wj * len);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::index;

    fn unit_square() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]
    }

    #[test]
    fn divergence_examples() {
        let el = FluxElement::new(0, &unit_square(), 2).unwrap();
        let d = el.divergence(&el.interpolate(|_| [1.0, 0.0]));
        assert!(d.iter().all(|v| v.abs() < 1e-13));
        let d = el.divergence(&el.interpolate(|x| [x.x, x.y]));
        assert!((d[0] - 2.0).abs() < 1e-13 && d[1..].iter().all(|v| v.abs() < 1e-13));
        let d = el.divergence(&el.interpolate(|x| [x.x * x.x, x.x * x.y]));
        let pt = Point::new(0.3, 0.7);
        assert!((el.space.frame.eval(&d, &pt) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn reproduces_vector_polynomials() {
        let el = FluxElement::new(0, &unit_square(), 2).unwrap();
        let field = |x: &Point| [x.x * x.x, 0.0];
        let pi = el.project(&el.interpolate(field));
        let pt = Point::new(0.2, 0.6);
        assert!((el.space.frame.eval(&pi.x, &pt) - 0.04).abs() < 1e-12);
        assert!(el.space.frame.eval(&pi.y, &pt).abs() < 1e-12);
        let zero = el.project(&vec![0.0; el.n_dofs]);
        assert!(zero.x.iter().chain(&zero.y).all(|v| *v == 0.0));
    }

    #[test]
    fn curl_of_bubble_has_zero_mean() {
        // ψ = x²(1-x)²y²(1-y)², τ = (ψ_y, -ψ_x)
        let el = FluxElement::new(0, &unit_square(), 0).unwrap();
        let field = |x: &Point| {
            let (a, b) = (x.x * x.x * (1.0 - x.x).powi(2), x.y * x.y * (1.0 - x.y).powi(2));
            let da = 2.0 * x.x * (1.0 - x.x) * (1.0 - 2.0 * x.x);
            let db = 2.0 * x.y * (1.0 - x.y) * (1.0 - 2.0 * x.y);
            [a * db, -da * b]
        };
        let pi = el.project(&el.interpolate(field));
        assert!(pi.x.iter().chain(&pi.y).all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn mass_matrix_properties() {
        let sq = unit_square();
        let big: Vec<Point> = sq.iter().map(|p| p * 2.0).collect();
        for q in 0..=3 {
            let el = FluxElement::new(0, &sq, q).unwrap();
            assert!((&el.mass - el.mass.transpose()).amax() < 1e-13);
            assert!(el.mass.clone().symmetric_eigen().eigenvalues.min() > 0.0);
            // consistency on polynomial fields
            let v = el.interpolate(|x| [x.x * x.y, 1.0 - x.y]);
            if q >= 2 {
                let exact = polygon_quadrature(&sq, 8).integrate(|x| (x.x * x.y).powi(2) + (1.0 - x.y).powi(2));
                let vv = DVector::from_vec(v.clone());
                assert!(((vv.transpose() * &el.mass * &vv)[(0, 0)] - exact).abs() < 1e-12);
            }
            // dilation by 2 scales the matrix by 4 for a fixed DOF vector
            let el2 = FluxElement::new(0, &big, q).unwrap();
            assert!((&el2.mass - &el.mass * 4.0).amax() < 1e-12 * el2.mass.amax());
        }
    }

    #[test]
    fn jump_of_linear_trace() {
        // c(τ, 1) with ⟦τ⟧ = x on (0,0)-(1,0) is 1/2
        let el = FluxElement::new(0, &unit_square(), 1).unwrap();
        let mut dofs = vec![0.0; el.n_dofs];
        // edge 0 runs (0,0)→(1,0), outward normal (0,-1): n·τ = x for τ = (0, -x)
        let v = el.interpolate(|x| [0.0, -x.x]);
        dofs[el.edge_dofs(0)].copy_from_slice(&v[el.edge_dofs(0)]);
        let rows = jump_rows(&el, 0, true, 1);
        let c: f64 = (rows * DVector::from_vec(dofs)).sum();
        assert!((c - 0.5).abs() < 1e-14);
    }

    #[test]
    fn opposite_traces_cancel() {
        let mesh = PolygonalMesh::square(2);
        let e = mesh.internal_edges().next().unwrap();
        let edge = &mesh.edges[e];
        let r = edge.right.unwrap();
        let field = |x: &Point| [1.0 + x.y, x.x * x.x];
        let mut total = DVector::zeros(3);
        for k in [edge.left, r] {
            let el = FluxElement::new(k, &mesh.cell_points(k), 2).unwrap();
            let i = mesh.cell_edges[k].iter().position(|ce| ce.edge == e).unwrap();
            let fw = mesh.cell_edges[k][i].forward;
            total += jump_rows(&el, i, fw, 2) * DVector::from_vec(el.interpolate(field));
        }
        assert!(total.amax() < 1e-14);
        assert_eq!(index(0, 1), 2);
    }

    #[test]
    fn lower_degree_side_is_interpolated() {
        let el = FluxElement::new(0, &unit_square(), 1).unwrap();
        let v = el.interpolate(|x| [0.0, -(1.0 + 2.0 * x.x)]);
        let (t, w) = edge_nodes(3);
        let rows = jump_rows(&el, 0, false, 3);
        let vals = rows * DVector::from_vec(v);
        for j in 0..4 {
            // canonical orientation reversed: x = 1 - t
            let exact = 1.0 + 2.0 * (1.0 - t[j]);
            assert!((vals[j] - w[j] * exact).abs() < 1e-14);
        }
    }
}
