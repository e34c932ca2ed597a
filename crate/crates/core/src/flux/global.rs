use super::{moments, ResidualData};
use crate::error::{Result, VemError};
use crate::mesh::PolygonalMesh;
use crate::mixed::{edge_nodes, jump_rows, EdgeMultiplierSpace, FluxElement};
use crate::polybasis::dim;
use crate::sparse::TripletMatrix;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Solution of the global hybridized problem at flux degree `p_K - 1`.
#[derive(Debug, Clone)]
pub struct GlobalFlux {
    pub degrees: Vec<usize>,
    pub elements: Vec<FluxElement>,
    pub sigma: Vec<Vec<f64>>,
    /// Scalar multiplier coefficients per cell, in the cell frame.
    pub scalar: Vec<Vec<f64>>,
    pub multipliers: Vec<f64>,
    pub space: EdgeMultiplierSpace,
    /// Multiplier system after eliminating flux and scalar unknowns.
    pub condensed: TripletMatrix,
    pub relative_residual: f64,
}

struct Condensed {
    rows: Vec<usize>,
    c: DMatrix<f64>,
    x_sigma: DMatrix<f64>,
    y_sigma: DVector<f64>,
    x_scalar: DMatrix<f64>,
    y_scalar: DVector<f64>,
}

/// Jump rows of cell `k` against all multipliers on its internal edges.
pub(crate) fn cell_jump_rows(
    mesh: &PolygonalMesh,
    k: usize,
    el: &FluxElement,
    space: &EdgeMultiplierSpace,
    include: impl Fn(usize) -> bool,
) -> (Vec<usize>, DMatrix<f64>) {
    let mut rows = Vec::new();
    let mut blocks = Vec::new();
    for (i, ce) in mesh.cell_edges[k].iter().enumerate() {
        let Some(qe) = space.degrees[ce.edge] else { continue };
        if !include(ce.edge) {
            continue;
        }
        rows.extend((0..=qe).map(|j| space.offsets[ce.edge] + j));
        blocks.push(jump_rows(el, i, ce.forward, qe));
    }
    let mut c = DMatrix::zeros(rows.len(), el.n_dofs);
    let mut r = 0;
    for b in blocks {
        c.view_mut((r, 0), (b.nrows(), b.ncols())).copy_from(&b);
        r += b.nrows();
    }
    (rows, c)
}

/// `w_j |e| r^e(t_j)` on every multiplier node.
pub(crate) fn edge_rhs(mesh: &PolygonalMesh, space: &EdgeMultiplierSpace, values: impl Fn(usize, usize) -> Option<Vec<f64>>) -> Vec<f64> {
    let mut rc = vec![0.0; space.n_dofs];
    for (e, q) in space.degrees.iter().enumerate() {
        let Some(q) = *q else { continue };
        let Some(vals) = values(e, q) else { continue };
        let (_, w) = edge_nodes(q);
        let len = mesh.edge_length(e);
        for j in 0..=q {
            rc[space.offsets[e] + j] = w[j] * len * vals[j];
        }
    }
    rc
}

pub fn global_reconstruct(mesh: &PolygonalMesh, primal_degrees: &[usize], res: &ResidualData) -> Result<GlobalFlux> {
    let degrees: Vec<usize> = primal_degrees.iter().map(|&p| p - 1).collect();
    let elements: Vec<FluxElement> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|k| FluxElement::new(k, &mesh.cell_points(k), degrees[k]))
        .collect::<Result<_>>()?;
    let space = EdgeMultiplierSpace::new(mesh, &degrees);

    let locals: Vec<Condensed> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|k| {
            let el = &elements[k];
            let (n, nq) = (el.n_dofs, dim(el.degree as i64));
            let b = el.div_moments();
            let mut kkt = DMatrix::zeros(n + nq, n + nq);
            kkt.view_mut((0, 0), (n, n)).copy_from(&el.mass);
            kkt.view_mut((n, 0), (nq, n)).copy_from(&b);
            kkt.view_mut((0, n), (n, nq)).copy_from(&b.transpose());
            let (rows, c) = cell_jump_rows(mesh, k, el, &space, |_| true);
            let m = rows.len();
            let mut rhs = DMatrix::zeros(n + nq, m + 1);
            rhs.view_mut((0, 0), (n, m)).copy_from(&c.transpose());
            let rb = moments(&el.space, &res.bulk[k], el.degree);
            for g in 0..nq {
                rhs[(n + g, m)] = rb[g];
            }
            let sol = kkt.lu().solve(&rhs).ok_or(VemError::SingularLocal {
                element: k,
                what: "mixed element saddle block".into(),
            })?;
            Ok(Condensed {
                rows,
                c,
                x_sigma: sol.view((0, 0), (n, m)).into_owned(),
                y_sigma: sol.view((0, m), (n, 1)).column(0).into_owned(),
                x_scalar: -sol.view((n, 0), (nq, m)).into_owned(),
                y_scalar: -sol.view((n, m), (nq, 1)).column(0).into_owned(),
            })
        })
        .collect::<Result<_>>()?;

    let mut rhs = edge_rhs(mesh, &space, |e, q| res.edge[e].as_ref().map(|r| r.at_degree(q)));
    let mut condensed = TripletMatrix::new(space.n_dofs);
    for loc in &locals {
        let s = &loc.c * &loc.x_sigma;
        let cy = &loc.c * &loc.y_sigma;
        for (i, &gi) in loc.rows.iter().enumerate() {
            rhs[gi] -= cy[i];
            for (j, &gj) in loc.rows.iter().enumerate() {
                condensed.push(gi, gj, s[(i, j)]);
            }
        }
    }
    let multipliers = condensed.solve(&rhs, 1e-10)?;
    let relative_residual = condensed.relative_residual(&multipliers, &rhs);

    let (sigma, scalar): (Vec<Vec<f64>>, Vec<Vec<f64>>) = locals
        .iter()
        .map(|loc| {
            let lam = DVector::from_iterator(loc.rows.len(), loc.rows.iter().map(|&g| multipliers[g]));
            let s = &loc.x_sigma * &lam + &loc.y_sigma;
            let u = &loc.x_scalar * &lam + &loc.y_scalar;
            (s.as_slice().to_vec(), u.as_slice().to_vec())
        })
        .unzip();
    Ok(GlobalFlux {
        degrees,
        elements,
        sigma,
        scalar,
        multipliers,
        space,
        condensed,
        relative_residual,
    })
}

impl GlobalFlux {
    /// `‖σ‖²_{a,K}` per cell.
    pub fn energies(&self) -> Vec<f64> {
        self.elements.iter().zip(&self.sigma).map(|(el, s)| el.energy(s)).collect()
    }

    /// Largest `|(div σ - r^K, m_γ)|` over cells and `|γ| ≤ q_K`, and the largest
    /// Gauss-node mismatch `|⟦σ⟧ - r^e|` over internal edges.
    pub fn equilibration_defect(&self, mesh: &PolygonalMesh, res: &ResidualData) -> (f64, f64) {
        let bulk = self
            .elements
            .iter()
            .enumerate()
            .map(|(k, el)| {
                let d = el.div_moments() * DVector::from_column_slice(&self.sigma[k]);
                let r = moments(&el.space, &res.bulk[k], el.degree);
                d.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let jumps = jump_values(mesh, &self.elements, &self.sigma, &self.space);
        let mut edge: f64 = 0.0;
        for (e, jv) in jumps.iter().enumerate() {
            if let (Some(jv), Some(q)) = (jv, self.space.degrees[e]) {
                let r = res.edge[e].as_ref().map_or(vec![0.0; q + 1], |r| r.at_degree(q));
                for (a, b) in jv.iter().zip(&r) {
                    edge = edge.max((a - b).abs());
                }
            }
        }
        (bulk, edge)
    }
}

/// `⟦σ⟧` at the multiplier nodes of every internal edge (canonical orientation).
pub fn jump_values(
    mesh: &PolygonalMesh,
    elements: &[FluxElement],
    sigma: &[Vec<f64>],
    space: &EdgeMultiplierSpace,
) -> Vec<Option<Vec<f64>>> {
    let mut out: Vec<Option<Vec<f64>>> = space.degrees.iter().map(|d| d.map(|q| vec![0.0; q + 1])).collect();
    for (k, el) in elements.iter().enumerate() {
        let s = DVector::from_column_slice(&sigma[k]);
        for (i, ce) in mesh.cell_edges[k].iter().enumerate() {
            let Some(q) = space.degrees[ce.edge] else { continue };
            let (t, _) = edge_nodes(q);
            let t_loop: Vec<f64> = if ce.forward { t } else { t.iter().map(|x| 1.0 - x).collect() };
            let vals = el.trace_matrix(i, &t_loop) * &s;
            let slot = out[ce.edge].as_mut().unwrap();
            for j in 0..=q {
                slot[j] += vals[j];
            }
        }
    }
    out
}
