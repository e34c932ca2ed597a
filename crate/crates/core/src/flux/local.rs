use super::{moments, LocalizedResiduals};
use crate::error::{Result, VemError};
use crate::mesh::{PolygonalMesh, VertexPatch};
use crate::mixed::{edge_nodes, jump_rows, FluxElement};
use crate::polybasis::dim;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Flux of one vertex-patch problem, in the full DOF layout of each patch cell.
#[derive(Debug, Clone)]
pub struct LocalFlux {
    pub vertex: usize,
    pub cells: Vec<usize>,
    pub sigma: Vec<Vec<f64>>,
    /// Constant offset of the divergence constraint (interior vertices).
    pub kappa: f64,
    pub n_constrained: usize,
    pub relative_residual: f64,
}

/// All patch fluxes at degree `p_K` and their sum `σ^Δ`.
#[derive(Debug, Clone)]
pub struct LocalizedFlux {
    pub degrees: Vec<usize>,
    pub elements: Vec<FluxElement>,
    pub patches: Vec<LocalFlux>,
    pub sigma: Vec<Vec<f64>>,
}

pub fn local_reconstruct(
    mesh: &PolygonalMesh,
    patch: &VertexPatch,
    elements: &[FluxElement],
    loc: &LocalizedResiduals,
) -> Result<LocalFlux> {
    let nu = patch.vertex;
    let interior = !patch.is_boundary_vertex;
    let constrained = |e: usize| patch.rim_edges.binary_search(&e).is_ok() && (interior || !mesh.edges[e].contains(nu));

    // multipliers on the patch interior edges
    let mut mult: Vec<(usize, usize, usize)> = Vec::with_capacity(patch.interior_edges.len());
    let mut n_mult = 0;
    for &e in &patch.interior_edges {
        let edge = &mesh.edges[e];
        let q = elements[edge.left].degree.max(elements[edge.right.unwrap()].degree);
        mult.push((e, n_mult, q));
        n_mult += q + 1;
    }
    let mult_of = |e: usize| mult.iter().find(|m| m.0 == e).copied();

    struct Block {
        free: Vec<usize>,
        offset: usize,
        nq: usize,
    }
    let mut blocks = Vec::with_capacity(patch.cells.len());
    let mut off = 0;
    let mut n_constrained = 0;
    for &k in &patch.cells {
        let el = &elements[k];
        let mut fixed = vec![false; el.n_dofs];
        for (i, ce) in mesh.cell_edges[k].iter().enumerate() {
            if constrained(ce.edge) {
                for d in el.edge_dofs(i) {
                    fixed[d] = true;
                }
                n_constrained += el.nodes_per_edge();
            }
        }
        let free: Vec<usize> = (0..el.n_dofs).filter(|&d| !fixed[d]).collect();
        let nq = dim(el.degree as i64);
        blocks.push(Block { free, offset: off, nq });
        off += blocks.last().unwrap().free.len() + nq;
    }
    let mult_off = off;
    let kappa_row = mult_off + n_mult;
    let n = kappa_row + usize::from(interior);

    let mut a = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (bi, &k) in patch.cells.iter().enumerate() {
        let el = &elements[k];
        let blk = &blocks[bi];
        let nf = blk.free.len();
        let (s0, w0) = (blk.offset, blk.offset + nf);
        let b = el.div_moments();
        for (i, &di) in blk.free.iter().enumerate() {
            for (j, &dj) in blk.free.iter().enumerate() {
                a[(s0 + i, s0 + j)] = el.mass[(di, dj)];
            }
            for g in 0..blk.nq {
                a[(w0 + g, s0 + i)] = b[(g, di)];
                a[(s0 + i, w0 + g)] = b[(g, di)];
            }
        }
        let pos = mesh.cells[k]
            .iter()
            .position(|&v| v == nu)
            .ok_or(VemError::SingularPatch { vertex: nu })?;
        let rb = moments(&el.space, &loc.bulk[k][pos], el.degree);
        for g in 0..blk.nq {
            rhs[w0 + g] = rb[g];
        }
        if interior {
            let means = el.space.means(el.degree as i64);
            for g in 0..blk.nq {
                a[(w0 + g, kappa_row)] = -means[g];
                a[(kappa_row, w0 + g)] = -means[g];
            }
        }
        for (i, ce) in mesh.cell_edges[k].iter().enumerate() {
            let Some((_, moff, q)) = mult_of(ce.edge) else { continue };
            let rows = jump_rows(el, i, ce.forward, q);
            for r in 0..=q {
                for (j, &dj) in blk.free.iter().enumerate() {
                    let v = rows[(r, dj)];
                    a[(mult_off + moff + r, s0 + j)] = v;
                    a[(s0 + j, mult_off + moff + r)] = v;
                }
            }
        }
    }
    for &(e, moff, q) in &mult {
        let edge = &mesh.edges[e];
        if !edge.contains(nu) {
            continue;
        }
        let Some(parts) = &loc.edge[e] else { continue };
        let part = if edge.v[0] == nu { &parts[0] } else { &parts[1] };
        let vals = part.at_degree(q);
        let (_, w) = edge_nodes(q);
        let len = mesh.edge_length(e);
        for j in 0..=q {
            rhs[mult_off + moff + j] = w[j] * len * vals[j];
        }
    }

    let x = if rhs.iter().all(|v| *v == 0.0) {
        DVector::zeros(n)
    } else {
        solve_scaled(&a, &rhs).ok_or(VemError::SingularPatch { vertex: nu })?
    };
    let den = rhs.norm();
    let relative_residual = if den > 0.0 { (&a * &x - &rhs).norm() / den } else { 0.0 };
    if !(relative_residual <= 1e-10) {
        return Err(VemError::SingularPatch { vertex: nu });
    }
    let sigma = patch
        .cells
        .iter()
        .zip(&blocks)
        .map(|(&k, blk)| {
            let mut s = vec![0.0; elements[k].n_dofs];
            for (i, &d) in blk.free.iter().enumerate() {
                s[d] = x[blk.offset + i];
            }
            s
        })
        .collect();
    Ok(LocalFlux {
        vertex: nu,
        cells: patch.cells.clone(),
        sigma,
        kappa: if interior { x[kappa_row] } else { 0.0 },
        n_constrained,
        relative_residual,
    })
}

/// Symmetrically scaled LU with one step of iterative refinement.
pub(crate) fn solve_scaled(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    let d = DVector::from_iterator(
        n,
        (0..n).map(|i| {
            let m = a.row(i).amax();
            if m > 0.0 {
                1.0 / m.sqrt()
            } else {
                1.0
            }
        }),
    );
    let mut s = a.clone();
    for j in 0..n {
        for i in 0..n {
            s[(i, j)] *= d[i] * d[j];
        }
    }
    let lu = s.lu();
    let mut y = lu.solve(&b.component_mul(&d))?;
    let r = b - a * y.component_mul(&d);
    y += lu.solve(&r.component_mul(&d))?;
    Some(y.component_mul(&d))
}

pub fn sum_local_fluxes(elements: &[FluxElement], patches: &[LocalFlux]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = elements.iter().map(|el| vec![0.0; el.n_dofs]).collect();
    for lf in patches {
        for (&k, s) in lf.cells.iter().zip(&lf.sigma) {
            for (o, v) in out[k].iter_mut().zip(s) {
                *o += v;
            }
        }
    }
    out
}

pub fn reconstruct_all_local(mesh: &PolygonalMesh, primal_degrees: &[usize], loc: &LocalizedResiduals) -> Result<LocalizedFlux> {
    let degrees = primal_degrees.to_vec();
    let elements: Vec<FluxElement> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|k| FluxElement::new(k, &mesh.cell_points(k), degrees[k]))
        .collect::<Result<_>>()?;
    let patches: Vec<LocalFlux> = mesh
        .vertex_patches()
        .par_iter()
        .filter(|p| !p.cells.is_empty())
        .map(|p| local_reconstruct(mesh, p, &elements, loc))
        .collect::<Result<_>>()?;
    let sigma = sum_local_fluxes(&elements, &patches);
    Ok(LocalizedFlux {
        degrees,
        elements,
        patches,
        sigma,
    })
}

impl LocalizedFlux {
    pub fn energies(&self) -> Vec<f64> {
        self.elements.iter().zip(&self.sigma).map(|(el, s)| el.energy(s)).collect()
    }

    /// Largest `|(div σ^Δ - r^K - Σ_ν κ_ν, m_γ)|` per cell.
    pub fn equilibration_defect(&self, mesh: &PolygonalMesh, res: &super::ResidualData) -> f64 {
        let mut kappa = vec![0.0; mesh.n_cells()];
        for lf in &self.patches {
            for &k in &lf.cells {
                kappa[k] += lf.kappa;
            }
        }
        self.elements
            .iter()
            .enumerate()
            .map(|(k, el)| {
                let d = el.div_moments() * DVector::from_column_slice(&self.sigma[k]);
                let r = moments(&el.space, &res.bulk[k], el.degree);
                let means = el.space.means(el.degree as i64);
                (0..d.len()).map(|g| (d[g] - r[g] - kappa[k] * means[g]).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Largest jump mismatch of `σ^Δ` against `r^e` at the Gauss nodes of degree `p_e`.
    pub fn jump_defect(&self, mesh: &PolygonalMesh, res: &super::ResidualData) -> f64 {
        let space = crate::mixed::EdgeMultiplierSpace::new(mesh, &self.degrees);
        let jumps = super::global::jump_values(mesh, &self.elements, &self.sigma, &space);
        let mut worst: f64 = 0.0;
        for (e, jv) in jumps.iter().enumerate() {
            if let (Some(jv), Some(q)) = (jv, space.degrees[e]) {
                let r = res.edge[e].as_ref().map_or(vec![0.0; q + 1], |r| r.at_degree(q));
                for (a, b) in jv.iter().zip(&r) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }
}
