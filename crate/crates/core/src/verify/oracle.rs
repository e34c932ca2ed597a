//! Fine-grid reconstruction of mixed virtual functions.
//!
//! A DOF vector of `Σ_q(K)` determines `div τ ∈ P_q`, the normal traces and
//! `rot τ ∈ P_{q-1}`. Writing `τ = ∇φ + curl ψ`, `φ` solves a Neumann problem
//! and `ψ` a homogeneous Dirichlet problem; both are approximated with
//! piecewise linears on a uniformly refined fan triangulation.
//!
//! Primal virtual functions are lifted the same way: a discrete harmonic
//! extension of the trace plus Dirichlet solutions `-Δψ_β = m_β` fitted to the
//! interior moments.

use crate::error::{Result, VemError};
use crate::mesh::Point;
use crate::mixed::{lagrange_matrix, FluxElement};
use crate::polybasis::dim;
use crate::polybasis::quadrature::{triangle_quadrature, unit_interval, EdgeFamily};
use crate::primal::PrimalElement;
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;
use nalgebra::DMatrix;
use std::collections::HashMap;

struct FineGrid {
    nodes: Vec<Point>,
    tris: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    /// Boundary segments `(n0, n1, edge, t0, t1)`, `t` along the polygon edge in loop direction.
    segments: Vec<(usize, usize, usize, f64, f64)>,
}

fn fine_grid(poly: &[Point], center: Point, m: usize) -> FineGrid {
    let scale = poly.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut boundary = Vec::new();
    let mut id = |x: Point, on_bnd: bool, nodes: &mut Vec<Point>, boundary: &mut Vec<bool>| -> usize {
        let key = (
            ((x.x - center.x) / scale * 1e9).round() as i64,
            ((x.y - center.y) / scale * 1e9).round() as i64,
        );
        let k = *index.entry(key).or_insert_with(|| {
            nodes.push(x);
            boundary.push(false);
            nodes.len() - 1
        });
        boundary[k] |= on_bnd;
        k
    };
    let nv = poly.len();
    let mut tris = Vec::new();
    let mut segments = Vec::new();
    let mf = m as f64;
    for e in 0..nv {
        let (a, b) = (poly[e], poly[(e + 1) % nv]);
        let mut lattice = vec![vec![0usize; m + 1]; m + 1];
        for i in 0..=m {
            for j in 0..=m - i {
                let x = center + (a - center) * (i as f64 / mf) + (b - center) * (j as f64 / mf);
                lattice[i][j] = id(x, i + j == m, &mut nodes, &mut boundary);
            }
        }
        for i in 0..m {
            for j in 0..m - i {
                tris.push([lattice[i][j], lattice[i + 1][j], lattice[i][j + 1]]);
                if i + j + 2 <= m {
                    tris.push([lattice[i + 1][j], lattice[i + 1][j + 1], lattice[i][j + 1]]);
                }
            }
        }
        for j in 0..m {
            segments.push((lattice[m - j][j], lattice[m - j - 1][j + 1], e, j as f64 / mf, (j + 1) as f64 / mf));
        }
    }
    FineGrid {
        nodes,
        tris,
        boundary,
        segments,
    }
}

/// Gradients of the three hat functions and the area of a triangle.
fn p1_gradients(x: [Point; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (x[1] - x[0]).x * (x[2] - x[0]).y - (x[1] - x[0]).y * (x[2] - x[0]).x;
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (p, q) = (x[(i + 1) % 3], x[(i + 2) % 3]);
        g[i] = [(p.y - q.y) / det, (q.x - p.x) / det];
    }
    (g, det.abs() / 2.0)
}

fn factor(n: usize, trip: &[Triplet<usize, usize, f64>]) -> Result<faer::sparse::linalg::solvers::Llt<usize, f64>> {
    let a = SparseColMat::try_new_from_triplets(n, n, trip).map_err(|e| VemError::Solver(format!("{e:?}")))?;
    a.sp_cholesky(Side::Lower).map_err(|e| VemError::Solver(format!("{e:?}")))
}

/// `(τ_i, τ_j)` for the virtual functions of all DOFs of `el`, computed on a
/// fan triangulation refined into `m²` triangles per polygon edge.
pub fn fine_mass(el: &FluxElement, m: usize) -> Result<DMatrix<f64>> {
    let q = el.degree;
    let n = el.n_dofs;
    let frame = el.space.frame;
    let grid = fine_grid(&el.vertices, frame.center, m);
    let nn = grid.nodes.len();
    let nt = grid.tris.len();
    let geo: Vec<([[f64; 2]; 3], f64)> = grid
        .tris
        .iter()
        .map(|t| p1_gradients([0, 1, 2].map(|i| grid.nodes[t[i]])))
        .collect();

    // stiffness; the Neumann problem pins node 0, the Dirichlet one drops boundary nodes
    let mut neu = Vec::new();
    let mut dir = Vec::new();
    let interior: Vec<Option<usize>> = {
        let mut c = 0;
        grid.boundary.iter().map(|&b| (!b).then(|| (c, c += 1).0)).collect()
    };
    let n_int = interior.iter().flatten().count();
    for (t, (g, area)) in grid.tris.iter().zip(&geo) {
        for a in 0..3 {
            for b in 0..3 {
                let v = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                let (i, j) = (t[a], t[b]);
                if i != 0 && j != 0 {
                    neu.push(Triplet::new(i, j, v));
                }
                if let (Some(ii), Some(jj)) = (interior[i], interior[j]) {
                    dir.push(Triplet::new(ii, jj, v));
                }
            }
        }
    }
    neu.push(Triplet::new(0, 0, 1.0));
    let neu = factor(nn, &neu)?;
    let dir = if n_int > 0 { Some(factor(n_int, &dir)?) } else { None };

    // ∫ m_γ w_i for |γ| ≤ q, and ∫_T u⊥_j per fine triangle
    let nq = dim(q as i64);
    let n_perp = n - el.perp_offset;
    let ng_all = el.basis.len() - n_perp;
    let mut bulk = Mat::<f64>::zeros(nn, nq);
    let mut perp_int = vec![[0.0f64; 2]; nt * n_perp];
    for (ti, t) in grid.tris.iter().enumerate() {
        let x = [0, 1, 2].map(|i| grid.nodes[t[i]]);
        let (g, _) = &geo[ti];
        let rule = triangle_quadrature(&x[0], &x[1], &x[2], q + 1);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let mv = frame.eval_basis(q, p);
            for a in 0..3 {
                let hat = 1.0 + g[a][0] * (p.x - x[a].x) + g[a][1] * (p.y - x[a].y);
                for (gam, mg) in mv.iter().enumerate() {
                    bulk[(t[a], gam)] += w * mg * hat;
                }
            }
            for j in 0..n_perp {
                let u = &el.basis[ng_all + j];
                let s = &mut perp_int[ti * n_perp + j];
                s[0] += w * frame.eval(&u.x, p);
                s[1] += w * frame.eval(&u.y, p);
            }
        }
    }

    // Neumann right-hand sides per DOF: ∫_∂K g w - ∫_K (div τ) w
    let (gt, gw) = unit_interval(q + 2, EdgeFamily::Gauss);
    let mut rhs = Mat::<f64>::zeros(nn, n);
    for &(n0, n1, e, t0, t1) in &grid.segments {
        let len = (grid.nodes[n1] - grid.nodes[n0]).norm();
        let ts: Vec<f64> = gt.iter().map(|s| t0 + (t1 - t0) * s).collect();
        let l = lagrange_matrix(&el.node_t, &ts);
        for (k, s) in gt.iter().enumerate() {
            for (node, hat) in [(n0, 1.0 - s), (n1, *s)] {
                for j in 0..=q {
                    rhs[(node, e * (q + 1) + j)] += gw[k] * len * hat * l[(k, j)];
                }
            }
        }
    }
    for dof in 0..n {
        for gam in 0..nq {
            let d = el.div[(gam, dof)];
            if d != 0.0 {
                for i in 0..nn {
                    rhs[(i, dof)] -= d * bulk[(i, gam)];
                }
            }
        }
        rhs[(0, dof)] = 0.0;
    }
    let phi = neu.solve(&rhs);

    let grad_of = |vals: &dyn Fn(usize) -> f64, ti: usize| -> [f64; 2] {
        let (g, _) = &geo[ti];
        let t = &grid.tris[ti];
        let mut out = [0.0; 2];
        for a in 0..3 {
            let v = vals(t[a]);
            out[0] += v * g[a][0];
            out[1] += v * g[a][1];
        }
        out
    };
    let mut field = vec![[0.0f64; 2]; nt * n];
    for dof in 0..n {
        for ti in 0..nt {
            field[ti * n + dof] = grad_of(&|i| phi[(i, dof)], ti);
        }
    }

    if n_perp > 0 {
        let dir = dir.ok_or_else(|| VemError::Solver("fine grid has no interior nodes".into()))?;
        // ψ_β with -Δψ_β = m_β, β < dim(q-1)
        let nb = dim(q as i64 - 1);
        let mut rd = Mat::<f64>::zeros(n_int, nb);
        for (i, ii) in interior.iter().enumerate() {
            if let Some(ii) = ii {
                for b in 0..nb {
                    rd[(*ii, b)] = bulk[(i, b)];
                }
            }
        }
        let psi = dir.solve(&rd);
        let curls: Vec<[f64; 2]> = (0..nb)
            .flat_map(|b| {
                let psi = &psi;
                let interior = &interior;
                (0..nt).map(move |ti| (b, ti)).collect::<Vec<_>>().into_iter().map(move |(b, ti)| {
                    let g = grad_of(&|i| interior[i].map_or(0.0, |ii| psi[(ii, b)]), ti);
                    [g[1], -g[0]]
                })
            })
            .collect();
        let moment = |f: &dyn Fn(usize) -> [f64; 2], j: usize| -> f64 {
            (0..nt)
                .map(|ti| {
                    let v = f(ti);
                    let s = perp_int[ti * n_perp + j];
                    v[0] * s[0] + v[1] * s[1]
                })
                .sum()
        };
        let mut c = DMatrix::zeros(n_perp, nb);
        for j in 0..n_perp {
            for b in 0..nb {
                c[(j, b)] = moment(&|ti| curls[b * nt + ti], j);
            }
        }
        let c_lu = c.lu();
        let f_inv = el.moment_factor_inv.clone();
        let n_mom = f_inv.nrows();
        let f_full = f_inv.try_inverse().ok_or_else(|| VemError::Solver("moment factor".into()))?;
        let pp = n_mom - n_perp;
        for dof in 0..n {
            let mut target = nalgebra::DVector::zeros(n_perp);
            if dof >= el.perp_offset {
                for j in 0..n_perp {
                    target[j] = f_full[(pp + j, pp + dof - el.perp_offset)];
                }
            }
            for j in 0..n_perp {
                target[j] -= moment(&|ti| field[ti * n + dof], j);
            }
            let r = c_lu.solve(&target).ok_or_else(|| VemError::Solver("rot coefficients".into()))?;
            for ti in 0..nt {
                let f = &mut field[ti * n + dof];
                for b in 0..nb {
                    f[0] += r[b] * curls[b * nt + ti][0];
                    f[1] += r[b] * curls[b * nt + ti][1];
                }
            }
        }
    }

    let mut mass = DMatrix::zeros(n, n);
    for ti in 0..nt {
        let area = geo[ti].1;
        let row = &field[ti * n..(ti + 1) * n];
        for i in 0..n {
            for j in i..n {
                let v = area * (row[i][0] * row[j][0] + row[i][1] * row[j][1]);
                mass[(i, j)] += v;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            mass[(i, j)] = mass[(j, i)];
        }
    }
    Ok(mass)
}

/// `a(v_i, v_j)` for the fine liftings of all DOF basis functions of `el`.
pub fn fine_stiffness(el: &PrimalElement, m: usize) -> Result<DMatrix<f64>> {
    let p = el.degree;
    let n = el.n_dofs;
    let nv = el.vertices.len();
    let frame = el.space.frame;
    let grid = fine_grid(&el.vertices, frame.center, m);
    let nn = grid.nodes.len();
    let geo: Vec<([[f64; 2]; 3], f64)> = grid
        .tris
        .iter()
        .map(|t| p1_gradients([0, 1, 2].map(|i| grid.nodes[t[i]])))
        .collect();
    let interior: Vec<Option<usize>> = {
        let mut c = 0;
        grid.boundary.iter().map(|&b| (!b).then(|| (c, c += 1).0)).collect()
    };
    let n_int = interior.iter().flatten().count();

    // trace values of every DOF basis function at the fine boundary nodes
    let mut values = DMatrix::<f64>::zeros(nn, n);
    for &(n0, _, e, t0, _) in &grid.segments {
        let pe = el.edge_degrees[e];
        let (t, _) = unit_interval(pe + 1, EdgeFamily::GaussLobatto);
        let l = lagrange_matrix(&t, &[t0]);
        for j in 0..=pe {
            let dof = match j {
                0 => e,
                _ if j == pe => (e + 1) % nv,
                _ => el.edge_offsets[e] + j - 1,
            };
            values[(n0, dof)] = l[(0, j)];
        }
    }

    let mut kii = Vec::new();
    let mut kib = Mat::<f64>::zeros(n_int.max(1), n);
    for (t, (g, area)) in grid.tris.iter().zip(&geo) {
        for a in 0..3 {
            let Some(ii) = interior[t[a]] else { continue };
            for b in 0..3 {
                let v = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                match interior[t[b]] {
                    Some(jj) => kii.push(Triplet::new(ii, jj, v)),
                    None => {
                        for dof in 0..el.moment_offset {
                            kib[(ii, dof)] -= v * values[(t[b], dof)];
                        }
                    }
                }
            }
        }
    }
    if n_int == 0 {
        return Err(VemError::Solver("fine grid has no interior nodes".into()));
    }
    let kii = factor(n_int, &kii)?;
    let harmonic = kii.solve(&kib);
    for (i, ii) in interior.iter().enumerate() {
        if let Some(ii) = ii {
            for dof in 0..n {
                values[(i, dof)] = harmonic[(*ii, dof)];
            }
        }
    }

    if p >= 2 {
        let nm = dim(p as i64 - 2);
        // ∫ m_β w_i for the hat functions
        let mut bulk = DMatrix::<f64>::zeros(nn, nm);
        for (t, (g, _)) in grid.tris.iter().zip(&geo) {
            let x = [0, 1, 2].map(|i| grid.nodes[t[i]]);
            let rule = triangle_quadrature(&x[0], &x[1], &x[2], p - 1);
            for (pt, w) in rule.points.iter().zip(&rule.weights) {
                let mv = frame.eval_basis(p - 2, pt);
                for a in 0..3 {
                    let hat = 1.0 + g[a][0] * (pt.x - x[a].x) + g[a][1] * (pt.y - x[a].y);
                    for (b, mb) in mv.iter().enumerate() {
                        bulk[(t[a], b)] += w * mb * hat;
                    }
                }
            }
        }
        let mut rd = Mat::<f64>::zeros(n_int, nm);
        for (i, ii) in interior.iter().enumerate() {
            if let Some(ii) = ii {
                for b in 0..nm {
                    rd[(*ii, b)] = bulk[(i, b)];
                }
            }
        }
        let psi = kii.solve(&rd);
        let mut psi_full = DMatrix::<f64>::zeros(nn, nm);
        for (i, ii) in interior.iter().enumerate() {
            if let Some(ii) = ii {
                for b in 0..nm {
                    psi_full[(i, b)] = psi[(*ii, b)];
                }
            }
        }
        let area = el.space.area;
        let c = bulk.transpose() * &psi_full / area;
        let c_lu = c.lu();
        let mut target = -(bulk.transpose() * &values) / area;
        for a in 0..nm {
            target[(a, el.moment_offset + a)] += 1.0;
        }
        let r = c_lu.solve(&target).ok_or_else(|| VemError::Solver("moment fit".into()))?;
        values += psi_full * r;
    }

    let mut stiff = DMatrix::zeros(n, n);
    for (t, (g, area)) in grid.tris.iter().zip(&geo) {
        for a in 0..3 {
            for b in 0..3 {
                let k = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                if k != 0.0 {
                    let (ra, rb) = (values.row(t[a]).into_owned(), values.row(t[b]).into_owned());
                    stiff += k * ra.transpose() * rb;
                }
            }
        }
    }
    Ok((&stiff + stiff.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::decomposition::VectorPoly;

    #[test]
    fn polynomial_fields_are_recovered() {
        let hex: Vec<Point> = (0..6)
            .map(|i| {
                let a = std::f64::consts::PI / 3.0 * i as f64 + 0.1;
                Point::new(0.3 + a.cos(), -0.2 + a.sin())
            })
            .collect();
        for q in 0..=2 {
            let el = FluxElement::new(0, &hex, q).unwrap();
            let fine = fine_mass(&el, 24).unwrap();
            let mut v = VectorPoly::zero(q);
            v.x[0] = 1.0;
            v.y[dim(q as i64) - 1] = 0.5;
            if q > 0 {
                v.x[1] = -0.7;
            }
            let d = nalgebra::DVector::from_vec(el.dofs_of(&v));
            let exact = v.inner(&v, &el.space);
            let got = (d.transpose() * &fine * &d)[(0, 0)];
            assert!((got - exact).abs() < 2e-2 * exact, "q={q} {got} vs {exact}");
        }
    }

    #[test]
    fn primal_polynomials_are_recovered() {
        use crate::primal::Stabilization;
        let quad = [
            Point::new(0.0, 0.0),
            Point::new(1.2, 0.1),
            Point::new(1.0, 0.9),
            Point::new(-0.1, 1.1),
        ];
        for p in 1..=3 {
            let el = PrimalElement::new(0, &quad, p, &[p; 4], Stabilization::DofiDofi).unwrap();
            let fine = fine_stiffness(&el, 24).unwrap();
            let c: Vec<f64> = (0..dim(p as i64)).map(|i| 0.3 + 0.1 * i as f64).collect();
            let d = nalgebra::DVector::from_vec(el.dofs_of_poly(&c));
            let exact = (d.transpose() * el.consistency.clone() * &d)[(0, 0)];
            let got = (d.transpose() * &fine * &d)[(0, 0)];
            assert!((got - exact).abs() < 2e-2 * exact, "p={p} {got} vs {exact}");
            let ones = nalgebra::DVector::from_vec(el.dofs_of_poly(&{
                let mut one = vec![0.0; dim(p as i64)];
                one[0] = 1.0;
                one
            }));
            assert!((&fine * ones).amax() < 1e-10);
        }
    }
}
