//! Verification suites: measurements plus the pass/fail table used by `verify`.

use crate::adapt::{run_adaptive, solve_and_estimate, AdaptConfig, EstimatorKind, HistoryRow, Mode, StepOptions};
use crate::error::Result;
use crate::flux::{compute_residuals, global_reconstruct, localize_residuals, reconstruct_all_local, PartitionOfUnity};
use crate::mesh::samples::random_polygons;
use crate::mesh::{Point, PolygonalMesh};
use crate::mixed::FluxElement;
use crate::polybasis::decomposition::VectorPoly;
use crate::polybasis::quadrature::polygon_quadrature;
use crate::polybasis::{dim, resize};
use crate::primal::{assemble_and_solve, DegreeMap, PrimalElement, Stabilization};
use crate::problem::Problem;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;

pub mod oracle;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

impl Check {
    pub fn positive(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: "> 0".into(),
            pass: value > 0.0,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("<= {tol:.1e}"),
            pass: value <= tol,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("in [{lo:.4}, {hi:.4}]"),
            pass: (lo..=hi).contains(&value),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn table(&self) -> String {
        let w = self.checks.iter().map(|c| c.name.chars().count()).max().unwrap_or(4).max(5);
        let mut s = format!("suite {}\n", self.suite);
        for c in &self.checks {
            let pad = w - c.name.chars().count();
            let _ = writeln!(
                s,
                "  {}{:pad$}  {:>12.4e}  {:<20}  {}",
                c.name,
                "",
                c.value,
                c.bound,
                if c.pass { "PASS" } else { "FAIL" }
            );
        }
        let _ = writeln!(s, "{}: {}", self.suite, if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

/// Worst relative reproduction defects over random polygons.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProjectorDefects {
    pub pi_nabla: f64,
    pub pi0: f64,
    pub vector_pi0: f64,
    pub divergence: f64,
}

impl ProjectorDefects {
    fn max(self, o: Self) -> Self {
        Self {
            pi_nabla: self.pi_nabla.max(o.pi_nabla),
            pi0: self.pi0.max(o.pi0),
            vector_pi0: self.vector_pi0.max(o.vector_pi0),
            divergence: self.divergence.max(o.divergence),
        }
    }
}

fn projector_defects_on(poly: &[Point], p: usize, rng: &mut ChaCha8Rng) -> Result<ProjectorDefects> {
    let rule = polygon_quadrature(poly, 2 * p + 2);
    let defect = |got: &dyn Fn(&Point) -> [f64; 2], want: &dyn Fn(&Point) -> [f64; 2]| {
        let (mut num, mut den) = (0.0, 0.0);
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            let (g, e) = (got(x), want(x));
            num += w * ((g[0] - e[0]).powi(2) + (g[1] - e[1]).powi(2));
            den += w * (e[0] * e[0] + e[1] * e[1]);
        }
        (num / den.max(1e-300)).sqrt()
    };
    let el = PrimalElement::new(0, poly, p, &vec![p; poly.len()], Stabilization::DofiDofi)?;
    let frame = el.space.frame;
    let c: Vec<f64> = (0..dim(p as i64)).map(|_| rng.random_range(-1.0..1.0)).collect();
    let got = el.project(&el.interpolate(|x| frame.eval(&c, x)));
    let pi_nabla = defect(&|x| [frame.eval(&got, x), 0.0], &|x| [frame.eval(&c, x), 0.0]);
    let pi0 = if p >= 2 {
        let d: Vec<f64> = (0..dim(p as i64 - 2)).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = el.project_l2(&el.interpolate(|x| frame.eval(&d, x)));
        defect(&|x| [frame.eval(&got, x), 0.0], &|x| [frame.eval(&d, x), 0.0])
    } else {
        0.0
    };

    let fe = FluxElement::new(0, poly, p)?;
    let mut v = VectorPoly::zero(p);
    for a in v.x.iter_mut().chain(v.y.iter_mut()) {
        *a = rng.random_range(-1.0..1.0);
    }
    let ff = fe.space.frame;
    let dofs = fe.interpolate(|x| [ff.eval(&v.x, x), ff.eval(&v.y, x)]);
    let pv = fe.project(&dofs);
    let vector_pi0 = defect(&|x| [ff.eval(&pv.x, x), ff.eval(&pv.y, x)], &|x| {
        [ff.eval(&v.x, x), ff.eval(&v.y, x)]
    });
    let div_exact = resize(&v.divergence(fe.space.h()), p as i64);
    let div_got = fe.divergence(&dofs);
    let divergence = defect(&|x| [ff.eval(&div_got, x), 0.0], &|x| [ff.eval(&div_exact, x), 0.0]);
    Ok(ProjectorDefects {
        pi_nabla,
        pi0,
        vector_pi0,
        divergence,
    })
}

/// Primal and vector projector reproduction on `count` random polygons for `p ∈ degrees`.
pub fn projector_defects(seed: u64, count: usize, degrees: std::ops::RangeInclusive<usize>) -> Result<ProjectorDefects> {
    let polys = random_polygons(seed, count);
    let all: Vec<ProjectorDefects> = polys
        .par_iter()
        .enumerate()
        .map(|(i, poly)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let mut worst = ProjectorDefects::default();
            for p in degrees.clone() {
                worst = worst.max(projector_defects_on(poly, p, &mut rng)?);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(all.into_iter().fold(ProjectorDefects::default(), ProjectorDefects::max))
}

/// Square grid with two refined cells, leaving hanging vertices on their neighbours.
pub fn hanging_node_mesh() -> PolygonalMesh {
    PolygonalMesh::square(4).refine(&[5, 10]).expect("refinement of a grid").0
}

/// `|u|_{1,Ω}` by polygon quadrature.
pub fn h1_seminorm(mesh: &PolygonalMesh, grad: &(dyn Fn(&Point) -> [f64; 2] + Sync), degree: usize) -> f64 {
    (0..mesh.n_cells())
        .map(|k| {
            polygon_quadrature(&mesh.cell_points(k), degree).integrate(|x| {
                let g = grad(x);
                g[0] * g[0] + g[1] * g[1]
            })
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchRun {
    pub mesh: &'static str,
    pub p: usize,
    /// Error, η and η_loc divided by `|u|_1`.
    pub error: f64,
    pub eta: f64,
    pub eta_loc: f64,
}

/// Harmonic polynomial of degree `p` reproduced on the square grid and on a hanging-node mesh.
pub fn patch_runs(degrees: std::ops::RangeInclusive<usize>) -> Result<Vec<PatchRun>> {
    let mut out = Vec::new();
    for p in degrees {
        let problem = Problem::builtin(&format!("patch-q{p}"))?;
        for (name, mesh) in [("square(4)", PolygonalMesh::square(4)), ("hanging", hanging_node_mesh())] {
            let scale = h1_seminorm(&mesh, &*problem.grad, 2 * p + 2);
            let step = solve_and_estimate(&mesh, &vec![p; mesh.n_cells()], &problem, &StepOptions::default())?;
            out.push(PatchRun {
                mesh: name,
                p,
                error: step.row.error.unwrap_or(f64::NAN) / scale,
                eta: step.row.eta.unwrap_or(f64::NAN) / scale,
                eta_loc: step.row.eta_loc.unwrap_or(f64::NAN) / scale,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibrationRun {
    pub p: usize,
    pub global_bulk: f64,
    pub global_jump: f64,
    pub partition: f64,
    pub local_bulk: f64,
    pub local_jump: f64,
    /// Patch-flux DOFs that leak onto constrained rim edges or cells outside the patch.
    pub support_violations: usize,
}

/// Equilibration defects of both reconstructions for the benchmark on `mesh`.
pub fn equilibration_run(mesh: &PolygonalMesh, p: usize) -> Result<EquilibrationRun> {
    let problem = Problem::builtin("lshape-r23")?;
    let dm = DegreeMap::uniform(mesh, p);
    let sol = assemble_and_solve(mesh, &dm, &*problem.f, &*problem.u, Stabilization::DofiDofi)?;
    let res = compute_residuals(mesh, &sol);
    let global = global_reconstruct(mesh, &dm.cells, &res)?;
    let (global_bulk, global_jump) = global.equilibration_defect(mesh, &res);
    let loc = localize_residuals(&res, &PartitionOfUnity::new(mesh)?);
    let partition = loc.partition_defect(&res);
    let local = reconstruct_all_local(mesh, &dm.cells, &loc)?;
    let vertex_cells = mesh.vertex_cells();
    let patches = mesh.vertex_patches();
    let mut support_violations = 0;
    for lf in &local.patches {
        let patch = &patches[lf.vertex];
        for (&k, s) in lf.cells.iter().zip(&lf.sigma) {
            if !vertex_cells[lf.vertex].contains(&k) {
                support_violations += s.iter().filter(|v| **v != 0.0).count();
                continue;
            }
            let el = &local.elements[k];
            for (i, ce) in mesh.cell_edges[k].iter().enumerate() {
                let rim = patch.rim_edges.binary_search(&ce.edge).is_ok();
                let constrained = rim && (!patch.is_boundary_vertex || !mesh.edges[ce.edge].contains(lf.vertex));
                if constrained {
                    support_violations += el.edge_dofs(i).filter(|&d| s[d] != 0.0).count();
                }
            }
        }
    }
    Ok(EquilibrationRun {
        p,
        global_bulk,
        global_jump,
        partition,
        local_bulk: local.equilibration_defect(mesh, &res),
        local_jump: local.jump_defect(mesh, &res),
        support_violations,
    })
}

/// Benchmark p-sweep with both estimators.
pub fn benchmark_sweep(mesh: &PolygonalMesh, degrees: std::ops::RangeInclusive<usize>) -> Result<Vec<HistoryRow>> {
    let problem = Problem::builtin("lshape-r23")?;
    degrees
        .enumerate()
        .map(|(i, p)| {
            let mut row = solve_and_estimate(mesh, &vec![p; mesh.n_cells()], &problem, &StepOptions::default())?.row;
            row.iter = i;
            Ok(row)
        })
        .collect()
}

/// Least-squares slope and coefficient of determination of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, r2)
}

/// Uniform refinement at `p = 1` from the 12-square mesh; `levels` meshes in total.
pub fn uniform_h_rate(levels: usize) -> (Vec<HistoryRow>, Option<f64>) {
    let problem = Problem::builtin("lshape-r23").expect("builtin problem");
    let cfg = AdaptConfig {
        p: 1,
        mode: Mode::UniformH,
        max_iterations: levels,
        dof_budget: usize::MAX,
        ..Default::default()
    };
    let out = run_adaptive(&problem, problem.mesh.clone(), &cfg);
    let x: Vec<f64> = out.history.iter().map(|r| (r.ndofs as f64).ln()).collect();
    let y: Vec<f64> = out.history.iter().map(|r| r.error.unwrap_or(f64::NAN).ln()).collect();
    let slope = (out.error.is_none() && x.len() >= 2).then(|| linear_fit(&x, &y).0);
    (out.history, slope)
}

/// Adaptive histories for h-refinement at fixed degrees and for hp-refinement.
#[derive(Debug, Clone)]
pub struct HpComparison {
    pub h_runs: Vec<(usize, Vec<HistoryRow>)>,
    pub hp_run: Vec<HistoryRow>,
    pub target: f64,
}

/// First DOF count at which `error ≤ target`.
pub fn dofs_to_reach(rows: &[HistoryRow], target: f64) -> Option<usize> {
    rows.iter().find(|r| r.error.is_some_and(|e| e <= target)).map(|r| r.ndofs)
}

impl HpComparison {
    pub fn best_h_dofs(&self) -> Option<usize> {
        self.h_runs.iter().filter_map(|(_, rows)| dofs_to_reach(rows, self.target)).min()
    }

    pub fn hp_dofs(&self) -> Option<usize> {
        dofs_to_reach(&self.hp_run, self.target)
    }

    /// `R²` of `log(error)` against `√#DOFs` over the hp history.
    pub fn hp_r2(&self) -> f64 {
        let x: Vec<f64> = self.hp_run.iter().map(|r| (r.ndofs as f64).sqrt()).collect();
        let y: Vec<f64> = self.hp_run.iter().map(|r| r.error.unwrap_or(f64::NAN).ln()).collect();
        linear_fit(&x, &y).1
    }
}

/// h-adaptive runs for `p ∈ {1,2,3}` up to `h_budget` DOFs and an hp-adaptive
/// run up to `hp_budget` DOFs, all from the 12-square mesh with local marking.
pub fn hp_comparison(target: f64, h_budget: usize, hp_budget: usize) -> Result<HpComparison> {
    let problem = Problem::builtin("lshape-r23")?;
    let run = |mode: Mode, p: usize, budget: usize| -> Result<Vec<HistoryRow>> {
        let cfg = AdaptConfig {
            p,
            mode,
            estimator: EstimatorKind::Both,
            dof_budget: budget,
            max_iterations: 200,
            ..Default::default()
        };
        let out = run_adaptive(&problem, problem.mesh.clone(), &cfg);
        match out.error {
            Some(e) => Err(e),
            None => Ok(out.history),
        }
    };
    let h_runs = [1, 2, 3]
        .into_iter()
        .map(|p| Ok((p, run(Mode::HAdaptive, p, h_budget)?)))
        .collect::<Result<_>>()?;
    let hp_run = run(Mode::HpAdaptive, 1, hp_budget)?;
    Ok(HpComparison { h_runs, hp_run, target })
}

/// Extreme generalized eigenvalues of `s` against `fine` on the range of the
/// projector `nonpoly`; `(NaN, NaN)` when that range is trivial.
fn kernel_eigen_range(nonpoly: &DMatrix<f64>, s: &DMatrix<f64>, fine: &DMatrix<f64>) -> Result<(f64, f64)> {
    let svd = nonpoly.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors");
    // nonzero singular values of a projector are at least one
    let cols: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 0.5).collect();
    if cols.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let z = u.select_columns(&cols);
    let s = z.transpose() * s * &z;
    let m = z.transpose() * fine * &z;
    let l = m.cholesky().ok_or_else(|| crate::VemError::SingularLocal {
        element: 0,
        what: "fine-grid kernel form".into(),
    })?;
    let linv = l.l().try_inverse().expect("triangular factor");
    let c = &linv * s * linv.transpose();
    let ev = ((&c + c.transpose()) * 0.5).symmetric_eigen().eigenvalues;
    Ok((ev.min(), ev.max()))
}

/// Range of `S̃^K(v, v) / |v|²_1` over `v ∈ ker Π∇_p`, the seminorm taken from
/// the fine lifting; `NaN` on triangles at `p = 1`.
pub fn primal_stability_range(poly: &[Point], p: usize, stab: Stabilization) -> Result<(f64, f64)> {
    let el = PrimalElement::new(0, poly, p, &vec![p; poly.len()], stab)?;
    let fine = oracle::fine_stiffness(&el, ORACLE_REFINEMENT)?;
    kernel_eigen_range(&el.nonpolynomial, &el.stabilization, &fine)
}

/// Smallest eigenvalue of `M_K` and the generalized eigenvalue range of `S^K`
/// against the fine-grid mass on `ker Π⁰_q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationProbe {
    pub q: usize,
    pub min_mass_eigenvalue: f64,
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    pub spread: f64,
}

/// Refinement of the fan triangulation used by the fine-grid oracle.
pub const ORACLE_REFINEMENT: usize = 32;

pub fn stabilization_probe(poly: &[Point], q: usize) -> Result<StabilizationProbe> {
    let el = FluxElement::new(0, poly, q)?;
    let min_mass_eigenvalue = el.mass.clone().symmetric_eigen().eigenvalues.min();
    let fine = oracle::fine_mass(&el, ORACLE_REFINEMENT)?;
    let (alpha_lower, alpha_upper) = kernel_eigen_range(&el.nonpolynomial, &el.stab_form, &fine)?;
    Ok(StabilizationProbe {
        q,
        min_mass_eigenvalue,
        alpha_lower,
        alpha_upper,
        spread: alpha_upper / alpha_lower,
    })
}

/// Per degree `q`, the smallest mass eigenvalue and the largest spread over random polygons.
pub fn stabilization_probes(seed: u64, count: usize, degrees: std::ops::RangeInclusive<usize>) -> Result<Vec<StabilizationProbe>> {
    let polys = random_polygons(seed, count);
    degrees
        .map(|q| {
            let probes: Vec<StabilizationProbe> = polys.par_iter().map(|p| stabilization_probe(p, q)).collect::<Result<_>>()?;
            Ok(StabilizationProbe {
                q,
                min_mass_eigenvalue: probes.iter().map(|p| p.min_mass_eigenvalue).fold(f64::INFINITY, f64::min),
                alpha_lower: probes.iter().map(|p| p.alpha_lower).fold(f64::INFINITY, f64::min),
                alpha_upper: probes.iter().map(|p| p.alpha_upper).fold(0.0, f64::max),
                spread: probes.iter().map(|p| p.spread).fold(0.0, f64::max),
            })
        })
        .collect()
}

/// Allowed growth of the spread from degree `q` to `q + 1`.
pub fn spread_growth_bound(q: usize) -> f64 {
    let a = q.max(1) as f64;
    ((a + 1.0) / a).powi(8)
}

pub const SUITES: [&str; 4] = ["projectors", "equilibration", "stabilization", "benchmark"];

/// Run a named suite with the default tolerances.
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    match name {
        "projectors" => {
            let d = projector_defects(seed, 200, 1..=4)?;
            checks.push(Check::at_most("primal Π∇ reproduction", d.pi_nabla, 1e-10));
            checks.push(Check::at_most("primal Π⁰ reproduction", d.pi0, 1e-10));
            checks.push(Check::at_most("vector Π⁰ reproduction", d.vector_pi0, 1e-10));
            checks.push(Check::at_most("divergence reproduction", d.divergence, 1e-10));
            for r in patch_runs(1..=4)? {
                let worst = r.error.max(r.eta).max(r.eta_loc);
                checks.push(Check::at_most(format!("patch test {} p={}", r.mesh, r.p), worst, 1e-7));
            }
        }
        "equilibration" => {
            let mesh = PolygonalMesh::lshape(4);
            for p in 1..=3 {
                let r = equilibration_run(&mesh, p)?;
                checks.push(Check::at_most(format!("p={p} global div moments"), r.global_bulk, 1e-9));
                checks.push(Check::at_most(format!("p={p} global jumps"), r.global_jump, 1e-9));
                checks.push(Check::at_most(format!("p={p} partition reassembly"), r.partition, 1e-10));
                checks.push(Check::at_most(format!("p={p} local div moments"), r.local_bulk, 1e-9));
                checks.push(Check::at_most(format!("p={p} local jumps"), r.local_jump, 1e-9));
                checks.push(Check::at_most(
                    format!("p={p} patch support leaks"),
                    r.support_violations as f64,
                    0.0,
                ));
            }
        }
        "stabilization" => {
            let probes = stabilization_probes(seed, 24, 0..=4)?;
            for pr in &probes {
                checks.push(Check::positive(format!("q={} min eig M_K", pr.q), pr.min_mass_eigenvalue));
            }
            for w in probes.windows(2) {
                let ratio = w[1].spread / w[0].spread;
                checks.push(Check::at_most(
                    format!("spread growth q={}→{}", w[0].q, w[1].q),
                    ratio,
                    spread_growth_bound(w[0].q),
                ));
            }
        }
        "benchmark" => {
            for r in benchmark_sweep(&PolygonalMesh::lshape(4), 1..=5)? {
                let p = r.pmin;
                checks.push(Check::within(format!("p={p} I"), r.index.unwrap_or(f64::NAN), 1.5, 3.5));
                checks.push(Check::within(format!("p={p} I_loc"), r.index_loc.unwrap_or(f64::NAN), 1.0, 2.0));
                if p >= 3 {
                    checks.push(Check::within(
                        format!("p={p} I plateau"),
                        r.index.unwrap_or(f64::NAN),
                        2.3 * 0.7,
                        2.3 * 1.3,
                    ));
                    checks.push(Check::within(
                        format!("p={p} I_loc plateau"),
                        r.index_loc.unwrap_or(f64::NAN),
                        1.3 * 0.7,
                        1.3 * 1.3,
                    ));
                }
            }
        }
        _ => {
            return Err(crate::VemError::Config(format!(
                "unknown suite '{name}' (expected one of {})",
                SUITES.join(", ")
            )))
        }
    }
    Ok(SuiteReport {
        suite: name.into(),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primal_stabilization_is_spectrally_equivalent() {
        for stab in [Stabilization::DofiDofi, Stabilization::Boundary] {
            for p in 1..=3 {
                let (lo, hi) = random_polygons(5, 8)
                    .iter()
                    .map(|poly| primal_stability_range(poly, p, stab).unwrap())
                    .filter(|r| !r.0.is_nan())
                    .fold((f64::INFINITY, 0.0f64), |(a, b), (l, h)| (a.min(l), b.max(h)));
                assert!(lo > 0.02 && hi < 5.0 && hi / lo < 20.0, "{stab:?} p={p}: [{lo:.3e}, {hi:.3e}]");
            }
        }
    }

    #[test]
    fn linear_fit_of_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (s, r2) = linear_fit(&x, &y);
        assert!((s + 0.5).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn projector_defects_small_sample() {
        let d = projector_defects(11, 8, 1..=3).unwrap();
        assert!(
            d.pi_nabla < 1e-10 && d.pi0 < 1e-10 && d.vector_pi0 < 1e-10 && d.divergence < 1e-10,
            "{d:?}"
        );
    }

    #[test]
    fn dofs_to_reach_takes_first_hit() {
        let row = |ndofs, e| HistoryRow {
            iter: 0,
            ncells: 1,
            ndofs,
            pmin: 1,
            pmax: 1,
            error: Some(e),
            eta: None,
            eta_loc: None,
            index: None,
            index_loc: None,
            t_solve: 0.0,
            t_estimate: 0.0,
        };
        let rows = [row(10, 1.0), row(20, 0.1), row(30, 0.01)];
        assert_eq!(dofs_to_reach(&rows, 0.5), Some(20));
        assert_eq!(dofs_to_reach(&rows, 1e-3), None);
    }

    #[test]
    fn stabilization_probe_is_finite() {
        let sq = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        for q in 0..=2 {
            let pr = stabilization_probe(&sq, q).unwrap();
            assert!(
                pr.min_mass_eigenvalue > 0.0 && pr.alpha_lower > 0.0 && pr.spread.is_finite(),
                "{pr:?}"
            );
            println!("{pr:?}");
        }
    }
}
