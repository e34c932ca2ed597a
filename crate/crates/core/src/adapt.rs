//! Estimators, exact projected error, marking and the adaptive loop.

use crate::error::{Result, VemError};
use crate::flux::{
    compute_residuals, global_reconstruct, localize_residuals, reconstruct_all_local, GlobalFlux, LocalizedFlux, PartitionOfUnity,
    ResidualData,
};
use crate::mesh::{Point, PolygonalMesh};
use crate::polybasis::quadrature::polygon_error_quadrature;
use crate::primal::{assemble_and_solve, DegreeMap, PrimalSolution, Stabilization};
use crate::problem::Problem;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Global,
    Local,
    Both,
}

impl FromStr for EstimatorKind {
    type Err = VemError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Self::Global),
            "local" => Ok(Self::Local),
            "both" => Ok(Self::Both),
            _ => Err(VemError::Config(format!("unknown estimator '{s}'"))),
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Global => "global",
            Self::Local => "local",
            Self::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Fixed,
    HAdaptive,
    HpAdaptive,
    UniformH,
}

impl FromStr for Mode {
    type Err = VemError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "h-adaptive" | "h" => Ok(Self::HAdaptive),
            "hp-adaptive" | "hp" => Ok(Self::HpAdaptive),
            "uniform-h" => Ok(Self::UniformH),
            _ => Err(VemError::Config(format!("unknown mode '{s}'"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Fixed => "fixed",
            Self::HAdaptive => "h-adaptive",
            Self::HpAdaptive => "hp-adaptive",
            Self::UniformH => "uniform-h",
        })
    }
}

/// Per-element estimator contributions and the global quantities.
#[derive(Debug, Clone, Default)]
pub struct EstimatorReport {
    /// `‖σ^Δ_{p-1}‖²_{a,K}`.
    pub flux_global: Option<Vec<f64>>,
    /// `‖σ^Δ_p‖²_{a,K}`.
    pub flux_local: Option<Vec<f64>>,
    /// `S((I-Π∇)u, (I-Π∇)u)` per element.
    pub stabilization: Vec<f64>,
    pub eta: Option<f64>,
    pub eta_loc: Option<f64>,
    pub error: Option<f64>,
}

impl EstimatorReport {
    pub fn new(sol: &PrimalSolution) -> Self {
        Self {
            stabilization: sol.stab_energy.clone(),
            ..Default::default()
        }
    }

    /// `η_K` from the local flux when available, else from the global one.
    pub fn eta_k(&self) -> Vec<f64> {
        let flux = self
            .flux_local
            .as_ref()
            .or(self.flux_global.as_ref())
            .expect("an estimator was computed");
        flux.iter().zip(&self.stabilization).map(|(f, s)| (f + s).sqrt()).collect()
    }

    pub fn efficiency_indices(&self) -> (Option<f64>, Option<f64>) {
        efficiency_indices(self)
    }
}

fn total(flux: &[f64], stab: &[f64]) -> f64 {
    flux.iter().zip(stab).map(|(f, s)| f + s).sum::<f64>().sqrt()
}

pub fn estimate_global(report: &mut EstimatorReport, flux: &GlobalFlux) {
    let e = flux.energies();
    report.eta = Some(total(&e, &report.stabilization));
    report.flux_global = Some(e);
}

pub fn estimate_local(report: &mut EstimatorReport, flux: &LocalizedFlux) {
    let e = flux.energies();
    report.eta_loc = Some(total(&e, &report.stabilization));
    report.flux_local = Some(e);
}

/// `|u - Π∇_p u_h|_{1,T}`.
pub fn exact_projected_error(
    mesh: &PolygonalMesh,
    sol: &PrimalSolution,
    grad: &(dyn Fn(&Point) -> [f64; 2] + Sync),
    singular: Option<&Point>,
    quadrature_boost: usize,
) -> f64 {
    (0..mesh.n_cells())
        .into_par_iter()
        .map(|k| {
            let el = &sol.elements[k];
            let touches = singular.filter(|s| el.vertices.iter().any(|v| (v - *s).norm() < 1e-14));
            let rule = polygon_error_quadrature(&el.vertices, 2 * el.degree + 6 + quadrature_boost, touches);
            rule.integrate(|x| {
                let g = grad(x);
                let gh = el.space.frame.grad(&sol.pi_coeffs[k], x);
                (g[0] - gh[0]).powi(2) + (g[1] - gh[1]).powi(2)
            })
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum::<f64>()
        .sqrt()
}

/// `(η / error, η_loc / error)`; `None` when the error is not positive.
pub fn efficiency_indices(report: &EstimatorReport) -> (Option<f64>, Option<f64>) {
    let Some(err) = report.error.filter(|e| *e > 0.0) else {
        return (None, None);
    };
    (report.eta.map(|e| e / err), report.eta_loc.map(|e| e / err))
}

/// Cells with `η_K > θ · mean(η)`.
pub fn mark(eta_k: &[f64], theta: f64) -> Vec<usize> {
    if eta_k.is_empty() {
        return Vec::new();
    }
    let avg = eta_k.iter().sum::<f64>() / eta_k.len() as f64;
    (0..eta_k.len()).filter(|&k| eta_k[k] > theta * avg).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpParams {
    pub gamma_p: f64,
    pub gamma_h: f64,
    pub gamma_n: f64,
    pub p_max: usize,
}

impl Default for HpParams {
    fn default() -> Self {
        Self {
            gamma_p: 0.4,
            gamma_h: 2.0,
            gamma_n: 1.0,
            p_max: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdaptState {
    pub mesh: PolygonalMesh,
    pub degrees: Vec<usize>,
    pub eta_pred: Vec<f64>,
    pub iteration: usize,
}

impl AdaptState {
    pub fn new(mesh: PolygonalMesh, p: usize) -> Self {
        let n = mesh.n_cells();
        Self {
            mesh,
            degrees: vec![p; n],
            eta_pred: vec![0.0; n],
            iteration: 0,
        }
    }
}

/// What happened to each marked cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RefineLog {
    pub h_refined: Vec<usize>,
    pub p_refined: Vec<usize>,
    pub clamped: Vec<usize>,
}

/// Melenk-Wohlmuth decision: p-refine where the estimator met its prediction,
/// otherwise h-refine. With `pure_h` every marked cell is split.
pub fn hp_decide_and_refine(
    state: &AdaptState,
    marked: &[usize],
    eta_k: &[f64],
    params: &HpParams,
    pure_h: bool,
) -> Result<(AdaptState, RefineLog)> {
    let n = state.mesh.n_cells();
    let mut degrees = state.degrees.clone();
    let mut pred: Vec<f64> = state.eta_pred.iter().map(|e| params.gamma_n * e).collect();
    let mut log = RefineLog::default();
    let mut is_marked = vec![false; n];
    for &k in marked {
        is_marked[k] = true;
    }
    for k in (0..n).filter(|&k| is_marked[k]) {
        let want_p = !pure_h && eta_k[k] <= state.eta_pred[k];
        if want_p && degrees[k] < params.p_max {
            degrees[k] += 1;
            pred[k] = params.gamma_p * eta_k[k];
            log.p_refined.push(k);
        } else {
            if want_p {
                log.clamped.push(k);
            }
            log.h_refined.push(k);
        }
    }
    let (mesh, parent) = if log.h_refined.is_empty() {
        (state.mesh.clone(), (0..n).collect())
    } else {
        state.mesh.refine(&log.h_refined)?
    };
    let mut children = vec![0usize; n];
    for &k in &parent {
        children[k] += 1;
    }
    let mut is_h = vec![false; n];
    for &k in &log.h_refined {
        is_h[k] = true;
    }
    let new_degrees = parent.iter().map(|&k| degrees[k]).collect();
    let new_pred = parent
        .iter()
        .map(|&k| {
            if is_h[k] {
                params.gamma_h * 0.5f64.powi(state.degrees[k] as i32) * eta_k[k] / (children[k] as f64).sqrt()
            } else {
                pred[k]
            }
        })
        .collect();
    Ok((
        AdaptState {
            mesh,
            degrees: new_degrees,
            eta_pred: new_pred,
            iteration: state.iteration + 1,
        },
        log,
    ))
}

/// Per-step choices shared by fixed and adaptive runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOptions {
    pub estimator: EstimatorKind,
    pub stabilization: Stabilization,
    /// Extra degree for the exact-error quadrature.
    pub quadrature_boost: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            estimator: EstimatorKind::Both,
            stabilization: Stabilization::DofiDofi,
            quadrature_boost: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaptConfig {
    pub p: usize,
    pub mode: Mode,
    pub estimator: EstimatorKind,
    pub theta: f64,
    pub hp: HpParams,
    pub dof_budget: usize,
    pub eta_tolerance: f64,
    pub max_iterations: usize,
    pub stabilization: Stabilization,
    pub quadrature_boost: usize,
}

impl AdaptConfig {
    pub fn step_options(&self) -> StepOptions {
        StepOptions {
            estimator: self.estimator,
            stabilization: self.stabilization,
            quadrature_boost: self.quadrature_boost,
        }
    }
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            p: 1,
            mode: Mode::Fixed,
            estimator: EstimatorKind::Both,
            theta: 0.75,
            hp: HpParams::default(),
            dof_budget: 50_000,
            eta_tolerance: 0.0,
            max_iterations: 100,
            stabilization: Stabilization::DofiDofi,
            quadrature_boost: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub ncells: usize,
    pub ndofs: usize,
    pub pmin: usize,
    pub pmax: usize,
    pub error: Option<f64>,
    pub eta: Option<f64>,
    pub eta_loc: Option<f64>,
    pub index: Option<f64>,
    pub index_loc: Option<f64>,
    pub t_solve: f64,
    pub t_estimate: f64,
}

/// Everything computed on one mesh.
#[derive(Debug)]
pub struct StepOutput {
    pub solution: PrimalSolution,
    pub residuals: ResidualData,
    pub global: Option<GlobalFlux>,
    pub local: Option<LocalizedFlux>,
    pub report: EstimatorReport,
    pub row: HistoryRow,
}

/// Solve and estimate on the given mesh and degrees.
pub fn solve_and_estimate(mesh: &PolygonalMesh, degrees: &[usize], problem: &Problem, opts: &StepOptions) -> Result<StepOutput> {
    let (estimator, stab) = (opts.estimator, opts.stabilization);
    let t0 = Instant::now();
    let dm = DegreeMap::from_cells(mesh, degrees.to_vec())?;
    let solution = assemble_and_solve(mesh, &dm, &*problem.f, &*problem.u, stab)?;
    let t_solve = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let residuals = compute_residuals(mesh, &solution);
    let mut report = EstimatorReport::new(&solution);
    let global = if estimator != EstimatorKind::Local {
        let g = global_reconstruct(mesh, degrees, &residuals)?;
        estimate_global(&mut report, &g);
        Some(g)
    } else {
        None
    };
    let local = if estimator != EstimatorKind::Global {
        let pou = PartitionOfUnity::new(mesh)?;
        let loc = localize_residuals(&residuals, &pou);
        let l = reconstruct_all_local(mesh, degrees, &loc)?;
        estimate_local(&mut report, &l);
        Some(l)
    } else {
        None
    };
    let t_estimate = t1.elapsed().as_secs_f64();
    report.error = Some(exact_projected_error(
        mesh,
        &solution,
        &*problem.grad,
        problem.singular.as_ref(),
        opts.quadrature_boost,
    ));
    let (index, index_loc) = efficiency_indices(&report);
    let row = HistoryRow {
        iter: 0,
        ncells: mesh.n_cells(),
        ndofs: solution.n_dofs(),
        pmin: dm.min(),
        pmax: dm.max(),
        error: report.error,
        eta: report.eta,
        eta_loc: report.eta_loc,
        index,
        index_loc,
        t_solve,
        t_estimate,
    };
    Ok(StepOutput {
        solution,
        residuals,
        global,
        local,
        report,
        row,
    })
}

/// Adaptive history; `error` holds the failure that ended the run early, if any.
#[derive(Debug)]
pub struct RunOutcome {
    pub history: Vec<HistoryRow>,
    pub final_state: AdaptState,
    pub error: Option<VemError>,
}

/// SOLVE → ESTIMATE → MARK → REFINE until the DOF budget, the tolerance or the
/// iteration cap is reached.
pub fn run_adaptive(problem: &Problem, mesh: PolygonalMesh, cfg: &AdaptConfig) -> RunOutcome {
    run_adaptive_with(problem, mesh, cfg, |_, _| {})
}

/// As [`run_adaptive`], calling `observe` after every step.
pub fn run_adaptive_with(
    problem: &Problem,
    mesh: PolygonalMesh,
    cfg: &AdaptConfig,
    mut observe: impl FnMut(&AdaptState, &StepOutput),
) -> RunOutcome {
    let mut state = AdaptState::new(mesh, cfg.p);
    let mut history = Vec::new();
    loop {
        let step = match solve_and_estimate(&state.mesh, &state.degrees, problem, &cfg.step_options()) {
            Ok(s) => s,
            Err(e) => {
                return RunOutcome {
                    history,
                    final_state: state,
                    error: Some(e),
                }
            }
        };
        let mut row = step.row.clone();
        row.iter = state.iteration;
        history.push(row.clone());
        observe(&state, &step);
        let eta_mark = row.eta_loc.or(row.eta).unwrap_or(0.0);
        let done = cfg.mode == Mode::Fixed
            || row.ndofs > cfg.dof_budget
            || eta_mark < cfg.eta_tolerance
            || state.iteration + 1 >= cfg.max_iterations;
        if done {
            return RunOutcome {
                history,
                final_state: state,
                error: None,
            };
        }
        let eta_k = step.report.eta_k();
        let marked = match cfg.mode {
            Mode::UniformH => (0..state.mesh.n_cells()).collect(),
            _ => mark(&eta_k, cfg.theta),
        };
        let pure_h = cfg.mode != Mode::HpAdaptive;
        match hp_decide_and_refine(&state, &marked, &eta_k, &cfg.hp, pure_h) {
            Ok((next, _)) => state = next,
            Err(e) => {
                return RunOutcome {
                    history,
                    final_state: state,
                    error: Some(e),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marking_examples() {
        assert_eq!(mark(&[1.0; 5], 0.75), vec![0, 1, 2, 3, 4]);
        assert_eq!(mark(&[0.0, 3.0, 0.0, 0.0], 0.75), vec![1]);
        let eta = [0.1, 0.5, 0.9, 1.3, 0.2, 2.0];
        let mut prev = mark(&eta, 0.1).len();
        for t in [0.5, 0.75, 1.0, 1.5, 2.0] {
            let m = mark(&eta, t).len();
            assert!(m <= prev);
            prev = m;
        }
    }

    #[test]
    fn fresh_state_h_refines_then_prediction_allows_p() {
        let state = AdaptState::new(PolygonalMesh::square(2), 2);
        let eta = [1.0, 0.1, 0.1, 0.1];
        let params = HpParams::default();
        let (s1, log) = hp_decide_and_refine(&state, &[0], &eta, &params, false).unwrap();
        assert_eq!(log.h_refined, vec![0]);
        assert!(log.p_refined.is_empty());
        assert_eq!(s1.mesh.n_cells(), 7);
        // children of cell 0: prediction γ_h 2^{-p} η / 2 = 0.25
        let child = (0..7).find(|&k| s1.eta_pred[k] > 0.0).unwrap();
        assert!((s1.eta_pred[child] - 0.25).abs() < 1e-15);
        let mut eta1 = vec![0.05; 7];
        eta1[child] = 0.2;
        let (s2, log2) = hp_decide_and_refine(&s1, &[child], &eta1, &params, false).unwrap();
        assert_eq!(log2.p_refined, vec![child]);
        assert_eq!(s2.degrees[child], 3);
        assert!((s2.eta_pred[child] - 0.08).abs() < 1e-15);
        // the pure-h override splits it instead
        let (_, log3) = hp_decide_and_refine(&s1, &[child], &eta1, &params, true).unwrap();
        assert_eq!(log3.h_refined, vec![child]);
    }

    #[test]
    fn p_max_clamps_to_h() {
        let mut state = AdaptState::new(PolygonalMesh::square(1), 8);
        state.eta_pred = vec![1.0];
        let (s, log) = hp_decide_and_refine(&state, &[0], &[0.5], &HpParams::default(), false).unwrap();
        assert_eq!(log.clamped, vec![0]);
        assert_eq!(s.mesh.n_cells(), 4);
        assert!(s.degrees.iter().all(|&p| p == 8));
    }

    #[test]
    fn patch_problem_has_vanishing_estimators() {
        let problem = Problem::builtin("patch-q3").unwrap();
        let out = solve_and_estimate(&problem.mesh, &[3; 16], &problem, &StepOptions::default()).unwrap();
        assert!(out.row.error.unwrap() < 1e-8);
        assert!(out.row.eta.unwrap() < 1e-8 && out.row.eta_loc.unwrap() < 1e-8);
    }

    #[test]
    fn benchmark_on_48_cells() {
        let problem = Problem::builtin("lshape-r23").unwrap();
        let mesh = PolygonalMesh::lshape(4);
        let out = solve_and_estimate(&mesh, &vec![1; 48], &problem, &StepOptions::default()).unwrap();
        let err = out.row.error.unwrap();
        assert!(err.is_finite() && err > 0.0);
        assert!(out.row.eta.unwrap() > 0.0 && out.row.index.unwrap().is_finite());
        // the largest local indicator sits at the re-entrant corner
        let eta_k = out.report.eta_k();
        let kmax = (0..48).max_by(|&a, &b| eta_k[a].partial_cmp(&eta_k[b]).unwrap()).unwrap();
        assert!(mesh.cell_points(kmax).iter().any(|p| p.norm() < 1e-14));
        let marked = mark(&eta_k, 0.75);
        let corner: Vec<usize> = (0..48).filter(|&k| mesh.cell_points(k).iter().any(|p| p.norm() < 1e-14)).collect();
        assert!(corner.iter().all(|k| marked.contains(k)));
    }
}
