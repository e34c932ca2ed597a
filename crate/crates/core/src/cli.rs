//! Command-line front end: `run`, `verify`, `mesh-gen`.

use crate::adapt::{run_adaptive_with, solve_and_estimate, AdaptConfig, EstimatorKind, HistoryRow, HpParams, Mode, StepOptions};
use crate::error::{Result, VemError};
use crate::mesh::PolygonalMesh;
use crate::primal::Stabilization;
use crate::problem::Problem;
use crate::verify;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

impl VemError {
    /// Configuration and input problems map to 2, numerical failures to 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            VemError::SingularLocal { .. } | VemError::SingularPatch { .. } | VemError::Solver(_) => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "vemflux",
    version,
    about = "hp-adaptive virtual elements with equilibrated-flux error estimators"
)]
pub struct Cli {
    /// Worker threads for element-parallel phases.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a fixed-degree sweep or an adaptive loop and write results.csv and summary.json.
    Run(RunArgs),
    /// Run a verification suite and print a pass/fail table.
    Verify {
        /// projectors | equilibration | stabilization | benchmark
        suite: String,
        #[arg(long, default_value_t = 20240)]
        seed: u64,
    },
    /// Write a generated mesh as JSON.
    MeshGen {
        /// `square(n)` or `lshape(n)`
        spec: String,
        /// Uniform refinement steps applied after generation.
        #[arg(long, default_value_t = 0)]
        refine: usize,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    /// Generator spec such as `lshape(4)` or a mesh JSON file.
    #[arg(long)]
    pub mesh: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    /// Inclusive degree range `a:b` for fixed-mode sweeps.
    #[arg(long)]
    pub p_sweep: Option<String>,
    #[arg(long)]
    pub estimator: Option<String>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long)]
    pub gamma_p: Option<String>,
    #[arg(long)]
    pub gamma_h: Option<String>,
    #[arg(long)]
    pub gamma_n: Option<String>,
    #[arg(long)]
    pub p_max: Option<String>,
    #[arg(long)]
    pub dof_budget: Option<String>,
    #[arg(long)]
    pub eta_tolerance: Option<String>,
    #[arg(long)]
    pub max_iterations: Option<String>,
    #[arg(long)]
    pub quadrature_boost: Option<String>,
    #[arg(long)]
    pub stabilization: Option<String>,
    #[arg(long)]
    pub output: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Write the mesh of every iteration as JSON.
    #[arg(long)]
    pub snapshots: Option<String>,
    /// `false` writes zero timings for byte-stable output.
    #[arg(long)]
    pub timings: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let pairs: [(&'static str, &Option<String>); 20] = [
            ("problem", &self.problem),
            ("mesh", &self.mesh),
            ("p", &self.p),
            ("p_sweep", &self.p_sweep),
            ("estimator", &self.estimator),
            ("mode", &self.mode),
            ("theta", &self.theta),
            ("gamma_p", &self.gamma_p),
            ("gamma_h", &self.gamma_h),
            ("gamma_n", &self.gamma_n),
            ("p_max", &self.p_max),
            ("dof_budget", &self.dof_budget),
            ("eta_tolerance", &self.eta_tolerance),
            ("max_iterations", &self.max_iterations),
            ("quadrature_boost", &self.quadrature_boost),
            ("stabilization", &self.stabilization),
            ("output", &self.output),
            ("seed", &self.seed),
            ("snapshots", &self.snapshots),
            ("timings", &self.timings),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }
}

/// Every effective run parameter; echoed into summary.json.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub mesh: Option<String>,
    pub p: usize,
    pub p_sweep: Option<(usize, usize)>,
    pub estimator: EstimatorKind,
    pub mode: Mode,
    pub theta: f64,
    pub gamma_p: f64,
    pub gamma_h: f64,
    pub gamma_n: f64,
    pub p_max: usize,
    pub dof_budget: usize,
    pub eta_tolerance: f64,
    pub max_iterations: usize,
    pub quadrature_boost: usize,
    pub stabilization: Stabilization,
    pub output: String,
    pub seed: u64,
    pub snapshots: bool,
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let a = AdaptConfig::default();
        Self {
            problem: "lshape-r23".into(),
            mesh: None,
            p: a.p,
            p_sweep: None,
            estimator: a.estimator,
            mode: a.mode,
            theta: a.theta,
            gamma_p: a.hp.gamma_p,
            gamma_h: a.hp.gamma_h,
            gamma_n: a.hp.gamma_n,
            p_max: a.hp.p_max,
            dof_budget: a.dof_budget,
            eta_tolerance: a.eta_tolerance,
            max_iterations: a.max_iterations,
            quadrature_boost: a.quadrature_boost,
            stabilization: a.stabilization,
            output: "out".into(),
            seed: 0,
            snapshots: false,
            timings: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| VemError::Config(format!("invalid value {value:?} for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(VemError::Config(format!("invalid boolean {value:?} for '{key}'"))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "problem" => self.problem = v.into(),
            "mesh" => self.mesh = Some(v.into()),
            "p" => self.p = parse(&key, v)?,
            "p_sweep" => {
                let (a, b) = v
                    .split_once(':')
                    .ok_or_else(|| VemError::Config(format!("p_sweep expects a:b, got {v:?}")))?;
                self.p_sweep = Some((parse(&key, a)?, parse(&key, b)?));
            }
            "estimator" => self.estimator = v.parse()?,
            "mode" => self.mode = v.parse()?,
            "theta" => self.theta = parse(&key, v)?,
            "gamma_p" => self.gamma_p = parse(&key, v)?,
            "gamma_h" => self.gamma_h = parse(&key, v)?,
            "gamma_n" => self.gamma_n = parse(&key, v)?,
            "p_max" => self.p_max = parse(&key, v)?,
            "dof_budget" => self.dof_budget = parse(&key, v)?,
            "eta_tolerance" => self.eta_tolerance = parse(&key, v)?,
            "max_iterations" => self.max_iterations = parse(&key, v)?,
            "quadrature_boost" => self.quadrature_boost = parse(&key, v)?,
            "stabilization" => self.stabilization = v.parse()?,
            "output" => self.output = v.into(),
            "seed" => self.seed = parse(&key, v)?,
            "snapshots" => self.snapshots = parse_bool(&key, v)?,
            "timings" => self.timings = parse_bool(&key, v)?,
            _ => return Err(VemError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Apply a `key = value` file; `#` starts a comment.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| VemError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(VemError::Config(m));
        if self.p_max > 10 {
            return bad(format!("p_max = {} exceeds 10", self.p_max));
        }
        if self.p < 1 || self.p > self.p_max {
            return bad(format!("p = {} outside 1..={}", self.p, self.p_max));
        }
        if let Some((a, b)) = self.p_sweep {
            if a < 1 || a > b || b > self.p_max {
                return bad(format!("p_sweep {a}:{b} outside 1..={}", self.p_max));
            }
            if self.mode != Mode::Fixed {
                return bad("p_sweep requires mode = fixed".into());
            }
        }
        if !(self.theta > 0.0) {
            return bad(format!("theta = {} must be positive", self.theta));
        }
        if self.dof_budget < 1 || self.max_iterations < 1 {
            return bad("dof_budget and max_iterations must be at least 1".into());
        }
        if !(self.eta_tolerance >= 0.0) {
            return bad("eta_tolerance must be non-negative".into());
        }
        if !(self.gamma_p > 0.0 && self.gamma_h > 0.0 && self.gamma_n > 0.0) {
            return bad("gamma parameters must be positive".into());
        }
        Ok(())
    }

    pub fn adapt_config(&self) -> AdaptConfig {
        AdaptConfig {
            p: self.p,
            mode: self.mode,
            estimator: self.estimator,
            theta: self.theta,
            hp: HpParams {
                gamma_p: self.gamma_p,
                gamma_h: self.gamma_h,
                gamma_n: self.gamma_n,
                p_max: self.p_max,
            },
            dof_budget: self.dof_budget,
            eta_tolerance: self.eta_tolerance,
            max_iterations: self.max_iterations,
            stabilization: self.stabilization,
            quadrature_boost: self.quadrature_boost,
        }
    }

    /// Defaults, then the config file, then the flags.
    pub fn from_args(args: &RunArgs) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path).map_err(|e| VemError::Config(format!("{}: {e}", path.display())))?;
            cfg.apply_file(&text)?;
        }
        for (k, v) in args.overrides() {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Builtin generator spec or JSON file.
pub fn load_mesh(spec: &str) -> Result<PolygonalMesh> {
    if spec.contains('(') {
        return PolygonalMesh::builtin(spec);
    }
    let text = std::fs::read_to_string(spec).map_err(|e| VemError::Config(format!("{spec}: {e}")))?;
    PolygonalMesh::from_json(&text)
}

pub const CSV_HEADER: &str = "iter,ncells,ndofs,pmin,pmax,error,eta,eta_loc,I,I_loc,t_solve,t_estimate";

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.10e}"))
}

pub fn csv_line(r: &HistoryRow, timings: bool) -> String {
    let t = |x: f64| format!("{:.6e}", if timings { x } else { 0.0 });
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.iter,
        r.ncells,
        r.ndofs,
        r.pmin,
        r.pmax,
        opt(r.error),
        opt(r.eta),
        opt(r.eta_loc),
        opt(r.index),
        opt(r.index_loc),
        t(r.t_solve),
        t(r.t_estimate)
    )
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    version: &'a str,
    status: &'a str,
    error: Option<String>,
    config: &'a RunConfig,
    rows: usize,
    #[serde(rename = "final")]
    final_row: Option<&'a HistoryRow>,
}

fn write_outputs(dir: &Path, cfg: &RunConfig, rows: &[HistoryRow], failure: Option<&VemError>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut csv = std::fs::File::create(dir.join("results.csv"))?;
    writeln!(csv, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(csv, "{}", csv_line(r, cfg.timings))?;
    }
    let mut last = rows.last().cloned();
    if let (Some(l), false) = (last.as_mut(), cfg.timings) {
        l.t_solve = 0.0;
        l.t_estimate = 0.0;
    }
    let summary = Summary {
        version: env!("CARGO_PKG_VERSION"),
        status: if failure.is_some() { "failed" } else { "ok" },
        error: failure.map(|e| e.to_string()),
        config: cfg,
        rows: rows.len(),
        final_row: last.as_ref(),
    };
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(())
}

/// Execute a validated run; outputs are written even when a step fails.
pub fn execute(cfg: &RunConfig) -> Result<(Vec<HistoryRow>, Option<VemError>)> {
    let problem = Problem::builtin(&cfg.problem)?;
    let mesh = match &cfg.mesh {
        Some(spec) => load_mesh(spec)?,
        None => problem.mesh.clone(),
    };
    let dir = PathBuf::from(&cfg.output);
    let mut rows = Vec::new();
    let mut failure = None;
    if cfg.mode == Mode::Fixed {
        let (a, b) = cfg.p_sweep.unwrap_or((cfg.p, cfg.p));
        let opts = StepOptions {
            estimator: cfg.estimator,
            stabilization: cfg.stabilization,
            quadrature_boost: cfg.quadrature_boost,
        };
        for (i, p) in (a..=b).enumerate() {
            match solve_and_estimate(&mesh, &vec![p; mesh.n_cells()], &problem, &opts) {
                Ok(step) => rows.push(HistoryRow { iter: i, ..step.row }),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        if cfg.snapshots {
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("mesh_000.json"), mesh.to_json())?;
        }
    } else {
        let mut snap_err = None;
        let out = run_adaptive_with(&problem, mesh, &cfg.adapt_config(), |state, _| {
            if cfg.snapshots && snap_err.is_none() {
                let r = std::fs::create_dir_all(&dir)
                    .and_then(|_| std::fs::write(dir.join(format!("mesh_{:03}.json", state.iteration)), state.mesh.to_json()));
                snap_err = r.err();
            }
        });
        if let Some(e) = snap_err {
            return Err(e.into());
        }
        rows = out.history;
        failure = out.error;
    }
    write_outputs(&dir, cfg, &rows, failure.as_ref())?;
    Ok((rows, failure))
}

fn cmd_run(args: &RunArgs) -> i32 {
    let cfg = match RunConfig::from_args(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match execute(&cfg) {
        Ok((rows, None)) => {
            println!("{CSV_HEADER}");
            for r in &rows {
                println!("{}", csv_line(r, cfg.timings));
            }
            EXIT_OK
        }
        Ok((rows, Some(e))) => {
            eprintln!("error after {} rows: {e}", rows.len());
            e.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn cmd_verify(suite: &str, seed: u64) -> i32 {
    match verify::run_suite(suite, seed) {
        Ok(report) => {
            print!("{}", report.table());
            if report.passed() {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn cmd_mesh_gen(spec: &str, refine: usize, output: Option<&Path>) -> i32 {
    let run = || -> Result<()> {
        let mut mesh = PolygonalMesh::builtin(spec)?;
        for _ in 0..refine {
            let all: Vec<usize> = (0..mesh.n_cells()).collect();
            mesh = mesh.refine(&all)?.0;
        }
        let json = mesh.to_json();
        match output {
            Some(p) => std::fs::write(p, json + "\n")?,
            None => println!("{json}"),
        }
        Ok(())
    };
    match run() {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parse `args` and dispatch; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: cannot use {n} threads");
            return EXIT_CONFIG;
        }
    }
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify { suite, seed } => cmd_verify(suite, *seed),
        Command::MeshGen { spec, refine, output } => cmd_mesh_gen(spec, *refine, output.as_deref()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let mut cfg = RunConfig::default();
        cfg.apply_file("# comment\nmode = hp-adaptive\np-max = 6\ntheta=0.5 # inline\n")
            .unwrap();
        assert_eq!(cfg.mode, Mode::HpAdaptive);
        assert_eq!(cfg.p_max, 6);
        cfg.set("theta", "0.9").unwrap();
        assert_eq!(cfg.theta, 0.9);
        assert!(cfg.set("bogus", "1").is_err());
        assert!(cfg.apply_file("no equals sign").is_err());
    }

    #[test]
    fn validation_rules() {
        let mut cfg = RunConfig::default();
        cfg.validate().unwrap();
        cfg.p = 0;
        assert!(cfg.validate().is_err());
        cfg.p = 3;
        cfg.p_max = 11;
        assert!(cfg.validate().is_err());
        cfg.p_max = 8;
        cfg.theta = 0.0;
        assert!(cfg.validate().is_err());
        cfg.theta = 0.75;
        cfg.p_sweep = Some((1, 5));
        cfg.mode = Mode::HAdaptive;
        assert!(cfg.validate().is_err());
        cfg.mode = Mode::Fixed;
        cfg.validate().unwrap();
    }

    #[test]
    fn csv_formatting() {
        let r = HistoryRow {
            iter: 2,
            ncells: 12,
            ndofs: 21,
            pmin: 1,
            pmax: 1,
            error: Some(0.25),
            eta: None,
            eta_loc: Some(1.0),
            index: None,
            index_loc: Some(4.0),
            t_solve: 0.5,
            t_estimate: 0.25,
        };
        assert_eq!(
            csv_line(&r, false),
            "2,12,21,1,1,2.5000000000e-1,,1.0000000000e0,,4.0000000000e0,0.000000e0,0.000000e0"
        );
        assert_eq!(CSV_HEADER.split(',').count(), 12);
    }

    #[test]
    fn error_codes() {
        assert_eq!(VemError::Config("x".into()).exit_code(), 2);
        assert_eq!(VemError::Solver("x".into()).exit_code(), 3);
        assert_eq!(VemError::SingularPatch { vertex: 1 }.exit_code(), 3);
    }
}
