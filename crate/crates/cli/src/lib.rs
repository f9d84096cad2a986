//! Run configurations, problem loading and trace output for the `purecd`
//! binary.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use purecd::baselines::{baseline_steps, Baseline};
use purecd::problems::{reference_solution, Reference, ReferenceOptions};
use purecd::purecd::{check_steps, heuristic_steps, StepCheck};
use purecd::sparse::{parse_libsvm, preprocess};
use purecd::trace::{run_solver, Budget, RunConfig, RunOutput};
use purecd::{
    make_lasso, make_linconstrained, make_ridge, rng_from_seed, ProblemSpec, PureCd, SamplingLaw,
    SeparableFunction,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Solver(#[from] purecd::Error),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Lasso,
    Ridge,
    /// `λ‖x‖₁` subject to `Ax = b`.
    Linconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Purecd,
    VuCondat,
    TripdBc,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Purecd => "purecd",
            SolverKind::VuCondat => "vu-condat",
            SolverKind::TripdBc => "tripd-bc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingKind {
    Uniform,
    /// `p_i ∝ ‖A_i‖`.
    ColumnNorm,
}

/// One solver run. Also the schema of `--config` files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub data: Option<PathBuf>,
    pub problem: ProblemKind,
    pub lambda: f64,
    pub solver: SolverKind,
    pub gamma: f64,
    pub iters: Option<u64>,
    pub epochs: Option<f64>,
    pub seed: u64,
    /// Iterations between trace rows; 0 means once per `n` iterations.
    pub checkpoint_every: u64,
    pub averaging: bool,
    pub sampling: SamplingKind,
    pub allow_inadmissible: bool,
    pub gap_radius: f64,
    pub reference_tol: f64,
    pub reference_max_iter: usize,
    pub target: Option<f64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            data: None,
            problem: ProblemKind::Lasso,
            lambda: 0.1,
            solver: SolverKind::Purecd,
            gamma: 0.95,
            iters: None,
            epochs: None,
            seed: 0,
            checkpoint_every: 0,
            averaging: true,
            sampling: SamplingKind::Uniform,
            allow_inadmissible: false,
            gap_radius: 10.0,
            reference_tol: 1e-10,
            reference_max_iter: 1_000_000,
            target: None,
        }
    }
}

impl SolveConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let file = open(path)?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }

    pub fn budget(&self) -> Result<Budget> {
        match (self.iters, self.epochs) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "give either iters or epochs, not both".into(),
            )),
            (Some(k), None) => Ok(Budget::Iterations(k)),
            (None, Some(e)) => Ok(Budget::Epochs(e)),
            (None, None) => Ok(Budget::Iterations(100_000)),
        }
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        Ok(RunConfig {
            budget: self.budget()?,
            checkpoint_every: self.checkpoint_every,
            seed: self.seed,
            averaging: self.averaging,
            allow_inadmissible: self.allow_inadmissible,
            gap_radius: self.gap_radius,
            target_suboptimality: self.target,
        })
    }

    pub fn reference_options(&self) -> ReferenceOptions {
        ReferenceOptions {
            tol: self.reference_tol,
            max_iter: self.reference_max_iter,
            ..Default::default()
        }
    }

    /// Hex SHA-256 of the canonical JSON form, truncated to 16 characters.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))[..16].to_string()
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a LIBSVM file, drops empty rows and columns, normalizes rows and
/// assembles the problem with the labels as `b`.
pub fn load_problem(path: &Path, kind: ProblemKind, lambda: f64) -> Result<ProblemSpec> {
    let (a, labels) = parse_libsvm(BufReader::new(open(path)?))?;
    let pre = preprocess(&a, &labels)?;
    log::info!(
        "{}: {} x {} with {} nonzeros after preprocessing",
        path.display(),
        pre.matrix.nrows(),
        pre.matrix.ncols(),
        pre.matrix.nnz()
    );
    let spec = match kind {
        ProblemKind::Lasso => make_lasso(pre.matrix, pre.labels, lambda)?,
        ProblemKind::Ridge => make_ridge(pre.matrix, pre.labels, lambda)?,
        ProblemKind::Linconstrained => {
            make_linconstrained(pre.matrix, pre.labels, SeparableFunction::l1(lambda)?)?
        }
    };
    Ok(spec)
}

pub fn sampling_law(spec: &ProblemSpec, kind: SamplingKind) -> Result<SamplingLaw> {
    Ok(match kind {
        SamplingKind::Uniform => SamplingLaw::uniform(spec.matrix())?,
        SamplingKind::ColumnNorm => SamplingLaw::column_norm(spec.matrix())?,
    })
}

/// Heuristic steps for `gamma` and their admissibility report.
pub fn step_report(
    spec: &ProblemSpec,
    law: &SamplingLaw,
    gamma: f64,
) -> Result<StepCheck> {
    let steps = heuristic_steps(spec.matrix(), law, gamma)?;
    Ok(check_steps(spec, law, &steps))
}

/// Per-run record written next to the trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub hash: String,
    pub config: SolveConfig,
    pub n: usize,
    pub m: usize,
    pub nnz: usize,
    pub iterations: u64,
    pub epochs: f64,
    pub objective: f64,
    pub suboptimality: Option<f64>,
    pub gap: Option<f64>,
    pub reference_objective: f64,
    pub reference_kkt: f64,
    pub reference_converged: bool,
    pub tightest_ratio: Option<f64>,
    pub wall_ms: f64,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Runs the configured solver on `spec` against `reference`.
pub fn execute(
    cfg: &SolveConfig,
    spec: &ProblemSpec,
    reference: &Reference,
) -> Result<(RunOutput, Option<StepCheck>)> {
    let run_cfg = cfg.run_config()?;
    let law = sampling_law(spec, cfg.sampling)?;
    match cfg.solver {
        SolverKind::Purecd => {
            let steps = heuristic_steps(spec.matrix(), &law, cfg.gamma)?;
            let check = check_steps(spec, &law, &steps);
            let out = PureCd::new(spec, &law, &steps)?.run(&run_cfg, Some(reference))?;
            Ok((out, Some(check)))
        }
        SolverKind::VuCondat | SolverKind::TripdBc => {
            let (tau, sigma) = baseline_steps(spec);
            let mut solver = if cfg.solver == SolverKind::VuCondat {
                Baseline::vu_condat(spec, tau, sigma)?
            } else {
                Baseline::tripd_bc(spec, &law, tau, sigma)?
            };
            let mut rng = rng_from_seed(cfg.seed);
            let out = run_solver(&mut solver, spec, Some(reference), &run_cfg, &mut rng)?;
            Ok((out, None))
        }
    }
}

pub fn compute_reference(cfg: &SolveConfig, spec: &ProblemSpec) -> Result<Reference> {
    let start = Instant::now();
    let r = reference_solution(spec, &cfg.reference_options())?;
    if !r.converged {
        log::warn!(
            "reference stopped at KKT residual {:.3e} after {} iterations",
            r.kkt_residual,
            r.iterations
        );
    }
    log::info!(
        "reference objective {:.12e} in {:.0} ms",
        r.objective,
        start.elapsed().as_secs_f64() * 1e3
    );
    Ok(r)
}

/// Runs, writes the trace CSV to `trace_path` and returns the summary.
pub fn solve_to_files(
    cfg: &SolveConfig,
    spec: &ProblemSpec,
    reference: &Reference,
    trace_path: &Path,
    summary_path: Option<&Path>,
) -> Result<Summary> {
    let start = Instant::now();
    let (out, check) = execute(cfg, spec, reference)?;
    let mut w = BufWriter::new(create(trace_path)?);
    out.trace.write_csv(&mut w)?;
    w.flush().map_err(|source| CliError::File {
        path: trace_path.to_path_buf(),
        source,
    })?;
    let last = out.trace.last().expect("trace has an initial row");
    let summary = Summary {
        hash: cfg.hash(),
        config: cfg.clone(),
        n: spec.n(),
        m: spec.m(),
        nnz: spec.matrix().nnz(),
        iterations: out.iterations,
        epochs: last.epochs,
        objective: last.objective,
        suboptimality: finite(last.suboptimality),
        gap: finite(last.gap),
        reference_objective: reference.objective,
        reference_kkt: reference.kkt_residual,
        reference_converged: reference.converged,
        tightest_ratio: check.map(|c| c.tightest_ratio()),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    if let Some(path) = summary_path {
        let mut w = BufWriter::new(create(path)?);
        serde_json::to_writer_pretty(&mut w, &summary)?;
        writeln!(w).map_err(|source| CliError::File {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(summary)
}

/// Parses counts written either as integers or in float notation (`1e6`).
pub fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if f < 0.0 || f.fract() != 0.0 || f > u64::MAX as f64 {
        return Err(format!("not a nonnegative integer: {s}"));
    }
    Ok(f as u64)
}
