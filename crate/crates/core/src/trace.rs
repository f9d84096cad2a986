//! Run loop shared by all solvers, with checkpointed metric traces.

use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::metrics::{self, DistanceWeights};
use crate::problems::{ProblemSpec, Reference};
use crate::sampling::SolverRng;

/// Anything that advances one iteration at a time and exposes its iterate.
pub trait IterativeSolver {
    fn step(&mut self, rng: &mut SolverRng);
    fn iteration(&self) -> u64;
    /// Cumulative dual coordinates written.
    fn touched(&self) -> u64;
    fn primal(&self) -> &[f64];
    fn dual(&self) -> &[f64];
    /// Ergodic averages, when the solver maintains them.
    fn averages(&self) -> Option<(Vec<f64>, Vec<f64>)>;
    fn distance_weights(&self) -> DistanceWeights;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Iterations(u64),
    /// Passes over the data, counted as touched dual coordinates / nnz.
    Epochs(f64),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub budget: Budget,
    /// Iterations between trace rows. Zero means "one row per epoch".
    pub checkpoint_every: u64,
    pub seed: u64,
    pub averaging: bool,
    /// Run even when the step sizes fail the admissibility check.
    pub allow_inadmissible: bool,
    /// Half-width of the box the restricted gap is taken over.
    pub gap_radius: f64,
    /// Stop at the first checkpoint whose suboptimality is at or below this.
    pub target_suboptimality: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            budget: Budget::Iterations(1000),
            checkpoint_every: 0,
            seed: 0,
            averaging: true,
            allow_inadmissible: false,
            gap_radius: 10.0,
            target_suboptimality: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: u64,
    pub epochs: f64,
    pub objective: f64,
    pub suboptimality: f64,
    pub gap: f64,
    pub feasibility: f64,
    pub dist_plain: f64,
    pub dist_weighted: f64,
    pub touched: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str = "iteration,epochs,objective,suboptimality,gap,feasibility,dist_plain,dist_weighted,touched,wall_ms";

impl Trace {
    /// CSV with the fixed column order of [`TRACE_HEADER`], floats as `%.12e`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.iteration,
                fmt_sci(r.epochs),
                fmt_sci(r.objective),
                fmt_sci(r.suboptimality),
                fmt_sci(r.gap),
                fmt_sci(r.feasibility),
                fmt_sci(r.dist_plain),
                fmt_sci(r.dist_weighted),
                r.touched,
                fmt_sci(r.wall_ms),
            )?;
        }
        Ok(())
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }
}

/// C `printf("%.12e")` formatting.
pub fn fmt_sci(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:.12e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Ergodic averages; equal to the final iterate when averaging is off.
    pub x_av: Vec<f64>,
    pub y_av: Vec<f64>,
    pub iterations: u64,
    pub trace: Trace,
}

/// Drives `solver` until the budget runs out (or the target is met),
/// recording a trace row at iteration 0, at every checkpoint and at the end.
pub fn run_solver(
    solver: &mut dyn IterativeSolver,
    spec: &ProblemSpec,
    reference: Option<&Reference>,
    config: &RunConfig,
    rng: &mut SolverRng,
) -> Result<RunOutput> {
    let nnz = spec.matrix().nnz().max(1) as f64;
    let (max_iter, max_touched) = match config.budget {
        Budget::Iterations(k) if k > 0 => (k, u64::MAX),
        Budget::Epochs(e) if e > 0.0 && e.is_finite() => (u64::MAX, (e * nnz).ceil() as u64),
        _ => {
            return Err(Error::InvalidParameter(
                "iteration budget must be positive".into(),
            ))
        }
    };
    let every = if config.checkpoint_every > 0 {
        config.checkpoint_every
    } else {
        // n coordinate steps make one expected pass under uniform sampling
        spec.n().max(1) as u64
    };
    let weights = solver.distance_weights();
    let start = Instant::now();
    let mut trace = Trace::default();

    let record = |solver: &dyn IterativeSolver, trace: &mut Trace| -> bool {
        let row = checkpoint(solver, spec, reference, config, &weights, nnz, start);
        let hit = match (config.target_suboptimality, row.suboptimality) {
            (Some(t), s) => s <= t,
            _ => false,
        };
        trace.rows.push(row);
        hit
    };

    let mut done = record(&*solver, &mut trace);
    while !done && solver.iteration() < max_iter && solver.touched() < max_touched {
        solver.step(rng);
        let k = solver.iteration();
        let last = k >= max_iter || solver.touched() >= max_touched;
        if k.is_multiple_of(every) || last {
            done = record(&*solver, &mut trace);
        }
    }

    let (x, y) = (solver.primal().to_vec(), solver.dual().to_vec());
    let (x_av, y_av) = if config.averaging {
        solver.averages().unwrap_or_else(|| (x.clone(), y.clone()))
    } else {
        (x.clone(), y.clone())
    };
    Ok(RunOutput {
        x,
        y,
        x_av,
        y_av,
        iterations: solver.iteration(),
        trace,
    })
}

fn checkpoint(
    solver: &dyn IterativeSolver,
    spec: &ProblemSpec,
    reference: Option<&Reference>,
    config: &RunConfig,
    weights: &DistanceWeights,
    nnz: f64,
    start: Instant,
) -> TraceRow {
    let x = solver.primal();
    let y = solver.dual();
    let averages = if config.averaging && solver.iteration() > 0 {
        solver.averages()
    } else {
        None
    };
    let (xe, ye) = match &averages {
        Some((a, b)) => (a.as_slice(), b.as_slice()),
        None => (x, y),
    };
    let objective = metrics::objective(spec, x);
    let feasibility = metrics::feasibility(spec, xe).unwrap_or(f64::NAN);
    let (suboptimality, gap, dist_plain, dist_weighted) = match reference {
        Some(r) => (
            objective - r.objective,
            metrics::restricted_gap(spec, xe, ye, &r.x, &r.y, config.gap_radius),
            DistanceWeights::unit(x.len(), y.len())
                .distance(x, y, &r.x, &r.y)
                .unwrap_or(f64::NAN),
            weights.distance(x, y, &r.x, &r.y).unwrap_or(f64::NAN),
        ),
        None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
    };
    TraceRow {
        iteration: solver.iteration(),
        epochs: solver.touched() as f64 / nnz,
        objective,
        suboptimality,
        gap,
        feasibility,
        dist_plain,
        dist_weighted,
        touched: solver.touched(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}
