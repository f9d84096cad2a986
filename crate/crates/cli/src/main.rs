use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use purecd::sparse::{random_sparse, write_libsvm};
use purecd::rng_from_seed;
use purecd_cli::{
    compute_reference, load_problem, parse_count, sampling_law, solve_to_files, step_report,
    CliError, ProblemKind, Result, SamplingKind, SolveConfig, SolverKind,
};
use rand::Rng;
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "purecd", version, about = "Primal-dual coordinate descent benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver configuration and write its trace.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Trace CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Also write a JSON summary here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run every solver × seed combination in parallel.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_values = ["purecd"])]
        solvers: Vec<SolverKind>,
        #[arg(long, value_delimiter = ',', default_values = ["0"])]
        seeds: Vec<u64>,
        /// Directory for `<hash>.csv` / `<hash>.json` and `index.csv`.
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Report whether the heuristic step sizes satisfy the convergence bound.
    CheckSteps {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "lasso")]
        problem: ProblemKind,
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        #[arg(long, default_value_t = 0.95)]
        gamma: f64,
        #[arg(long, value_enum, default_value = "uniform")]
        sampling: SamplingKind,
    },
    /// Write a random sparse instance in LIBSVM format.
    Gen {
        /// Columns (features).
        #[arg(long)]
        n: usize,
        /// Rows (samples).
        #[arg(long)]
        m: usize,
        #[arg(long)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Give every empty row and column one entry.
        #[arg(long)]
        cover: bool,
        /// Output path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Run options. Flags override values read from `--config`.
#[derive(Args)]
struct RunArgs {
    /// JSON file with any subset of the run options.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    problem: Option<ProblemKind>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    solver: Option<SolverKind>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_parser = parse_count)]
    iters: Option<u64>,
    #[arg(long)]
    epochs: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    checkpoint_every: Option<u64>,
    #[arg(long)]
    averaging: Option<bool>,
    #[arg(long, value_enum)]
    sampling: Option<SamplingKind>,
    #[arg(long)]
    allow_inadmissible: bool,
    #[arg(long)]
    gap_radius: Option<f64>,
    #[arg(long)]
    reference_tol: Option<f64>,
    #[arg(long, value_parser = parse_count)]
    reference_max_iter: Option<u64>,
    /// Stop once suboptimality falls to this level.
    #[arg(long)]
    target: Option<f64>,
}

impl RunArgs {
    fn resolve(&self) -> Result<SolveConfig> {
        let mut c = match &self.config {
            Some(p) => SolveConfig::from_json_file(p)?,
            None => SolveConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f.clone() { c.$f = v; })* };
        }
        set!(problem, lambda, solver, gamma, seed, checkpoint_every, averaging, sampling);
        set!(gap_radius, reference_tol);
        if self.data.is_some() {
            c.data = self.data.clone();
        }
        if self.iters.is_some() || self.epochs.is_some() {
            c.iters = self.iters;
            c.epochs = self.epochs;
        }
        if let Some(v) = self.reference_max_iter {
            c.reference_max_iter = v as usize;
        }
        if self.target.is_some() {
            c.target = self.target;
        }
        c.allow_inadmissible |= self.allow_inadmissible;
        c.budget()?;
        Ok(c)
    }
}

fn data_path(cfg: &SolveConfig) -> Result<&Path> {
    cfg.data
        .as_deref()
        .ok_or_else(|| CliError::Config("no --data given".into()))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.to_path_buf(),
        source,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { run, out, summary } => {
            let cfg = run.resolve()?;
            let spec = load_problem(data_path(&cfg)?, cfg.problem, cfg.lambda)?;
            let reference = compute_reference(&cfg, &spec)?;
            let s = solve_to_files(&cfg, &spec, &reference, &out, summary.as_deref())?;
            log::info!(
                "{} after {} iterations: objective {:.6e}",
                cfg.solver.name(),
                s.iterations,
                s.objective
            );
        }
        Command::Sweep {
            run,
            solvers,
            seeds,
            out_dir,
            jobs,
        } => {
            let base = run.resolve()?;
            let spec = load_problem(data_path(&base)?, base.problem, base.lambda)?;
            let reference = compute_reference(&base, &spec)?;
            fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
            let configs: Vec<SolveConfig> = solvers
                .iter()
                .flat_map(|&solver| {
                    let base = &base;
                    seeds.iter().map(move |&seed| SolveConfig {
                        solver,
                        seed,
                        ..base.clone()
                    })
                })
                .collect();
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .map_err(|e| CliError::Config(e.to_string()))?;
            let results: Vec<Result<String>> = pool.install(|| {
                configs
                    .par_iter()
                    .map(|cfg| {
                        let h = cfg.hash();
                        let trace = out_dir.join(format!("{h}.csv"));
                        let summary = out_dir.join(format!("{h}.json"));
                        solve_to_files(cfg, &spec, &reference, &trace, Some(&summary))?;
                        Ok(format!("{h},{},{}", cfg.solver.name(), cfg.seed))
                    })
                    .collect()
            });
            let index = out_dir.join("index.csv");
            let mut w = BufWriter::new(File::create(&index).map_err(io_err(&index))?);
            writeln!(w, "hash,solver,seed").map_err(io_err(&index))?;
            let mut first_err = None;
            for r in results {
                match r {
                    Ok(line) => writeln!(w, "{line}").map_err(io_err(&index))?,
                    Err(e) => {
                        log::error!("{e}");
                        first_err.get_or_insert(e);
                    }
                }
            }
            w.flush().map_err(io_err(&index))?;
            if let Some(e) = first_err {
                return Err(e);
            }
        }
        Command::CheckSteps {
            data,
            problem,
            lambda,
            gamma,
            sampling,
        } => {
            let spec = load_problem(&data, problem, lambda)?;
            let law = sampling_law(&spec, sampling)?;
            let c = step_report(&spec, &law, gamma)?;
            let i = c.tightest;
            println!(
                "{}",
                if c.admissible { "ADMISSIBLE" } else { "INADMISSIBLE" }
            );
            println!(
                "tightest coordinate {i}: tau/bound = {:.6} (bound {:.6e})",
                c.tightest_ratio(),
                c.bounds[i]
            );
        }
        Command::Gen {
            n,
            m,
            density,
            seed,
            cover,
            out,
        } => {
            let mut rng = rng_from_seed(seed);
            let a = random_sparse(m, n, density, cover, &mut rng)?;
            // labels from a sparse planted vector plus small noise
            let x0: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.gen::<f64>() < 0.1 {
                        rng.gen_range(-1.0..1.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            let mut b = a.matvec(&x0)?;
            for v in &mut b {
                *v += 0.01 * rng.gen_range(-1.0..1.0);
            }
            match out {
                Some(p) => {
                    let mut w = BufWriter::new(File::create(&p).map_err(io_err(&p))?);
                    write_libsvm(&a, &b, &mut w)?;
                    w.flush().map_err(io_err(&p))?;
                }
                None => write_libsvm(&a, &b, io::stdout().lock())?,
            }
            log::info!("{m} x {n} with {} nonzeros", a.nnz());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
