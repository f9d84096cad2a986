//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use purecd::metrics::{self, DistanceWeights};
use purecd::problems::{reference_solution, DiagonalQuadratic, Reference, ReferenceOptions};
use purecd::purecd::{
    admissibility_bound, heuristic_steps, naive_step, step, DenseState, SolverState, StepSizes,
};
use purecd::trace::IterativeSolver;
use purecd::{
    make_lasso, make_linconstrained, make_ridge, random_sparse, rng_from_seed, Budget,
    ProblemSpec, PureCd, RunConfig, SamplingLaw, SeparableFunction, SolverRng, SparseMatrix,
};
use rand::Rng;

const ORACLE_TOL: f64 = 1e-10;
const BOUND_TOL: f64 = 1e-12;
const AVERAGE_TOL: f64 = 1e-12;
const SUBOPT_TOL: f64 = 1e-6;
const R2_MIN: f64 = 0.9;
const RATIO_MAX: f64 = 20.0;
const SEED_DIST_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_b(rng: &mut SolverRng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// `λ = frac · ‖Aᵀb‖∞`, so the Lasso solution is nonzero.
fn relative_lambda(a: &SparseMatrix, b: &[f64], frac: f64) -> f64 {
    let atb = a.mat_t_vec(b).unwrap();
    frac * atb.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn lasso(seed: u64, m: usize, n: usize, density: f64, frac: f64) -> ProblemSpec {
    let mut rng = rng_from_seed(seed);
    let a = random_sparse(m, n, density, true, &mut rng).unwrap();
    let b = random_b(&mut rng, m);
    let lambda = relative_lambda(&a, &b, frac);
    make_lasso(a, b, lambda).unwrap()
}

fn ridge(seed: u64, m: usize, n: usize, density: f64) -> ProblemSpec {
    let mut rng = rng_from_seed(seed);
    let a = random_sparse(m, n, density, true, &mut rng).unwrap();
    let b = random_b(&mut rng, m);
    let lambda = rng.gen_range(0.05..1.0);
    make_ridge(a, b, lambda).unwrap()
}

fn tight_reference(spec: &ProblemSpec) -> Reference {
    let opts = ReferenceOptions {
        tol: 1e-13,
        max_iter: 2_000_000,
        ..Default::default()
    };
    reference_solution(spec, &opts).unwrap()
}

/// Small instances for criteria 1 and 4: Lasso, ridge, and a box-constrained
/// problem with a diagonal smooth term sampled non-uniformly.
fn small_instances() -> Vec<(ProblemSpec, SamplingLaw)> {
    (0..50u64)
        .map(|seed| {
            let mut rng = rng_from_seed(1000 + seed);
            let m = rng.gen_range(2..=12);
            let n = rng.gen_range(2..=12);
            let a = random_sparse(m, n, 0.3, true, &mut rng).unwrap();
            let b = random_b(&mut rng, m);
            let spec = match seed % 3 {
                0 => make_lasso(a.clone(), b, 0.1).unwrap(),
                1 => make_ridge(a.clone(), b, 0.3).unwrap(),
                _ => {
                    let diag = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
                    let lin = random_b(&mut rng, n);
                    let f = DiagonalQuadratic::new(diag, lin).unwrap();
                    ProblemSpec::new(
                        a.clone(),
                        SeparableFunction::box_indicator(-0.5, 0.5).unwrap(),
                        SeparableFunction::ls_conjugate(b).unwrap(),
                        Some(Arc::new(f)),
                    )
                    .unwrap()
                }
            };
            let law = if seed % 2 == 0 {
                SamplingLaw::uniform(&a).unwrap()
            } else {
                let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
                SamplingLaw::build(&p, &a).unwrap()
            };
            (spec, law)
        })
        .collect()
}

/// Runs the sparse and the full-vector iteration side by side and returns
/// the largest iterate and average deviations.
fn oracle_deviation(spec: &ProblemSpec, law: &SamplingLaw, seed: u64, iters: usize) -> (f64, f64) {
    let steps = heuristic_steps(spec.matrix(), law, 0.9).unwrap();
    let mut fast = SolverState::zeros(spec);
    let mut slow = DenseState::new(vec![0.0; spec.n()], vec![0.0; spec.m()]);
    let mut r1 = rng_from_seed(seed);
    let mut r2 = rng_from_seed(seed);
    let mut dev: f64 = 0.0;
    let mut avg_dev: f64 = 0.0;
    for _ in 0..iters {
        step(spec, law, &steps, &mut fast, &mut r1).unwrap();
        naive_step(spec, law, &steps, &mut slow, &mut r2).unwrap();
        for (u, v) in fast.x().iter().zip(&slow.x).chain(fast.y().iter().zip(&slow.y)) {
            dev = dev.max((u - v).abs());
        }
        let (xa, ya) = fast.averages();
        let (xd, yd) = slow.averages();
        for (u, v) in xa.iter().zip(&xd).chain(ya.iter().zip(&yd)) {
            avg_dev = avg_dev.max((u - v).abs());
        }
    }
    (dev, avg_dev)
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, (spec, law)) in small_instances().iter().enumerate() {
        worst = worst.max(oracle_deviation(spec, law, 7 + k as u64, 300).0);
    }
    outcome(
        worst <= ORACLE_TOL,
        format!("max |sparse - naive| over 50 instances x 300 iterations = {worst:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = rng_from_seed(2);
    let mut worst_a: f64 = 0.0;
    let mut worst_b: f64 = 0.0;
    for _ in 0..20 {
        // (a) fully dense, scalar sigma, f = 0
        let (m, n) = (rng.gen_range(1..10), rng.gen_range(1..10));
        let a = random_sparse(m, n, 1.0, false, &mut rng).unwrap();
        let law = SamplingLaw::uniform(&a).unwrap();
        let spec = make_lasso(a.clone(), vec![0.0; m], 1.0).unwrap();
        let sigma = rng.gen_range(0.1..3.0);
        let sig = vec![sigma; m];
        for i in 0..n {
            let expect = 1.0 / (n as f64 * sigma * a.col_sq_norm(i));
            let got = admissibility_bound(&spec, &law, &sig, i);
            worst_a = worst_a.max((got - expect).abs() / expect);
        }

        // (b) one nonzero per row, per-row sigma, diagonal smooth term
        let n = rng.gen_range(2..8);
        let m = rng.gen_range(n..20);
        let trip: Vec<(usize, usize, f64)> = (0..m)
            .map(|j| {
                let i = if j < n { j } else { rng.gen_range(0..n) };
                (j, i, rng.gen_range(0.5..2.0))
            })
            .collect();
        let a = SparseMatrix::from_triplets(m, n, trip).unwrap();
        let law = SamplingLaw::uniform(&a).unwrap();
        let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let f = DiagonalQuadratic::new(beta.clone(), vec![0.0; n]).unwrap();
        let spec = ProblemSpec::new(
            a.clone(),
            SeparableFunction::Zero,
            SeparableFunction::ls_conjugate(vec![0.0; m]).unwrap(),
            Some(Arc::new(f)),
        )
        .unwrap();
        let sig: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..3.0)).collect();
        for i in 0..n {
            let (rows, vals) = a.col(i);
            let s: f64 = rows.iter().zip(vals).map(|(&j, &v)| sig[j] * v * v).sum();
            let expect = 1.0 / (beta[i] + s);
            let got = admissibility_bound(&spec, &law, &sig, i);
            worst_b = worst_b.max((got - expect).abs() / expect);
        }
    }
    outcome(
        worst_a <= BOUND_TOL && worst_b <= BOUND_TOL,
        format!("relative error dense = {worst_a:.2e}, one-per-row = {worst_b:.2e}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = rng_from_seed(3);
    let mut mismatches = 0;
    let mut checked = 0;
    for _ in 0..50 {
        let m = rng.gen_range(1..60);
        let n = rng.gen_range(1..60);
        let density = rng.gen_range(0.01..0.8);
        let a = random_sparse(m, n, density, true, &mut rng).unwrap();
        let law = SamplingLaw::uniform(&a).unwrap();
        for (j, &t) in law.theta().iter().enumerate() {
            checked += 1;
            if t != a.row_support()[j] as f64 {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} of {checked} rows with theta != row nnz"),
    )
}

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    for (spec, law) in small_instances().iter() {
        worst = worst.max(oracle_deviation(spec, law, 11, 300).1);
    }
    outcome(
        worst <= AVERAGE_TOL,
        format!("max |lazy - dense| average deviation = {worst:.2e}"),
    )
}

fn mean_touched(spec: &ProblemSpec, iters: u64) -> f64 {
    let law = SamplingLaw::uniform(spec.matrix()).unwrap();
    let steps = heuristic_steps(spec.matrix(), &law, 0.9).unwrap();
    let mut solver = PureCd::new(spec, &law, &steps).unwrap();
    let mut rng = rng_from_seed(0x5eed);
    for _ in 0..iters {
        solver.step(&mut rng);
    }
    solver.touched() as f64 / iters as f64
}

fn criterion_5() -> Outcome {
    let (m, n) = (10_000, 1_000);
    let mut rng = rng_from_seed(5);
    let trip: Vec<(usize, usize, f64)> = (0..m)
        .map(|j| {
            let i = if j < n { j } else { rng.gen_range(0..n) };
            (j, i, rng.gen_range(-1.0..1.0))
        })
        .collect();
    let a = SparseMatrix::from_triplets(m, n, trip).unwrap();
    let counts: Vec<f64> = (0..n).map(|i| a.col_nnz(i) as f64).collect();
    let mu = m as f64 / n as f64;
    let var = counts.iter().map(|c| (c - mu) * (c - mu)).sum::<f64>() / n as f64;
    let iters = 100_000u64;
    let se = (var / iters as f64).sqrt();
    let spec = make_lasso(a, random_b(&mut rng, m), 0.1).unwrap();
    let sparse_mean = mean_touched(&spec, iters);
    let sparse_ok = (sparse_mean - mu).abs() <= 3.0 * se;

    let dense = random_sparse(200, 100, 1.0, false, &mut rng).unwrap();
    let spec = make_lasso(dense, random_b(&mut rng, 200), 0.1).unwrap();
    let dense_mean = mean_touched(&spec, 1000);
    let dense_ok = dense_mean == 200.0;
    outcome(
        sparse_ok && dense_ok,
        format!(
            "one-per-row mean {sparse_mean:.4} vs m/n = {mu} (3 sigma = {:.4}); dense mean {dense_mean}",
            3.0 * se
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut failures = Vec::new();
    let mut worst_iters = 0;
    let mut runs = 0;
    for k in 0..40u64 {
        let mut rng = rng_from_seed(600 + k);
        let m = rng.gen_range(5..=50);
        let n = rng.gen_range(5..=50);
        let spec = if k < 20 {
            lasso(600 + k, m, n, 0.3, 0.1)
        } else {
            ridge(600 + k, m, n, 0.3)
        };
        let reference = reference_solution(&spec, &ReferenceOptions::default()).unwrap();
        let law = SamplingLaw::uniform(spec.matrix()).unwrap();
        let steps = heuristic_steps(spec.matrix(), &law, 0.95).unwrap();
        for seed in 1..=5 {
            let cfg = RunConfig {
                budget: Budget::Iterations(1_000_000),
                checkpoint_every: 4 * spec.n() as u64,
                seed,
                target_suboptimality: Some(SUBOPT_TOL),
                ..Default::default()
            };
            let out = PureCd::new(&spec, &law, &steps)
                .unwrap()
                .run(&cfg, Some(&reference))
                .unwrap();
            runs += 1;
            let sub = out.trace.last().unwrap().suboptimality;
            if !(sub <= SUBOPT_TOL) {
                failures.push(format!("instance {k} seed {seed}: {sub:.2e}"));
            }
            worst_iters = worst_iters.max(out.iterations);
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} of {runs} runs reached suboptimality <= {SUBOPT_TOL:e}; slowest took {worst_iters} iterations{}",
            runs - failures.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!(" ({})", failures.join(", "))
            }
        ),
    )
}

/// Coefficient of determination of the least-squares line through `(t, v)`.
fn r_squared(t: &[f64], v: &[f64]) -> f64 {
    let n = t.len() as f64;
    let (mt, mv) = (t.iter().sum::<f64>() / n, v.iter().sum::<f64>() / n);
    let stt: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
    let stv: f64 = t.iter().zip(v).map(|(a, b)| (a - mt) * (b - mv)).sum();
    let svv: f64 = v.iter().map(|b| (b - mv) * (b - mv)).sum();
    let slope = stv / stt;
    let sse: f64 = t
        .iter()
        .zip(v)
        .map(|(a, b)| {
            let r = b - mv - slope * (a - mt);
            r * r
        })
        .sum();
    1.0 - sse / svv
}

fn criterion_7() -> Outcome {
    let mut fits = Vec::new();
    let mut ok = true;
    for k in 0..5u64 {
        let spec = lasso(700 + k, 30, 12, 0.4, 0.2);
        let reference = tight_reference(&spec);
        let law = SamplingLaw::uniform(spec.matrix()).unwrap();
        let steps = heuristic_steps(spec.matrix(), &law, 0.95).unwrap();
        let cfg = RunConfig {
            budget: Budget::Iterations(1_000_000),
            checkpoint_every: spec.n() as u64,
            averaging: false,
            seed: k,
            ..Default::default()
        };
        let mut solver = PureCd::new(&spec, &law, &steps).unwrap();
        let weights = solver.distance_weights();
        let mut rng = rng_from_seed(cfg.seed);
        let mut t = Vec::new();
        let mut v = Vec::new();
        let mut started = false;
        for it in 1..=1_000_000u64 {
            solver.step(&mut rng);
            if it % cfg.checkpoint_every != 0 {
                continue;
            }
            let d = weights
                .distance(solver.primal(), solver.dual(), &reference.x, &reference.y)
                .unwrap();
            started |= d <= 1e-2;
            if started {
                t.push(it as f64);
                v.push(d.ln());
            }
            if d <= 1e-8 {
                break;
            }
        }
        let reached = v.last().is_some_and(|&l| l <= (1e-8f64).ln());
        let r2 = if v.len() >= 3 { r_squared(&t, &v) } else { f64::NAN };
        ok &= reached && r2 >= R2_MIN;
        fits.push(if reached {
            format!("{r2:.3}")
        } else {
            "not reached".into()
        });
    }
    outcome(ok, format!("R^2 of log distance fits: [{}]", fits.join(", ")))
}

/// Records `K · metric(averages)` at `K = 2^7 .. 2^13`.
fn scaled_sequence<F>(spec: &ProblemSpec, steps: &StepSizes, law: &SamplingLaw, metric: F) -> Vec<f64>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let mut solver = PureCd::new(spec, law, steps).unwrap();
    let mut rng = rng_from_seed(8);
    let mut out = Vec::new();
    for e in 7..=13u32 {
        let k = 1u64 << e;
        while solver.iteration() < k {
            solver.step(&mut rng);
        }
        let (xa, ya) = solver.averages().unwrap();
        out.push(k as f64 * metric(&xa, &ya));
    }
    out
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let min = v.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn criterion_8() -> Outcome {
    let gap_sequence = |spec: &ProblemSpec| {
        let reference = tight_reference(spec);
        let law = SamplingLaw::uniform(spec.matrix()).unwrap();
        let steps = heuristic_steps(spec.matrix(), &law, 0.95).unwrap();
        scaled_sequence(spec, &steps, &law, |x, y| {
            metrics::restricted_gap(spec, x, y, &reference.x, &reference.y, 10.0)
        })
    };

    // piecewise linear g: K * gap levels off
    let mut worst_gap: f64 = 0.0;
    for k in 0..3u64 {
        let seq = gap_sequence(&lasso(800 + k, 20, 10, 0.4, 0.2));
        worst_gap = worst_gap.max(spread(&seq));
    }

    // strongly convex quadratic: the gap decays faster than 1/K, so only
    // the upper bound is checked
    let mut worst_growth: f64 = 0.0;
    for k in 0..3u64 {
        let seq = gap_sequence(&ridge(820 + k, 20, 10, 0.4));
        let max = seq.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        worst_growth = worst_growth.max(if seq[0] > 0.0 { max / seq[0] } else { f64::INFINITY });
    }

    // g = λ‖x‖₁ subject to Ax = b with b in the range of A
    let mut worst_feas: f64 = 0.0;
    for k in 0..3u64 {
        let mut rng = rng_from_seed(850 + k);
        let a = random_sparse(8, 20, 0.4, true, &mut rng).unwrap();
        let x0: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.matvec(&x0).unwrap();
        let spec = make_linconstrained(a, b, SeparableFunction::l1(0.1).unwrap()).unwrap();
        let law = SamplingLaw::uniform(spec.matrix()).unwrap();
        let steps = heuristic_steps(spec.matrix(), &law, 0.95).unwrap();
        let seq = scaled_sequence(&spec, &steps, &law, |x, _| {
            metrics::feasibility(&spec, x).unwrap()
        });
        worst_feas = worst_feas.max(spread(&seq));
    }
    outcome(
        worst_gap < RATIO_MAX && worst_growth < RATIO_MAX && worst_feas < RATIO_MAX,
        format!(
            "over K = 2^7..2^13: lasso max/min K*gap = {worst_gap:.2}, \
             ridge max K*gap / first = {worst_growth:.2}, \
             constrained max/min K*||Ax_av - b|| = {worst_feas:.2}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let spec = lasso(900, 40, 15, 0.4, 0.2);
    let reference = tight_reference(&spec);
    let law = SamplingLaw::uniform(spec.matrix()).unwrap();
    let steps = heuristic_steps(spec.matrix(), &law, 0.95).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let mut solver = PureCd::new(&spec, &law, &steps).unwrap();
        let weights: DistanceWeights = solver.distance_weights();
        let mut rng = rng_from_seed(seed);
        for _ in 0..200_000 {
            solver.step(&mut rng);
        }
        let d = weights
            .distance(solver.primal(), solver.dual(), &reference.x, &reference.y)
            .unwrap();
        worst = worst.max(d);
    }
    outcome(
        worst <= SEED_DIST_TOL,
        format!("largest weighted distance to the reference over 10 seeds = {worst:.2e}"),
    )
}

fn strip_wall_time(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| match l.rsplit_once(',') {
            Some((head, _)) => head.to_string(),
            None => l.to_string(),
        })
        .collect()
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_purecd");
    let data = dir.path().join("data.svm");
    let status = Command::new(bin)
        .args(["gen", "--n", "30", "--m", "60", "--density", "0.1", "--seed", "4"])
        .arg("--out")
        .arg(&data)
        .status()
        .unwrap();
    if !status.success() {
        return outcome(false, "gen failed".into());
    }
    let solve = |out: &Path, seed: &str| {
        Command::new(bin)
            .args(["solve", "--problem", "lasso", "--lambda", "0.05", "--solver", "purecd"])
            .args(["--gamma", "0.95", "--iters", "2e4", "--seed", seed])
            .arg("--data")
            .arg(&data)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap()
            .success()
    };
    let (p1, p2, p3) = (
        dir.path().join("a.csv"),
        dir.path().join("b.csv"),
        dir.path().join("c.csv"),
    );
    if !(solve(&p1, "3") && solve(&p2, "3") && solve(&p3, "4")) {
        return outcome(false, "solve failed".into());
    }
    let read = |p: &Path| strip_wall_time(&std::fs::read_to_string(p).unwrap());
    let (a, b, c) = (read(&p1), read(&p2), read(&p3));
    let same = a == b;
    let differs = a != c;
    outcome(
        same && differs && a.len() > 2,
        format!(
            "{} rows; repeated run identical: {same}; other seed differs: {differs}",
            a.len().saturating_sub(1)
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("oracle equivalence", criterion_1, Duration::from_secs(5)),
        ("step-size reductions", criterion_2, Duration::from_secs(1)),
        ("theta identity", criterion_3, Duration::from_secs(1)),
        ("lazy averaging", criterion_4, Duration::from_secs(5)),
        ("per-iteration cost", criterion_5, Duration::from_secs(30)),
        ("convergence to reference", criterion_6, Duration::from_secs(60)),
        ("linear convergence on PLQ", criterion_7, Duration::from_secs(60)),
        ("ergodic O(1/K)", criterion_8, Duration::from_secs(60)),
        ("seed robustness", criterion_9, Duration::from_secs(30)),
        ("determinism", criterion_10, Duration::from_secs(5)),
    ];
    let mut failed = 0;
    for (k, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let in_time = took <= *limit;
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} ({name}): {} [{:.2} s{}]",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail,
            took.as_secs_f64(),
            if in_time {
                String::new()
            } else {
                format!(", limit {} s", limit.as_secs())
            }
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
