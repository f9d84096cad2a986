//! Primal–dual coordinate descent with random extrapolation (PURE-CD).
//!
//! One iteration draws a column `i` with probability `p_i` and touches only
//! the rows `J(i)` where column `i` is nonzero:
//!
//! ```text
//! ȳ_j = prox_{σ_j h*_j}(y_j + σ_j (Ax)_j)                 j ∈ J(i)
//! x̄_i = prox_{τ_i g_i}(x_i − τ_i(∇_i f(x) + Σ_j A_ji ȳ_j))
//! x_i ← x̄_i
//! y_j ← ȳ_j + σ_j θ_j A_ji (x̄_i − x_i)                  j ∈ J(i)
//! ```
//!
//! `Ax` is cached and patched after every move of `x_i`, which keeps the cost
//! at `Θ(|J(i)|)` plus one partial derivative of `f`. `h*` is separable, so
//! restricting the dual prox to `J(i)` loses nothing.
//!
//! Ergodic averages of `x_k` and of the auxiliary dual sequence
//! `y̆` (which copies `ȳ_j` on touched rows and holds its value elsewhere) are
//! accumulated lazily: each coordinate remembers when it last changed and
//! the running sum is brought up to date only when it changes again.

use crate::error::{Error, Result};
use crate::metrics::DistanceWeights;
use crate::problems::{ProblemSpec, Reference};
use crate::sampling::{rng_from_seed, SamplingLaw, SolverRng};
use crate::sparse::SparseMatrix;
use crate::trace::{run_solver, IterativeSolver, RunConfig, RunOutput};

/// Diagonal primal (`τ`, length n) and dual (`σ`, length m) steps.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizes {
    pub tau: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Scaling factor of the heuristic policy; `NaN` for hand-set steps.
    pub gamma: f64,
}

impl StepSizes {
    pub fn new(tau: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        for (what, v) in [("tau", &tau), ("sigma", &sigma)] {
            if let Some(bad) = v.iter().find(|&&s| !(s > 0.0) || !s.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{what} entries must be positive and finite, found {bad}"
                )));
            }
        }
        Ok(StepSizes {
            tau,
            sigma,
            gamma: f64::NAN,
        })
    }

    /// Same scalar `σ` on every row and `τ_i` per column.
    pub fn with_scalar_sigma(tau: Vec<f64>, sigma: f64, m: usize) -> Result<Self> {
        Self::new(tau, vec![sigma; m])
    }
}

/// Diagonal step policy built from column norms:
/// `σ_j = 1 / (θ_j M)`, `τ_i = γ M / ‖A_i‖²` with `M = max_i ‖A_i‖`.
///
/// Under uniform sampling and `f = 0` these steps sit a factor `γ` inside
/// the admissibility bound.
pub fn heuristic_steps(a: &SparseMatrix, law: &SamplingLaw, gamma: f64) -> Result<StepSizes> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    if law.theta().len() != a.nrows() {
        return Err(Error::Dimension {
            what: "sampling law rows",
            expected: a.nrows(),
            got: law.theta().len(),
        });
    }
    if let Some(i) = a.col_sq_norms().iter().position(|&s| s == 0.0) {
        return Err(Error::InvalidParameter(format!(
            "column {i} is zero; preprocess the matrix first"
        )));
    }
    let max_norm = a
        .col_sq_norms()
        .iter()
        .fold(0.0f64, |m, &s| m.max(s))
        .sqrt();
    let sigma = law.theta().iter().map(|t| 1.0 / (t * max_norm)).collect();
    let tau = a
        .col_sq_norms()
        .iter()
        .map(|s| gamma * max_norm / s)
        .collect();
    Ok(StepSizes { tau, sigma, gamma })
}

/// Upper bound on `τ_i` for almost-sure convergence:
///
/// `(2p_i − p_min) / (β_i p_i + (p_i / p_min) Σ_j π_j σ_j A_ji²)`.
///
/// Infinite when the denominator vanishes.
pub fn admissibility_bound(spec: &ProblemSpec, law: &SamplingLaw, sigma: &[f64], i: usize) -> f64 {
    let p = law.p()[i];
    let p_min = law.p_min();
    let pi = law.pi();
    let (rows, vals) = spec.matrix().col(i);
    let coupling: f64 = rows
        .iter()
        .zip(vals)
        .map(|(&j, &v)| pi[j] * sigma[j] * v * v)
        .sum();
    let denom = spec.beta(i) * p + p / p_min * coupling;
    if denom == 0.0 {
        f64::INFINITY
    } else {
        (2.0 * p - p_min) / denom
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepCheck {
    pub admissible: bool,
    pub bounds: Vec<f64>,
    /// `τ_i / bound_i`; admissible iff every entry is below one.
    pub ratios: Vec<f64>,
    /// Coordinate with the largest ratio.
    pub tightest: usize,
}

impl StepCheck {
    pub fn tightest_ratio(&self) -> f64 {
        self.ratios.get(self.tightest).copied().unwrap_or(0.0)
    }
}

pub fn check_steps(spec: &ProblemSpec, law: &SamplingLaw, steps: &StepSizes) -> StepCheck {
    let bounds: Vec<f64> = (0..spec.n())
        .map(|i| admissibility_bound(spec, law, &steps.sigma, i))
        .collect();
    let ratios: Vec<f64> = steps.tau.iter().zip(&bounds).map(|(t, b)| t / b).collect();
    let tightest = ratios
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &r)| {
            if r > best.1 {
                (i, r)
            } else {
                best
            }
        })
        .0;
    let admissible = steps.tau.iter().zip(&bounds).all(|(t, b)| t < b);
    StepCheck {
        admissible,
        bounds,
        ratios,
        tightest,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    k: u64,
    x: Vec<f64>,
    y: Vec<f64>,
    /// Cached `A x`.
    a: Vec<f64>,
    /// Current value of the auxiliary dual sequence y̆.
    breve: Vec<f64>,
    /// Σ_{t ≤ last_x[i]} x_t[i].
    sum_x: Vec<f64>,
    last_x: Vec<u64>,
    sum_y: Vec<f64>,
    last_y: Vec<u64>,
    touched: u64,
    ybar: Vec<f64>,
}

impl SolverState {
    pub fn zeros(spec: &ProblemSpec) -> Self {
        Self::new(spec, vec![0.0; spec.n()], vec![0.0; spec.m()]).expect("dimensions match")
    }

    pub fn new(spec: &ProblemSpec, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let a = spec.matrix().matvec(&x)?;
        if y.len() != spec.m() {
            return Err(Error::Dimension {
                what: "initial dual point",
                expected: spec.m(),
                got: y.len(),
            });
        }
        let (n, m) = (spec.n(), spec.m());
        Ok(SolverState {
            k: 0,
            breve: y.clone(),
            x,
            y,
            a,
            sum_x: vec![0.0; n],
            last_x: vec![0; n],
            sum_y: vec![0.0; m],
            last_y: vec![0; m],
            touched: 0,
            ybar: Vec::with_capacity(spec.matrix().max_col_nnz()),
        })
    }

    pub fn iteration(&self) -> u64 {
        self.k
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// The maintained `A x`.
    pub fn ax(&self) -> &[f64] {
        &self.a
    }

    /// Current value of the auxiliary dual sequence y̆.
    pub fn breve_y(&self) -> &[f64] {
        &self.breve
    }

    pub fn touched(&self) -> u64 {
        self.touched
    }

    /// `(1/k) Σ_{t=1..k} x_t` and `(1/k) Σ_{t=1..k} y̆_t`, brought up to date
    /// without touching the accumulators. Before the first step this is the
    /// starting point.
    pub fn averages(&self) -> (Vec<f64>, Vec<f64>) {
        if self.k == 0 {
            return (self.x.clone(), self.breve.clone());
        }
        let k = self.k;
        let kf = k as f64;
        let xa = (0..self.x.len())
            .map(|i| (self.sum_x[i] + self.x[i] * (k - self.last_x[i]) as f64) / kf)
            .collect();
        let ya = (0..self.y.len())
            .map(|j| (self.sum_y[j] + self.breve[j] * (k - self.last_y[j]) as f64) / kf)
            .collect();
        (xa, ya)
    }
}

fn check_dims(
    spec: &ProblemSpec,
    law: &SamplingLaw,
    steps: &StepSizes,
    x_len: usize,
    y_len: usize,
) -> Result<()> {
    let (n, m) = (spec.n(), spec.m());
    for (what, expected, got) in [
        ("sampling law columns", n, law.p().len()),
        ("sampling law rows", m, law.theta().len()),
        ("tau", n, steps.tau.len()),
        ("sigma", m, steps.sigma.len()),
        ("state primal", n, x_len),
        ("state dual", m, y_len),
    ] {
        if expected != got {
            return Err(Error::Dimension {
                what,
                expected,
                got,
            });
        }
    }
    Ok(())
}

/// One PURE-CD iteration at cost `Θ(|J(i)|)`.
pub fn step(
    spec: &ProblemSpec,
    law: &SamplingLaw,
    steps: &StepSizes,
    state: &mut SolverState,
    rng: &mut SolverRng,
) -> Result<()> {
    check_dims(spec, law, steps, state.x.len(), state.y.len())?;
    step_unchecked(spec, law, steps, state, rng);
    Ok(())
}

#[inline]
fn step_unchecked(
    spec: &ProblemSpec,
    law: &SamplingLaw,
    steps: &StepSizes,
    st: &mut SolverState,
    rng: &mut SolverRng,
) {
    let i = law.draw(rng);
    let (rows, vals) = spec.matrix().col(i);
    let hstar = spec.hstar();
    let sigma = &steps.sigma;

    st.ybar.clear();
    let mut coupling = 0.0;
    for (&j, &v) in rows.iter().zip(vals) {
        let yb = hstar.prox_unchecked(j, sigma[j], st.y[j] + sigma[j] * st.a[j]);
        st.ybar.push(yb);
        coupling += v * yb;
    }

    let grad = spec.smooth().map_or(0.0, |f| f.partial(&st.x, i));
    let tau = steps.tau[i];
    let x_old = st.x[i];
    let x_new = spec
        .g()
        .prox_unchecked(i, tau, x_old - tau * (grad + coupling));
    let delta = x_new - x_old;

    // Iterate k+1 is being formed; sums are brought up to iterate k.
    let k = st.k;
    st.sum_x[i] += x_old * (k - st.last_x[i]) as f64;
    st.last_x[i] = k;
    st.x[i] = x_new;

    let theta = law.theta();
    for ((&j, &v), &yb) in rows.iter().zip(vals).zip(&st.ybar) {
        st.sum_y[j] += st.breve[j] * (k - st.last_y[j]) as f64;
        st.last_y[j] = k;
        st.breve[j] = yb;
        st.a[j] += delta * v;
        st.y[j] = yb + sigma[j] * theta[j] * delta * v;
    }
    st.k += 1;
    st.touched += rows.len() as u64;
}

/// Full-vector state for [`naive_step`], with eager averages.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    pub k: u64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub breve: Vec<f64>,
    pub sum_x: Vec<f64>,
    pub sum_y: Vec<f64>,
    pub touched: u64,
}

impl DenseState {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        DenseState {
            k: 0,
            sum_x: vec![0.0; x.len()],
            sum_y: vec![0.0; y.len()],
            breve: y.clone(),
            x,
            y,
            touched: 0,
        }
    }

    pub fn averages(&self) -> (Vec<f64>, Vec<f64>) {
        if self.k == 0 {
            return (self.x.clone(), self.breve.clone());
        }
        let kf = self.k as f64;
        (
            self.sum_x.iter().map(|s| s / kf).collect(),
            self.sum_y.iter().map(|s| s / kf).collect(),
        )
    }
}

/// The same transition as [`step`], computed literally from the full
/// vectors `ȳ_{k+1}` and `x̄_{k+1}` at cost `Θ(nnz + n + m)`. Test oracle.
pub fn naive_step(
    spec: &ProblemSpec,
    law: &SamplingLaw,
    steps: &StepSizes,
    state: &mut DenseState,
    rng: &mut SolverRng,
) -> Result<()> {
    check_dims(spec, law, steps, state.x.len(), state.y.len())?;
    let a = spec.matrix();
    let ax = a.matvec(&state.x)?;
    let ybar: Vec<f64> = (0..spec.m())
        .map(|j| {
            spec.hstar()
                .prox_unchecked(j, steps.sigma[j], state.y[j] + steps.sigma[j] * ax[j])
        })
        .collect();
    let aty = a.mat_t_vec(&ybar)?;
    let mut grad = vec![0.0; spec.n()];
    if let Some(f) = spec.smooth() {
        f.gradient(&state.x, &mut grad);
    }
    let xbar: Vec<f64> = (0..spec.n())
        .map(|i| {
            let t = steps.tau[i];
            spec.g()
                .prox_unchecked(i, t, state.x[i] - t * (grad[i] + aty[i]))
        })
        .collect();

    let i = law.draw(rng);
    let mut x_next = state.x.clone();
    x_next[i] = xbar[i];
    let diff: Vec<f64> = x_next.iter().zip(&state.x).map(|(u, v)| u - v).collect();
    let a_diff = a.matvec(&diff)?;
    let (rows, _) = a.col(i);
    for &j in rows {
        state.y[j] = ybar[j] + steps.sigma[j] * law.theta()[j] * a_diff[j];
        state.breve[j] = ybar[j];
    }
    state.x = x_next;
    for (s, v) in state.sum_x.iter_mut().zip(&state.x) {
        *s += v;
    }
    for (s, v) in state.sum_y.iter_mut().zip(&state.breve) {
        *s += v;
    }
    state.k += 1;
    state.touched += rows.len() as u64;
    Ok(())
}

/// PURE-CD bound to a problem, a sampling law and step sizes.
#[derive(Debug, Clone)]
pub struct PureCd<'a> {
    spec: &'a ProblemSpec,
    law: &'a SamplingLaw,
    steps: &'a StepSizes,
    state: SolverState,
}

impl<'a> PureCd<'a> {
    pub fn new(spec: &'a ProblemSpec, law: &'a SamplingLaw, steps: &'a StepSizes) -> Result<Self> {
        check_dims(spec, law, steps, spec.n(), spec.m())?;
        Ok(PureCd {
            spec,
            law,
            steps,
            state: SolverState::zeros(spec),
        })
    }

    pub fn with_start(mut self, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        self.state = SolverState::new(self.spec, x, y)?;
        Ok(self)
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    /// Runs under `config`, seeding a fresh generator from `config.seed`.
    ///
    /// Refuses inadmissible step sizes unless `config.allow_inadmissible`.
    pub fn run(&mut self, config: &RunConfig, reference: Option<&Reference>) -> Result<RunOutput> {
        let check = check_steps(self.spec, self.law, self.steps);
        if !check.admissible {
            let i = check.tightest;
            if config.allow_inadmissible {
                log::warn!(
                    "running with inadmissible steps (tau/bound = {:.3} at coordinate {i})",
                    check.tightest_ratio()
                );
            } else {
                return Err(Error::Inadmissible {
                    coord: i,
                    tau: self.steps.tau[i],
                    bound: check.bounds[i],
                });
            }
        }
        let mut rng = rng_from_seed(config.seed);
        let spec = self.spec;
        run_solver(self, spec, reference, config, &mut rng)
    }
}

impl IterativeSolver for PureCd<'_> {
    fn step(&mut self, rng: &mut SolverRng) {
        step_unchecked(self.spec, self.law, self.steps, &mut self.state, rng);
    }

    fn iteration(&self) -> u64 {
        self.state.k
    }

    fn touched(&self) -> u64 {
        self.state.touched
    }

    fn primal(&self) -> &[f64] {
        &self.state.x
    }

    fn dual(&self) -> &[f64] {
        &self.state.y
    }

    fn averages(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        Some(self.state.averages())
    }

    fn distance_weights(&self) -> DistanceWeights {
        let p_min = self.law.p_min();
        DistanceWeights {
            primal: self
                .steps
                .tau
                .iter()
                .zip(self.law.p())
                .map(|(t, p)| p_min / (2.0 * t * p))
                .collect(),
            dual: self
                .steps
                .sigma
                .iter()
                .zip(self.law.pi())
                .map(|(s, pi)| p_min / (2.0 * s * pi))
                .collect(),
        }
    }
}

/// Runs PURE-CD from the origin.
pub fn run(
    spec: &ProblemSpec,
    law: &SamplingLaw,
    steps: &StepSizes,
    config: &RunConfig,
    reference: Option<&Reference>,
) -> Result<RunOutput> {
    PureCd::new(spec, law, steps)?.run(config, reference)
}
