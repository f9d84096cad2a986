//! Reference iterations: the deterministic primal–dual method (Vũ–Condat)
//! and its randomized block-coordinate variant TriPD-BC.
//!
//! Both use scalar steps and full-vector work per iteration.

use crate::error::{Error, Result};
use crate::problems::ProblemSpec;
use crate::metrics::DistanceWeights;
use crate::sampling::{SamplingLaw, SolverRng};
use crate::trace::IterativeSolver;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineState {
    /// Primal iterate (`x̄_k` for Vũ–Condat, `x_k` for TriPD-BC).
    pub x: Vec<f64>,
    /// Dual iterate (`ȳ_k` for Vũ–Condat, `y_k` for TriPD-BC).
    pub y: Vec<f64>,
    /// Last extrapolated dual `ŷ_k` (TriPD-BC only).
    pub yhat: Vec<f64>,
    pub k: u64,
    /// Cumulative dual coordinates written.
    pub touched: u64,
    scratch_m: Vec<f64>,
    scratch_n: Vec<f64>,
    scratch_m2: Vec<f64>,
}

impl BaselineState {
    pub fn zeros(spec: &ProblemSpec) -> Self {
        Self::new(spec, vec![0.0; spec.n()], vec![0.0; spec.m()]).expect("dimensions match")
    }

    pub fn new(spec: &ProblemSpec, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != spec.n() {
            return Err(Error::Dimension {
                what: "initial primal point",
                expected: spec.n(),
                got: x.len(),
            });
        }
        if y.len() != spec.m() {
            return Err(Error::Dimension {
                what: "initial dual point",
                expected: spec.m(),
                got: y.len(),
            });
        }
        let yhat = y.clone();
        Ok(BaselineState {
            x,
            y,
            yhat,
            k: 0,
            touched: 0,
            scratch_m: vec![0.0; spec.m()],
            scratch_n: vec![0.0; spec.n()],
            scratch_m2: vec![0.0; spec.m()],
        })
    }
}

/// Scalar steps `τ = σ = 0.9 / ‖A‖`, with `‖A‖` from 50 rounds of power
/// iteration. With a smooth term the primal step is shrunk to
/// `τ = 0.9 / (β̄/2 + σ‖A‖²)` using `β̄ = max_i β_i`.
pub fn baseline_steps(spec: &ProblemSpec) -> (f64, f64) {
    let norm = spec.matrix().spectral_norm(50, 1e-6);
    let beta = spec.beta_max();
    if norm == 0.0 {
        let tau = if beta > 0.0 { 0.9 * 2.0 / beta } else { 1.0 };
        return (tau, 1.0);
    }
    let sigma = 0.9 / norm;
    let tau = if beta > 0.0 {
        0.9 / (0.5 * beta + sigma * norm * norm)
    } else {
        0.9 / norm
    };
    (tau, sigma)
}

/// One Vũ–Condat iteration:
///
/// ```text
/// x̄⁺ = prox_{τg}(x̄ − τ(∇f(x̄) + Aᵀȳ))
/// ȳ⁺ = prox_{σh*}(ȳ + σA(2x̄⁺ − x̄))
/// ```
pub fn vu_condat_step(spec: &ProblemSpec, tau: f64, sigma: f64, state: &mut BaselineState) {
    let a = spec.matrix();
    let BaselineState {
        x,
        y,
        scratch_m,
        scratch_n,
        ..
    } = state;

    a.mat_t_vec_into(y, scratch_n);
    if let Some(f) = spec.smooth() {
        for (i, s) in scratch_n.iter_mut().enumerate() {
            *s += f.partial(x, i);
        }
    }
    // scratch_n <- 2x̄⁺ − x̄, x <- x̄⁺
    for i in 0..x.len() {
        let next = spec.g().prox_unchecked(i, tau, x[i] - tau * scratch_n[i]);
        scratch_n[i] = 2.0 * next - x[i];
        x[i] = next;
    }
    a.matvec_into(scratch_n, scratch_m);
    for j in 0..y.len() {
        y[j] = spec
            .hstar()
            .prox_unchecked(j, sigma, y[j] + sigma * scratch_m[j]);
    }
    state.k += 1;
    state.touched += spec.m() as u64;
}

/// One TriPD-BC iteration, computed densely:
///
/// ```text
/// ȳ  = prox_{σh*}(y + σAx)
/// x̄  = prox_{τg}(x − τ(∇f(x) + Aᵀȳ))
/// ŷ  = ȳ + σA(x̄ − x)
/// draw i;  x_i ← x̄_i;  y_j ← ŷ_j for j ∈ J(i)
/// ```
pub fn tripd_bc_step(
    spec: &ProblemSpec,
    law: &SamplingLaw,
    tau: f64,
    sigma: f64,
    state: &mut BaselineState,
    rng: &mut SolverRng,
) {
    let a = spec.matrix();
    let BaselineState {
        x,
        y,
        yhat,
        scratch_m,
        scratch_n,
        scratch_m2,
        ..
    } = state;

    // ȳ into yhat
    a.matvec_into(x, scratch_m);
    for j in 0..y.len() {
        yhat[j] = spec
            .hstar()
            .prox_unchecked(j, sigma, y[j] + sigma * scratch_m[j]);
    }
    // x̄ − x into scratch_n
    a.mat_t_vec_into(yhat, scratch_n);
    for i in 0..x.len() {
        let grad = spec.smooth().map_or(0.0, |f| f.partial(x, i));
        let xbar = spec
            .g()
            .prox_unchecked(i, tau, x[i] - tau * (grad + scratch_n[i]));
        scratch_n[i] = xbar - x[i];
    }
    a.matvec_into(scratch_n, scratch_m2);
    for j in 0..y.len() {
        yhat[j] += sigma * scratch_m2[j];
    }

    let i = law.draw(rng);
    x[i] += scratch_n[i];
    let (rows, _) = a.col(i);
    for &j in rows {
        y[j] = yhat[j];
    }
    state.k += 1;
    state.touched += rows.len() as u64;
}

/// Which baseline a [`Baseline`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    VuCondat,
    TriPdBc,
}

/// A baseline method bound to a problem, with eager ergodic averages.
#[derive(Debug, Clone)]
pub struct Baseline<'a> {
    kind: BaselineKind,
    spec: &'a ProblemSpec,
    law: Option<&'a SamplingLaw>,
    tau: f64,
    sigma: f64,
    state: BaselineState,
    sum_x: Vec<f64>,
    sum_y: Vec<f64>,
}

impl<'a> Baseline<'a> {
    pub fn vu_condat(spec: &'a ProblemSpec, tau: f64, sigma: f64) -> Result<Self> {
        Self::build(BaselineKind::VuCondat, spec, None, tau, sigma)
    }

    pub fn tripd_bc(
        spec: &'a ProblemSpec,
        law: &'a SamplingLaw,
        tau: f64,
        sigma: f64,
    ) -> Result<Self> {
        if law.p().len() != spec.n() {
            return Err(Error::Dimension {
                what: "sampling law columns",
                expected: spec.n(),
                got: law.p().len(),
            });
        }
        Self::build(BaselineKind::TriPdBc, spec, Some(law), tau, sigma)
    }

    fn build(
        kind: BaselineKind,
        spec: &'a ProblemSpec,
        law: Option<&'a SamplingLaw>,
        tau: f64,
        sigma: f64,
    ) -> Result<Self> {
        if !(tau > 0.0 && sigma > 0.0 && tau.is_finite() && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "baseline steps must be positive, got tau = {tau}, sigma = {sigma}"
            )));
        }
        Ok(Baseline {
            kind,
            spec,
            law,
            tau,
            sigma,
            state: BaselineState::zeros(spec),
            sum_x: vec![0.0; spec.n()],
            sum_y: vec![0.0; spec.m()],
        })
    }

    pub fn with_start(mut self, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        self.state = BaselineState::new(self.spec, x, y)?;
        Ok(self)
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn state(&self) -> &BaselineState {
        &self.state
    }
}

impl IterativeSolver for Baseline<'_> {
    fn step(&mut self, rng: &mut SolverRng) {
        match (self.kind, self.law) {
            (BaselineKind::TriPdBc, Some(law)) => {
                tripd_bc_step(self.spec, law, self.tau, self.sigma, &mut self.state, rng)
            }
            _ => vu_condat_step(self.spec, self.tau, self.sigma, &mut self.state),
        }
        for (s, v) in self.sum_x.iter_mut().zip(&self.state.x) {
            *s += v;
        }
        for (s, v) in self.sum_y.iter_mut().zip(&self.state.y) {
            *s += v;
        }
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
        if self.state.k == 0 {
            return Some((self.state.x.clone(), self.state.y.clone()));
        }
        let k = self.state.k as f64;
        Some((
            self.sum_x.iter().map(|s| s / k).collect(),
            self.sum_y.iter().map(|s| s / k).collect(),
        ))
    }

    fn distance_weights(&self) -> DistanceWeights {
        DistanceWeights {
            primal: vec![0.5 / self.tau; self.spec.n()],
            dual: vec![0.5 / self.sigma; self.spec.m()],
        }
    }
}
