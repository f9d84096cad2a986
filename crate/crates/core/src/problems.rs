//! Composite problems `min_x f(x) + g(x) + h(Ax)` and builders for the
//! usual regression setups.
//!
//! A problem is stored through `h*`, the form the solvers consume. `h` is
//! recovered as the conjugate for objective evaluation. Columns of `A` are
//! primal (feature) coordinates; rows are dual (sample) coordinates.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::baselines::{baseline_steps, vu_condat_step, BaselineState};
use crate::error::{Error, Result};
use crate::metrics;
use crate::prox::SeparableFunction;
use crate::sparse::SparseMatrix;

/// Smooth part `f` with coordinatewise Lipschitz gradients:
/// `f(x + t e_i) ≤ f(x) + t ∇_i f(x) + (β_i / 2) t²`.
pub trait SmoothTerm: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// `∇_i f(x)`.
    fn partial(&self, x: &[f64], i: usize) -> f64;

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.partial(x, i);
        }
    }

    /// Coordinatewise constant `β_i`.
    fn lipschitz(&self, i: usize) -> f64;

    /// `f_i(t)` when `f = Σ f_i(x_i)` is separable; `None` otherwise.
    fn separable_value(&self, _i: usize, _t: f64) -> Option<f64> {
        None
    }
}

/// `f(x) = Σ_i ½ d_i x_i² − c_i x_i`, with `β_i = d_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalQuadratic {
    diag: Vec<f64>,
    linear: Vec<f64>,
}

impl DiagonalQuadratic {
    pub fn new(diag: Vec<f64>, linear: Vec<f64>) -> Result<Self> {
        if diag.len() != linear.len() {
            return Err(Error::Dimension {
                what: "quadratic linear term",
                expected: diag.len(),
                got: linear.len(),
            });
        }
        if diag.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
            return Err(Error::InvalidParameter(
                "quadratic curvature must be finite and >= 0".into(),
            ));
        }
        Ok(DiagonalQuadratic { diag, linear })
    }
}

impl SmoothTerm for DiagonalQuadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        (0..self.diag.len())
            .map(|i| 0.5 * self.diag[i] * x[i] * x[i] - self.linear[i] * x[i])
            .sum()
    }

    fn partial(&self, x: &[f64], i: usize) -> f64 {
        self.diag[i] * x[i] - self.linear[i]
    }

    fn lipschitz(&self, i: usize) -> f64 {
        self.diag[i]
    }

    fn separable_value(&self, i: usize, t: f64) -> Option<f64> {
        Some(0.5 * self.diag[i] * t * t - self.linear[i] * t)
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    matrix: SparseMatrix,
    g: SeparableFunction,
    hstar: SeparableFunction,
    h: SeparableFunction,
    smooth: Option<Arc<dyn SmoothTerm>>,
}

impl ProblemSpec {
    /// Assembles a problem. `g` acts on the `n` columns, `hstar` on the `m`
    /// rows of `matrix`. Both are separable by construction.
    pub fn new(
        matrix: SparseMatrix,
        g: SeparableFunction,
        hstar: SeparableFunction,
        smooth: Option<Arc<dyn SmoothTerm>>,
    ) -> Result<Self> {
        if let Some(d) = g.dim() {
            if d != matrix.ncols() {
                return Err(Error::Dimension {
                    what: "g",
                    expected: matrix.ncols(),
                    got: d,
                });
            }
        }
        if let Some(d) = hstar.dim() {
            if d != matrix.nrows() {
                return Err(Error::Dimension {
                    what: "h*",
                    expected: matrix.nrows(),
                    got: d,
                });
            }
        }
        if let Some(f) = &smooth {
            if f.dim() != matrix.ncols() {
                return Err(Error::Dimension {
                    what: "smooth term",
                    expected: matrix.ncols(),
                    got: f.dim(),
                });
            }
            for i in 0..f.dim() {
                let b = f.lipschitz(i);
                if !(b >= 0.0) || !b.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "smooth term has beta[{i}] = {b}"
                    )));
                }
            }
        }
        let h = hstar.conjugate();
        Ok(ProblemSpec {
            matrix,
            g,
            hstar,
            h,
            smooth,
        })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn g(&self) -> &SeparableFunction {
        &self.g
    }

    pub fn hstar(&self) -> &SeparableFunction {
        &self.hstar
    }

    /// `h`, the conjugate of `h*`.
    pub fn h(&self) -> &SeparableFunction {
        &self.h
    }

    pub fn smooth(&self) -> Option<&dyn SmoothTerm> {
        self.smooth.as_deref()
    }

    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn m(&self) -> usize {
        self.matrix.nrows()
    }

    /// `β_i`, zero without a smooth term.
    pub fn beta(&self, i: usize) -> f64 {
        self.smooth.as_ref().map_or(0.0, |f| f.lipschitz(i))
    }

    pub fn beta_max(&self) -> f64 {
        (0..self.n()).map(|i| self.beta(i)).fold(0.0, f64::max)
    }

    /// `b` when `h` is the indicator of `{b}`, i.e. a linear constraint `Ax = b`.
    pub fn constraint_rhs(&self) -> Option<&[f64]> {
        match &self.hstar {
            SeparableFunction::LinearConjugate { b } => Some(b),
            _ => None,
        }
    }

    /// Samples the coordinatewise descent inequality of the smooth term at
    /// random points and directions. Trivially true without one.
    pub fn check_smooth<R: Rng>(&self, rng: &mut R, samples: usize, slack: f64) -> bool {
        let Some(f) = &self.smooth else {
            return true;
        };
        let n = self.n();
        (0..samples).all(|_| {
            let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let i = rng.gen_range(0..n);
            let t: f64 = rng.gen_range(-3.0..3.0);
            let base = f.value(&x);
            let bound = base + t * f.partial(&x, i) + 0.5 * f.lipschitz(i) * t * t;
            x[i] += t;
            f.value(&x) <= bound + slack * (1.0 + base.abs())
        })
    }
}

/// `λ‖x‖₁ + ½‖Ax − b‖²`.
pub fn make_lasso(a: SparseMatrix, b: Vec<f64>, lambda: f64) -> Result<ProblemSpec> {
    check_positive("lasso lambda", lambda)?;
    ProblemSpec::new(
        a,
        SeparableFunction::l1(lambda)?,
        SeparableFunction::ls_conjugate(b)?,
        None,
    )
}

/// `(λ/2)‖x‖² + ½‖Ax − b‖²`.
pub fn make_ridge(a: SparseMatrix, b: Vec<f64>, lambda: f64) -> Result<ProblemSpec> {
    check_positive("ridge lambda", lambda)?;
    ProblemSpec::new(
        a,
        SeparableFunction::sq_l2(lambda)?,
        SeparableFunction::ls_conjugate(b)?,
        None,
    )
}

/// `g(x)` subject to `Ax = b`.
pub fn make_linconstrained(
    a: SparseMatrix,
    b: Vec<f64>,
    g: SeparableFunction,
) -> Result<ProblemSpec> {
    ProblemSpec::new(a, g, SeparableFunction::linear_conjugate(b)?, None)
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{what} must be positive, got {v}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ReferenceOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// How often the KKT residual is evaluated.
    pub check_every: usize,
    pub warm_start: Option<(Vec<f64>, Vec<f64>)>,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            tol: 1e-10,
            max_iter: 1_000_000,
            check_every: 10,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reference {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// High-accuracy solution by the deterministic primal–dual iteration.
///
/// Runs until the KKT residual drops below `opts.tol` or `opts.max_iter`
/// iterations have been spent, and returns the iterate with the smallest
/// residual seen. `converged` tells the caller which case happened.
pub fn reference_solution(spec: &ProblemSpec, opts: &ReferenceOptions) -> Result<Reference> {
    let (tau, sigma) = baseline_steps(spec);
    let mut state = match &opts.warm_start {
        Some((x, y)) => BaselineState::new(spec, x.clone(), y.clone())?,
        None => BaselineState::zeros(spec),
    };
    let check_every = opts.check_every.max(1);
    let mut best_res = metrics::kkt_residual(spec, &state.x, &state.y);
    let mut best = (state.x.clone(), state.y.clone());
    let mut iterations = 0;
    while best_res >= opts.tol && iterations < opts.max_iter {
        for _ in 0..check_every.min(opts.max_iter - iterations) {
            vu_condat_step(spec, tau, sigma, &mut state);
            iterations += 1;
        }
        let res = metrics::kkt_residual(spec, &state.x, &state.y);
        if !res.is_finite() {
            break;
        }
        if res < best_res {
            best_res = res;
            best = (state.x.clone(), state.y.clone());
        }
    }
    let (x, y) = best;
    Ok(Reference {
        objective: metrics::objective(spec, &x),
        x,
        y,
        kkt_residual: best_res,
        iterations,
        converged: best_res < opts.tol,
    })
}
