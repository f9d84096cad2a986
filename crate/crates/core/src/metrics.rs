//! Convergence diagnostics: objective, restricted gap, feasibility, KKT
//! residual and distances to a reference point.

use crate::problems::ProblemSpec;
use crate::sparse::check_len;
use crate::error::Result;

/// `f(x) + g(x) + h(Ax)`, `+∞` when `x` leaves the domain.
pub fn objective(spec: &ProblemSpec, x: &[f64]) -> f64 {
    let a = spec.matrix();
    let mut ax = vec![0.0; a.nrows()];
    a.matvec_into(x, &mut ax);
    let f = spec.smooth().map_or(0.0, |f| f.value(x));
    f + spec.g().total(x) + spec.h().total(&ax)
}

/// `‖Ax − b‖` for linearly constrained problems, `None` otherwise.
pub fn feasibility(spec: &ProblemSpec, x: &[f64]) -> Option<f64> {
    let b = spec.constraint_rhs()?;
    let a = spec.matrix();
    let mut ax = vec![0.0; a.nrows()];
    a.matvec_into(x, &mut ax);
    Some(
        ax.iter()
            .zip(b)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt(),
    )
}

/// Restricted primal–dual gap over the box `C = (x_ref ± R) × (y_ref ± R)`:
///
/// `sup_{(x,y) ∈ C} f(x̄) + g(x̄) + ⟨Ax̄, y⟩ − h*(y) − f(x) − g(x) − ⟨Ax, ȳ⟩ + h*(ȳ)`.
///
/// The supremum splits into scalar problems because `g`, `h*` are separable
/// and the coupling is bilinear. With a smooth term it must be separable too
/// ([`SmoothTerm::separable_value`](crate::problems::SmoothTerm::separable_value));
/// otherwise the result is NaN.
pub fn restricted_gap(
    spec: &ProblemSpec,
    xbar: &[f64],
    ybar: &[f64],
    x_ref: &[f64],
    y_ref: &[f64],
    radius: f64,
) -> f64 {
    let a = spec.matrix();
    let g = spec.g();
    let hstar = spec.hstar();

    let f_bar = spec.smooth().map_or(0.0, |f| f.value(xbar));
    let fixed = f_bar + g.total(xbar) + hstar.total(ybar);
    if fixed == f64::INFINITY {
        return f64::INFINITY;
    }

    let mut ax = vec![0.0; a.nrows()];
    a.matvec_into(xbar, &mut ax);
    let mut aty = vec![0.0; a.ncols()];
    a.mat_t_vec_into(ybar, &mut aty);

    let mut sup_y = 0.0;
    for j in 0..a.nrows() {
        let (v, _) = hstar.sup_linear(j, ax[j], y_ref[j] - radius, y_ref[j] + radius);
        sup_y += v;
    }

    let mut sup_x = 0.0;
    for i in 0..a.ncols() {
        let (lo, hi) = (x_ref[i] - radius, x_ref[i] + radius);
        let v = match spec.smooth() {
            None => g.sup_linear(i, -aty[i], lo, hi).0,
            Some(f) => {
                if f.separable_value(i, 0.0).is_none() {
                    return f64::NAN;
                }
                let (dlo, dhi) = g.domain(i);
                let (lo, hi) = (lo.max(dlo), hi.min(dhi));
                if lo > hi {
                    f64::NEG_INFINITY
                } else {
                    let obj = |u: f64| {
                        -aty[i] * u - g.value(i, u) - f.separable_value(i, u).unwrap_or(f64::NAN)
                    };
                    golden_max(obj, lo, hi, 1e-10)
                }
            }
        };
        sup_x += v;
    }
    fixed + sup_y + sup_x
}

// Maximum of a concave function on [lo, hi].
fn golden_max<F: Fn(f64) -> f64>(obj: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let ends = obj(lo).max(obj(hi));
    let width = (hi - lo).abs().max(1.0);
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut fc, mut fd) = (obj(c), obj(d));
    while hi - lo > tol * width {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = obj(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = obj(d);
        }
    }
    ends.max(obj(0.5 * (lo + hi))).max(fc).max(fd)
}

/// Euclidean norm of the prox fixed-point residual with unit steps:
/// `(x − prox_g(x − ∇f(x) − Aᵀy), y − prox_{h*}(y + Ax))`.
pub fn kkt_residual(spec: &ProblemSpec, x: &[f64], y: &[f64]) -> f64 {
    let a = spec.matrix();
    let mut ax = vec![0.0; a.nrows()];
    a.matvec_into(x, &mut ax);
    let mut aty = vec![0.0; a.ncols()];
    a.mat_t_vec_into(y, &mut aty);
    if let Some(f) = spec.smooth() {
        let mut grad = vec![0.0; a.ncols()];
        f.gradient(x, &mut grad);
        aty.iter_mut().zip(&grad).for_each(|(u, g)| *u += g);
    }
    let mut acc = 0.0;
    for i in 0..a.ncols() {
        let r = x[i] - spec.g().prox_unchecked(i, 1.0, x[i] - aty[i]);
        acc += r * r;
    }
    for j in 0..a.nrows() {
        let r = y[j] - spec.hstar().prox_unchecked(j, 1.0, y[j] + ax[j]);
        acc += r * r;
    }
    acc.sqrt()
}

/// `sqrt(Σ w_k (x_k − r_k)²)`; unit weights when `weights` is `None`.
pub fn distance_to(x: &[f64], x_ref: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    check_len("reference point", x.len(), x_ref.len())?;
    if let Some(w) = weights {
        check_len("distance weights", x.len(), w.len())?;
    }
    let s: f64 = x
        .iter()
        .zip(x_ref)
        .enumerate()
        .map(|(k, (u, v))| weights.map_or(1.0, |w| w[k]) * (u - v) * (u - v))
        .sum();
    Ok(s.sqrt())
}

/// Per-coordinate weights of the primal–dual distance used for linear-rate
/// measurements: `p_min / (2 τ_i p_i)` on `x`, `p_min / (2 σ_j π_j)` on `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceWeights {
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
}

impl DistanceWeights {
    pub fn unit(n: usize, m: usize) -> Self {
        DistanceWeights {
            primal: vec![1.0; n],
            dual: vec![1.0; m],
        }
    }

    /// Joint weighted distance of `(x, y)` to `(x_ref, y_ref)`.
    pub fn distance(&self, x: &[f64], y: &[f64], x_ref: &[f64], y_ref: &[f64]) -> Result<f64> {
        let dx = distance_to(x, x_ref, Some(&self.primal))?;
        let dy = distance_to(y, y_ref, Some(&self.dual))?;
        Ok((dx * dx + dy * dy).sqrt())
    }
}
