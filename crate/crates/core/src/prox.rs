//! Separable scalar functions: proximal maps, values, conjugates.
//!
//! Every function here acts coordinatewise, `φ(u) = Σ_k φ_k(u_k)`. Kinds that
//! carry a per-coordinate offset (`b`) store it as a vector; the others share
//! one parameter across coordinates.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum SeparableFunction {
    /// φ ≡ 0.
    Zero,
    /// λ|u|.
    L1 { lambda: f64 },
    /// (λ/2) u².
    SqL2 { lambda: f64 },
    /// ½u² + b u, the conjugate of ½(t − b)².
    LsConjugate { b: Vec<f64> },
    /// b u, the conjugate of the indicator of {b}.
    LinearConjugate { b: Vec<f64> },
    /// Indicator of [lo, hi].
    Box { lo: f64, hi: f64 },
    /// max(lo·u, hi·u), the conjugate of the [lo, hi] indicator.
    BoxSupport { lo: f64, hi: f64 },
    /// ½(u − b)².
    SqLoss { b: Vec<f64> },
    /// Indicator of {b}.
    PointIndicator { b: Vec<f64> },
}

impl SeparableFunction {
    pub fn l1(lambda: f64) -> Result<Self> {
        check_nonneg("l1 weight", lambda)?;
        Ok(Self::L1 { lambda })
    }

    pub fn sq_l2(lambda: f64) -> Result<Self> {
        check_nonneg("squared-l2 weight", lambda)?;
        Ok(Self::SqL2 { lambda })
    }

    pub fn ls_conjugate(b: Vec<f64>) -> Result<Self> {
        check_finite_vec("least-squares offset", &b)?;
        Ok(Self::LsConjugate { b })
    }

    pub fn linear_conjugate(b: Vec<f64>) -> Result<Self> {
        check_finite_vec("linear offset", &b)?;
        Ok(Self::LinearConjugate { b })
    }

    pub fn box_indicator(lo: f64, hi: f64) -> Result<Self> {
        check_interval(lo, hi)?;
        Ok(Self::Box { lo, hi })
    }

    pub fn box_support(lo: f64, hi: f64) -> Result<Self> {
        check_interval(lo, hi)?;
        Ok(Self::BoxSupport { lo, hi })
    }

    pub fn sq_loss(b: Vec<f64>) -> Result<Self> {
        check_finite_vec("squared-loss offset", &b)?;
        Ok(Self::SqLoss { b })
    }

    pub fn point_indicator(b: Vec<f64>) -> Result<Self> {
        check_finite_vec("point offset", &b)?;
        Ok(Self::PointIndicator { b })
    }

    /// Number of coordinates the function is pinned to, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::LsConjugate { b }
            | Self::LinearConjugate { b }
            | Self::SqLoss { b }
            | Self::PointIndicator { b } => Some(b.len()),
            _ => None,
        }
    }

    /// Per-coordinate offset vector for kinds that carry one.
    pub fn offset(&self) -> Option<&[f64]> {
        match self {
            Self::LsConjugate { b }
            | Self::LinearConjugate { b }
            | Self::SqLoss { b }
            | Self::PointIndicator { b } => Some(b),
            _ => None,
        }
    }

    /// `argmin_u φ_coord(u) + (u − v)² / (2γ)`.
    pub fn prox(&self, coord: usize, gamma: f64, v: f64) -> Result<f64> {
        if gamma.is_nan() || gamma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "prox step must be positive, got {gamma}"
            )));
        }
        if v.is_nan() {
            return Err(Error::Nan("prox"));
        }
        if let Some(d) = self.dim() {
            if coord >= d {
                return Err(Error::IndexOutOfRange {
                    what: "prox coordinate",
                    index: coord,
                    size: d,
                });
            }
        }
        Ok(self.prox_unchecked(coord, gamma, v))
    }

    /// [`prox`](Self::prox) without argument validation, for inner loops
    /// whose steps were checked up front.
    #[inline]
    pub fn prox_unchecked(&self, coord: usize, gamma: f64, v: f64) -> f64 {
        match self {
            Self::Zero => v,
            Self::L1 { lambda } => soft_threshold(v, gamma * lambda),
            Self::SqL2 { lambda } => v / (1.0 + gamma * lambda),
            Self::LsConjugate { b } => (v - gamma * b[coord]) / (1.0 + gamma),
            Self::LinearConjugate { b } => v - gamma * b[coord],
            Self::Box { lo, hi } => v.clamp(*lo, *hi),
            Self::BoxSupport { lo, hi } => v - v.clamp(gamma * lo, gamma * hi),
            Self::SqLoss { b } => (v + gamma * b[coord]) / (1.0 + gamma),
            Self::PointIndicator { b } => b[coord],
        }
    }

    /// `φ_coord(u)`, `+∞` outside the domain.
    pub fn value(&self, coord: usize, u: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::L1 { lambda } => lambda * u.abs(),
            Self::SqL2 { lambda } => 0.5 * lambda * u * u,
            Self::LsConjugate { b } => 0.5 * u * u + b[coord] * u,
            Self::LinearConjugate { b } => b[coord] * u,
            Self::Box { lo, hi } => {
                if (*lo..=*hi).contains(&u) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Self::BoxSupport { lo, hi } => (lo * u).max(hi * u),
            Self::SqLoss { b } => 0.5 * (u - b[coord]) * (u - b[coord]),
            Self::PointIndicator { b } => {
                if u == b[coord] {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Σ_k φ_k(u_k).
    pub fn total(&self, u: &[f64]) -> f64 {
        u.iter().enumerate().map(|(k, &v)| self.value(k, v)).sum()
    }

    /// Closed interval containing the effective domain of `φ_coord`.
    pub fn domain(&self, coord: usize) -> (f64, f64) {
        match self {
            Self::Box { lo, hi } => (*lo, *hi),
            Self::PointIndicator { b } => (b[coord], b[coord]),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Fenchel conjugate, as another separable function.
    pub fn conjugate(&self) -> Self {
        match self {
            Self::Zero => Self::Box { lo: 0.0, hi: 0.0 },
            Self::L1 { lambda } => Self::Box {
                lo: -lambda,
                hi: *lambda,
            },
            Self::SqL2 { lambda } if *lambda > 0.0 => Self::SqL2 {
                lambda: 1.0 / lambda,
            },
            Self::SqL2 { .. } => Self::Box { lo: 0.0, hi: 0.0 },
            Self::LsConjugate { b } => Self::SqLoss { b: b.clone() },
            Self::LinearConjugate { b } => Self::PointIndicator { b: b.clone() },
            Self::Box { lo, hi } => Self::BoxSupport { lo: *lo, hi: *hi },
            Self::BoxSupport { lo, hi } => Self::Box { lo: *lo, hi: *hi },
            Self::SqLoss { b } => Self::LsConjugate { b: b.clone() },
            Self::PointIndicator { b } => Self::LinearConjugate { b: b.clone() },
        }
    }

    /// `sup_{u ∈ [lo, hi]} s·u − φ_coord(u)` and a maximizer.
    ///
    /// The objective is concave, so clamping an unconstrained maximizer into
    /// the interval is optimal. Returns `-∞` when the interval misses the
    /// domain.
    pub fn sup_linear(&self, coord: usize, s: f64, lo: f64, hi: f64) -> (f64, f64) {
        // `toward` picks the end of the interval the linear part pushes to.
        let toward = |slope: f64, rest: f64| {
            if slope > 0.0 {
                f64::INFINITY
            } else if slope < 0.0 {
                f64::NEG_INFINITY
            } else {
                rest
            }
        };
        let free = match self {
            Self::Zero => toward(s, 0.0),
            Self::L1 { lambda } => {
                if s.abs() <= *lambda {
                    0.0
                } else {
                    toward(s, 0.0)
                }
            }
            Self::SqL2 { lambda } if *lambda > 0.0 => s / lambda,
            Self::SqL2 { .. } => toward(s, 0.0),
            Self::LsConjugate { b } => s - b[coord],
            Self::LinearConjugate { b } => toward(s - b[coord], 0.0),
            Self::Box { lo: a, hi: c } => {
                let (a, c) = (a.max(lo), c.min(hi));
                if a > c {
                    return (f64::NEG_INFINITY, a);
                }
                if s >= 0.0 {
                    c
                } else {
                    a
                }
            }
            Self::BoxSupport { lo: a, hi: c } => {
                if s > *c {
                    f64::INFINITY
                } else if s < *a {
                    f64::NEG_INFINITY
                } else {
                    0.0
                }
            }
            Self::SqLoss { b } => s + b[coord],
            Self::PointIndicator { b } => b[coord],
        };
        let u = free.clamp(lo, hi);
        let phi = self.value(coord, u);
        if phi == f64::INFINITY {
            return (f64::NEG_INFINITY, u);
        }
        (s * u - phi, u)
    }
}

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Samples the Fenchel–Young inequality `h(t) + h*(y) ≥ t·y` for a pair of
/// functions claimed to be conjugate, at coordinate `coord`.
///
/// Each sample `(t, y)` is checked for the inequality. It is also turned into
/// a subgradient pair through the Moreau decomposition (`t' = prox_h(t + y)`,
/// `y' = t + y − t'`, so `y' ∈ ∂h(t')`), where equality must hold.
pub fn conjugate_pair_check(
    primal: &SeparableFunction,
    dual: &SeparableFunction,
    coord: usize,
    samples: &[(f64, f64)],
    tol: f64,
) -> bool {
    samples.iter().all(|&(t, y)| {
        let lhs = primal.value(coord, t) + dual.value(coord, y);
        if lhs < t * y - tol * (1.0 + (t * y).abs()) {
            return false;
        }
        let v = t + y;
        let tp = primal.prox_unchecked(coord, 1.0, v);
        let (dlo, dhi) = dual.domain(coord);
        let yp = (v - tp).clamp(dlo, dhi);
        let lhs = primal.value(coord, tp) + dual.value(coord, yp);
        let rhs = tp * yp;
        (lhs - rhs).abs() <= tol * (1.0 + rhs.abs())
    })
}

fn check_nonneg(what: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{what} must be finite and >= 0, got {v}"
        )));
    }
    Ok(())
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::InvalidParameter(format!(
            "empty interval [{lo}, {hi}]"
        )));
    }
    Ok(())
}

fn check_finite_vec(what: &str, b: &[f64]) -> Result<()> {
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what} must be finite")));
    }
    Ok(())
}
