//! Coordinate sampling laws.
//!
//! Draws use Vose's alias method, O(1) per draw. Alongside the law we keep
//! the row masses `π_j = Σ_{i ∈ I(j)} p_i` and the extrapolation weights
//! `θ_j = π_j / p_min` the solver needs.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// The generator used by every solver run. Seeding goes through SplitMix64,
/// so a `u64` seed gives the same stream on every platform.
pub type SolverRng = Xoshiro256PlusPlus;

pub fn rng_from_seed(seed: u64) -> SolverRng {
    SolverRng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AliasTable {
    cutoff: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    /// `p` must be positive and sum to one.
    pub fn new(p: &[f64]) -> Self {
        let n = p.len();
        let mut cutoff: Vec<f64> = p.iter().map(|&pi| pi * n as f64).collect();
        let mut alias: Vec<usize> = (0..n).collect();
        let mut small: Vec<usize> = Vec::new();
        let mut large: Vec<usize> = Vec::new();
        for (i, &c) in cutoff.iter().enumerate() {
            if c < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            alias[s] = l;
            cutoff[l] -= 1.0 - cutoff[s];
            if cutoff[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are 1 up to rounding.
        for i in small.into_iter().chain(large) {
            cutoff[i] = 1.0;
        }
        AliasTable { cutoff, alias }
    }

    pub fn len(&self) -> usize {
        self.cutoff.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cutoff.is_empty()
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.gen_range(0..self.cutoff.len());
        if rng.gen::<f64>() < self.cutoff[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingLaw {
    p: Vec<f64>,
    alias: AliasTable,
    p_min: f64,
    pi: Vec<f64>,
    theta: Vec<f64>,
}

impl SamplingLaw {
    /// Builds the law from positive weights over the columns of `a`.
    ///
    /// Weights that do not sum to one are normalized (with a warning). Every
    /// row of `a` must have at least one nonzero, since an empty row has no
    /// sampling mass.
    pub fn build(p: &[f64], a: &SparseMatrix) -> Result<Self> {
        Self::from_weights(p, a, true)
    }

    fn from_weights(p: &[f64], a: &SparseMatrix, warn: bool) -> Result<Self> {
        if p.len() != a.ncols() {
            return Err(Error::Dimension {
                what: "sampling weights",
                expected: a.ncols(),
                got: p.len(),
            });
        }
        if p.is_empty() {
            return Err(Error::InvalidParameter(
                "sampling law needs at least one coordinate".into(),
            ));
        }
        if let Some((i, &v)) = p.iter().enumerate().find(|(_, &v)| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sampling weight p[{i}] = {v} must be positive and finite"
            )));
        }
        let total: f64 = p.iter().sum();
        let p: Vec<f64> = if (total - 1.0).abs() > 1e-12 {
            if warn {
                log::warn!("sampling weights sum to {total}, normalizing");
            }
            p.iter().map(|v| v / total).collect()
        } else {
            p.to_vec()
        };
        let p_min = p.iter().copied().fold(f64::INFINITY, f64::min);

        let mut pi = Vec::with_capacity(a.nrows());
        let mut theta = Vec::with_capacity(a.nrows());
        for j in 0..a.nrows() {
            let (cols, _) = a.row(j);
            if cols.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "row {j} has no nonzeros; preprocess the matrix first"
                )));
            }
            pi.push(cols.iter().map(|&i| p[i]).sum());
            // Summing ratios keeps θ an exact integer under uniform weights.
            theta.push(cols.iter().map(|&i| p[i] / p_min).sum());
        }
        let alias = AliasTable::new(&p);
        Ok(SamplingLaw {
            p,
            alias,
            p_min,
            pi,
            theta,
        })
    }

    pub fn uniform(a: &SparseMatrix) -> Result<Self> {
        Self::from_weights(&vec![1.0; a.ncols()], a, false)
    }

    /// Probabilities proportional to column norms.
    pub fn column_norm(a: &SparseMatrix) -> Result<Self> {
        let w: Vec<f64> = a.col_sq_norms().iter().map(|v| v.sqrt()).collect();
        Self::from_weights(&w, a, false)
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.alias.sample(rng)
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn alias_table(&self) -> &AliasTable {
        &self.alias
    }

    pub fn is_uniform(&self) -> bool {
        self.p.iter().all(|&v| v == self.p_min)
    }
}
