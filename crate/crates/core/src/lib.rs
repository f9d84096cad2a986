//! Randomized primal–dual coordinate descent for
//! `min_x f(x) + g(x) + h(Ax)` with sparse `A` and separable `g`, `h`.

pub mod baselines;
pub mod error;
pub mod metrics;
pub mod problems;
pub mod prox;
pub mod purecd;
pub mod sampling;
pub mod sparse;
pub mod trace;

pub use baselines::{Baseline, BaselineKind};
pub use error::{Error, Result};
pub use problems::{make_lasso, make_linconstrained, make_ridge, ProblemSpec, Reference};
pub use prox::SeparableFunction;
pub use purecd::{check_steps, heuristic_steps, PureCd, StepSizes};
pub use sampling::{rng_from_seed, SamplingLaw, SolverRng};
pub use sparse::{random_sparse, SparseMatrix};
pub use trace::{Budget, RunConfig, RunOutput, Trace};
