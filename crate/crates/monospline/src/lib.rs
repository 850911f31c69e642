//! Best L^p approximation of continuous monotone functions by *monotone*
//! C^l piecewise polynomials on a partition.
//!
//! The library is organised around one operator: given a continuous
//! nondecreasing target `f` on `[a, b]`, a partition of `[a, b]`, an order
//! `m` (polynomial degree bound per piece), a smoothness `l` (global C^l
//! continuity), and an exponent `p >= 1`, [`approx::project`] returns the
//! best L^p approximation to `f` from the convex cone of nondecreasing C^l
//! splines of order `m`, together with a monotonicity certificate and
//! first-order optimality diagnostics.
//!
//! Around that operator sit:
//!
//! * [`poly`] — monomial/Bernstein polynomial arithmetic, monotonicity
//!   certification, and two Markov-type inequality checks;
//! * [`partition`] — partition construction (uniform, Chebyshev, random),
//!   reflection, and refinement sequences;
//! * [`spline`] — piecewise-polynomial values/derivatives, smoothness
//!   defects, the shape-preserving Hermite interpolant used as a feasible
//!   competitor, and whole-spline certification;
//! * [`approx`] — the projection solver itself plus an independent
//!   subgradient oracle and equivariance checks;
//! * [`analysis`] — moduli of continuity, sup/L^p error measurement,
//!   convergence reports over partition sequences, and the classical
//!   `x^n` example showing L^p convergence without uniform convergence.
//!
//! Everything is deterministic: all randomness is drawn from explicitly
//! seeded ChaCha streams, so identical inputs give identical outputs (and
//! identical serialized artifacts) across runs and platforms.

// Negated comparisons like `!(a < b)` are deliberate in validation code:
// unlike `a >= b`, they are true when either side is NaN, so malformed
// inputs are rejected instead of silently accepted.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod approx;
pub mod partition;
pub mod poly;
pub mod quadrature;
pub mod spline;

mod qp;

pub use analysis::{
    builtin, builtin_functions, counterexample_xn, modulus_of_continuity, run_convergence,
    sup_distance, AnalysisError, ConvergenceReport, ConvergenceRow, CounterexampleRow,
};
pub use approx::{
    check_equivariance, lp_distance, oracle_project, project, project_nonincreasing,
    project_with_random_start, unconstrained_least_squares, ApproxConfig, ApproxError,
    EquivarianceReport, Monotonicity, ProjectionResult, TargetFunction,
};
pub use partition::{Partition, PartitionKind};
pub use poly::{MonotoneCertificate, Polynomial};
pub use spline::{MonotoneSpline, Spline};
