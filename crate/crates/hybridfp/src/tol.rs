//! Central numeric tolerances.
//!
//! Every comparison tolerance used by the library and its test suites is
//! named here so that a tolerance change is a one-line diff and the test
//! code never embeds anonymous magic numbers.

/// Identities that hold exactly in real arithmetic and are only exposed to
/// rounding error (duality-map identities, norm round trips).
pub const IDENTITY_REL: f64 = 1e-10;

/// Slack allowed when checking inequalities that hold with zero margin in
/// exact arithmetic (Lyapunov bounds, backend equivalence).
pub const EXACT_SLACK: f64 = 1e-12;

/// Agreement between the Hilbert backend and the lp backend at p = 2.
pub const BACKEND_EQUIV: f64 = 1e-12;

/// Cross-checks between the primal and dual Lyapunov functionals.
pub const DUAL_LYAPUNOV: f64 = 1e-10;

/// Default membership slack for feasible sets.
pub const MEMBERSHIP: f64 = 1e-12;

/// Sampled structural checks on problem data (monotonicity, bifunction
/// conditions, map-family contraction properties).
pub const PROBLEM_SAMPLED: f64 = 1e-10;

/// Bifunction diagonal (`f(w, w) = 0`) on sampled points.
pub const BIFUNCTION_DIAGONAL: f64 = 1e-12;

/// Default certificate tolerance for inner solvers.
pub const CERTIFICATE: f64 = 1e-6;

/// Default iterative inner-solver stopping tolerance.
pub const INNER_ITERATIVE: f64 = 1e-8;

/// Slack used when validating a closed-form resolvent candidate
/// (feasibility margin below which the generic iterative path takes over).
pub const CLOSED_FORM_INTERIOR: f64 = 1e-10;

/// Slack for trace invariants (anchor-Lyapunov monotonicity, ledger
/// membership of iterates and known solutions).
pub const TRACE_SLACK: f64 = 1e-8;

/// Agreement demanded between independent solver paths for the same
/// quantity (closed form vs. iterative, metric projection vs. dual descent).
pub const PATH_AGREEMENT: f64 = 1e-6;

/// Simplex-sum validation on the three averaging coefficients.
pub const ALPHA_SUM: f64 = 1e-12;
