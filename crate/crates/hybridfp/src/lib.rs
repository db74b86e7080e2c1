//! Hybrid projection iteration for common fixed-point, variational-inequality
//! and equilibrium problems in finite-dimensional Hilbert and ℓ_p spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`space`] — norms, duality pairings, the normalized duality map `J` and
//!   its inverse, and the Lyapunov functional `φ`.
//! * [`sets`] — closed convex feasible sets (balls, boxes, half-space
//!   intersections) and the half-space ledger the outer iteration accumulates.
//! * [`problem`] — problem instances: monotone operators, bifunctions, map
//!   families, known solutions, and the built-in library.
//! * [`solvers`] — certificate-checked inner solvers: resolvents for the
//!   equilibrium and variational-inequality subproblems, and the sunny
//!   retraction onto ledger-constrained sets.
//! * [`iteration`] — the outer hybrid iteration, its trace records, and the
//!   trace invariant checker.
//! * [`reference`] — a direct Euclidean rendering of the same scheme, kept
//!   as an independent cross-check of the general engine.
//! * [`trace_io`] — CSV/JSON/summary/SVG serialization of traces.
//! * [`config`] — the JSON run-configuration schema and its validation.

pub mod config;
pub mod iteration;
pub mod par;
pub mod problem;
pub mod reference;
pub mod sets;
pub mod solvers;
pub mod space;
pub mod tol;
pub mod trace_io;
