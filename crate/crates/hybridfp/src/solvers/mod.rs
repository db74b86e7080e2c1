//! Certificate-checked inner solvers.
//!
//! Each outer iteration needs three subproblem solutions: the equilibrium
//! resolvent, the variational-inequality resolvent, and the sunny retraction
//! onto the base set intersected with the half-space ledger. All three come
//! with an a-posteriori [`Certificate`]: the defining variational inequality
//! of the subproblem, evaluated at a deterministic batch of feasible probe
//! points. The certificate — not the iterative scheme that produced the
//! point — is the acceptance authority.

mod certificates;
mod resolvents;
mod retraction;

pub use certificates::{certify, sample_probe_points};
pub use resolvents::{eq_resolvent, eq_resolvent_generic, vi_resolvent, vi_resolvent_generic};
pub use retraction::{retraction_lyapunov_descent, retraction_metric, sunny_retraction};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::Point;

/// Which subproblem a certificate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    EqResolvent,
    ViResolvent,
    Retraction,
}

/// Numerical witness that a computed point satisfies its defining
/// variational inequality on sampled feasible points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    /// Largest violation seen over the probe batch; negative or tiny
    /// positive values mean the inequality held everywhere.
    pub worst_violation: f64,
    pub samples_checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Tunables shared by all inner solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Displacement tolerance of the iterative paths.
    pub inner_tol: f64,
    pub max_inner_iters: usize,
    /// Random feasible probe points per certificate (known solutions and
    /// boundary probes are added on top).
    pub certificate_samples: usize,
    pub certificate_tol: f64,
    pub rng_seed: u64,
    /// Cap on the half-space ledger; a run aborts rather than dropping
    /// constraints when it is hit.
    pub max_ledger: Option<usize>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            inner_tol: 1e-8,
            max_inner_iters: 10_000,
            certificate_samples: 64,
            certificate_tol: 1e-6,
            rng_seed: 0,
            max_ledger: None,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), SolverError> {
        let pos = [
            ("inner_tol", self.inner_tol),
            ("certificate_tol", self.certificate_tol),
        ];
        for (name, v) in pos {
            if !v.is_finite() || v <= 0.0 {
                return Err(SolverError::InvalidSettings(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_inner_iters == 0 {
            return Err(SolverError::InvalidSettings("max_inner_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything a subproblem solve needs besides its own inputs.
#[derive(Debug, Clone, Copy)]
pub struct SubproblemContext<'a> {
    pub space: &'a crate::space::Space,
    pub feasible: &'a crate::sets::BaseSet,
    /// Known solutions of the enclosing problem; used as certificate probes.
    pub known_solutions: &'a [Point],
    pub settings: &'a SolverSettings,
    /// Probe-RNG decorrelation, from [`probe_salt`].
    pub salt: u64,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(
        "inner solve missed its certificate after {iterations} iterations \
         (worst violation {:.3e}, tolerance {:.1e})",
        certificate.worst_violation,
        certificate.tolerance
    )]
    NonconvergedInnerSolve {
        iterations: usize,
        best: Point,
        certificate: Certificate,
    },
    #[error("feasible region appears empty: {0}")]
    InfeasibleRegion(String),
    #[error("bifunction '{0}' has neither an operator form nor a closed-form resolvent")]
    MissingResolvent(String),
    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
}

/// Decorrelates the probe RNG across call sites: one stream per
/// (certificate kind, outer iteration).
pub fn probe_salt(kind: CertificateKind, n: usize) -> u64 {
    let k = match kind {
        CertificateKind::EqResolvent => 1u64,
        CertificateKind::ViResolvent => 2,
        CertificateKind::Retraction => 3,
    };
    (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ k
}
