//! The outer hybrid projection iteration.
//!
//! Starting from the anchor `x₁ = x` in the feasible set, each step `n`:
//!
//! 1. solves the equilibrium subproblem at `x_n` (cycling through the
//!    bifunctions) for `z_n`, and the variational-inequality subproblem
//!    (cycling through the operators) for `u_n`;
//! 2. mixes `y_n = J*(α₁·Jx_n + α₂·Jz_n + α₃·T_n(u_n))` — note `T_n(u_n)`
//!    is already dual-valued, so no duality map is applied to it;
//! 3. appends the half-space `{z : 2⟨z, Jx_n − Jy_n⟩ ≤ ‖x_n‖² − ‖y_n‖²}` to
//!    the ledger (every point with `φ(z, y_n) ≤ φ(z, x_n)` satisfies it);
//! 4. retracts the *anchor* onto the base set intersected with the full
//!    ledger to obtain `x_{n+1}`.
//!
//! The run stops when the step norm drops to `stop_tol` or the iteration
//! budget is exhausted; inner-solver failures terminate the run with a
//! status instead of propagating. [`check_trace_invariants`] re-validates a
//! finished trace against the quantities the convergence argument controls:
//! nondecreasing anchor Lyapunov values, per-solution decrease through
//! `y_n`, ledger membership of iterates and known solutions, and decaying
//! step norms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{cyclic_operator_index, ProblemInstance};
use crate::sets::{halfspace_from_iterates, HalfSpace};
use crate::solvers::{
    eq_resolvent, probe_salt, sunny_retraction, vi_resolvent, CertificateKind, SolverError,
    SolverSettings, SubproblemContext,
};
use crate::space::{sub, DualPoint, Point};
use crate::tol;

/// Rule assigning the regularization parameter `r_n ≥ a` to each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RRule {
    Constant { value: f64 },
}

impl RRule {
    pub fn r(&self, _n: usize) -> f64 {
        match self {
            RRule::Constant { value } => *value,
        }
    }
}

/// Parameters of the outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmParams {
    /// Convex mixing weights (α₁, α₂, α₃), each in (0,1), summing to 1.
    pub alpha: [f64; 3],
    pub r_rule: RRule,
    /// Lower bound `a > 0` that every `r_n` must respect.
    pub a: f64,
    pub max_iters: usize,
    /// Stop when `‖x_{n+1} − x_n‖ ≤ stop_tol`.
    pub stop_tol: f64,
    /// The fixed anchor `x` of the scheme; also the first iterate. Must be
    /// feasible.
    pub anchor: Point,
}

impl AlgorithmParams {
    pub fn validate(&self, instance: &ProblemInstance) -> Result<(), IterationError> {
        let sum: f64 = self.alpha.iter().sum();
        if (sum - 1.0).abs() > tol::ALPHA_SUM {
            return Err(IterationError::InvalidParams(format!(
                "mixing weights must satisfy the simplex constraint α₁ + α₂ + α₃ = 1; got sum {sum}"
            )));
        }
        for (i, a) in self.alpha.iter().enumerate() {
            if !a.is_finite() || *a <= 0.0 || *a >= 1.0 {
                return Err(IterationError::InvalidParams(format!(
                    "mixing weight α{} must lie strictly inside (0, 1); got {a}",
                    i + 1
                )));
            }
        }
        if !self.a.is_finite() || self.a <= 0.0 {
            return Err(IterationError::InvalidParams(format!(
                "the lower bound a on r_n must be positive; got {}",
                self.a
            )));
        }
        for n in 1..=64 {
            let r = self.r_rule.r(n);
            if !r.is_finite() || r < self.a {
                return Err(IterationError::InvalidParams(format!(
                    "r_rule produced r_{n} = {r}, below the lower bound a = {}",
                    self.a
                )));
            }
        }
        if !self.stop_tol.is_finite() || self.stop_tol < 0.0 {
            return Err(IterationError::InvalidParams(format!(
                "stop_tol must be nonnegative; got {}",
                self.stop_tol
            )));
        }
        if self.anchor.dim() != instance.space.dim() {
            return Err(IterationError::InvalidParams(format!(
                "anchor has dimension {}, the space has {}",
                self.anchor.dim(),
                instance.space.dim()
            )));
        }
        if !instance.feasible.contains(&instance.space, &self.anchor, tol::MEMBERSHIP) {
            return Err(IterationError::InvalidParams(
                "the anchor must lie in the feasible set".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum IterationError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("half-space ledger cap of {0} entries reached; raise max_ledger or lower max_iters")]
    LedgerCapExceeded(usize),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    Converged,
    MaxIters,
    InnerSolveFailed,
    InfeasibleLedger,
}

/// Per-iteration diagnostics. Record `n` holds the iterate `x_n` together
/// with the subproblem outputs computed *at* `x_n` (`z_n`, `u_n`, `y_n`,
/// residuals, resolvent certificates) and the certificate of the retraction
/// that *produced* `x_n` (zero for the first record). The final record's
/// subproblem fields are filled as trailing diagnostics — its own step never
/// ran.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub n: usize,
    pub x: Point,
    pub y: Point,
    pub z: Point,
    pub u: Point,
    /// `φ(anchor, x_n)` — nondecreasing along a correct run.
    pub phi_anchor: f64,
    /// `‖x_n − x_{n−1}‖`; zero for the first record.
    pub step_norm: f64,
    /// `‖Ju_n − T_n(u_n)‖_*`.
    pub residual_fixed_point: f64,
    /// `‖x_n − y_n‖`.
    pub residual_xy: f64,
    pub cert_eq: f64,
    pub cert_vi: f64,
    pub cert_retraction: f64,
    /// `‖x_n − p‖` for the first known solution, when one exists.
    pub solution_distance: Option<f64>,
}

/// A full run: records, how it ended, and the last iterate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub terminal_status: TerminalStatus,
    pub final_point: Point,
    /// Human-readable failure context when the status is not
    /// `Converged`/`MaxIters`.
    pub failure: Option<String>,
    /// Completed outer steps (one less than the record count).
    pub iterations: usize,
}

/// Output of one outer step. The half-space it generated has already been
/// appended to the ledger passed in.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub z: Point,
    pub u: Point,
    pub y: Point,
    pub next_x: Point,
    pub cert_eq: f64,
    pub cert_vi: f64,
    pub cert_retraction: f64,
    pub residual_fixed_point: f64,
    pub residual_xy: f64,
}

struct SubproblemOutputs {
    z: Point,
    u: Point,
    y: Point,
    cert_eq: f64,
    cert_vi: f64,
    residual_fixed_point: f64,
    residual_xy: f64,
}

/// The resolvent-and-mix half of a step: everything computed at `x_n` before
/// the ledger grows. Shared by [`step`] and the trailing diagnostics.
fn subproblems_at(
    n: usize,
    x_n: &Point,
    instance: &ProblemInstance,
    params: &AlgorithmParams,
    settings: &SolverSettings,
) -> Result<SubproblemOutputs, IterationError> {
    let sp = &instance.space;
    let r = params.r_rule.r(n);

    let ctx = |salt: u64| SubproblemContext {
        space: sp,
        feasible: &instance.feasible,
        known_solutions: &instance.known_solutions,
        settings,
        salt,
    };

    // Degenerate families substitute the identity: an empty bifunction list
    // means z_n = x_n, an empty operator list means u_n = x_n.
    let (z, cert_eq) = if instance.bifunctions.is_empty() {
        (x_n.clone(), 0.0)
    } else {
        let l = cyclic_operator_index(n, instance.bifunctions.len()).expect("nonempty");
        let (z, cert) = eq_resolvent(
            &instance.bifunctions[l - 1],
            r,
            x_n,
            &ctx(probe_salt(CertificateKind::EqResolvent, n)),
        )?;
        (z, cert.worst_violation)
    };

    let (u, cert_vi) = if instance.operators.is_empty() {
        (x_n.clone(), 0.0)
    } else {
        let k = cyclic_operator_index(n, instance.operators.len()).expect("nonempty");
        let (u, cert) = vi_resolvent(
            &instance.operators[k - 1],
            r,
            x_n,
            &ctx(probe_salt(CertificateKind::ViResolvent, n)),
        )?;
        (u, cert.worst_violation)
    };

    let jx = sp.duality_map(x_n);
    let jz = sp.duality_map(&z);
    let tnu = instance.maps.member(n, &u);
    let [a1, a2, a3] = params.alpha;
    let jy = DualPoint(
        jx.coords()
            .iter()
            .zip(jz.coords().iter().zip(tnu.coords()))
            .map(|(jxi, (jzi, ti))| a1 * jxi + a2 * jzi + a3 * ti)
            .collect(),
    );
    let y = sp.inverse_duality_map(&jy);

    let ju = sp.duality_map(&u);
    let residual_fixed_point = sp.dual_norm(&DualPoint(sub(ju.coords(), tnu.coords())));
    let residual_xy = sp.distance(x_n, &y);

    Ok(SubproblemOutputs { z, u, y, cert_eq, cert_vi, residual_fixed_point, residual_xy })
}

/// Executes outer step `n` from `x_n`: subproblems, ledger extension, and
/// retraction of the anchor onto the enlarged region.
pub fn step(
    n: usize,
    x_n: &Point,
    ledger: &mut Vec<HalfSpace>,
    instance: &ProblemInstance,
    params: &AlgorithmParams,
    settings: &SolverSettings,
) -> Result<StepResult, IterationError> {
    let outs = subproblems_at(n, x_n, instance, params, settings)?;

    if let Some(cap) = settings.max_ledger {
        if ledger.len() >= cap {
            return Err(IterationError::LedgerCapExceeded(cap));
        }
    }
    ledger.push(halfspace_from_iterates(&instance.space, x_n, &outs.y, n));

    let ctx = SubproblemContext {
        space: &instance.space,
        feasible: &instance.feasible,
        known_solutions: &instance.known_solutions,
        settings,
        salt: probe_salt(CertificateKind::Retraction, n),
    };
    let (next_x, cert_r) = sunny_retraction(&params.anchor, ledger, &ctx)?;

    Ok(StepResult {
        z: outs.z,
        u: outs.u,
        y: outs.y,
        next_x,
        cert_eq: outs.cert_eq,
        cert_vi: outs.cert_vi,
        cert_retraction: cert_r.worst_violation,
        residual_fixed_point: outs.residual_fixed_point,
        residual_xy: outs.residual_xy,
    })
}

fn make_record(n: usize, x: Point, instance: &ProblemInstance, params: &AlgorithmParams) -> IterationRecord {
    let sp = &instance.space;
    let phi_anchor = sp.lyapunov(&params.anchor, &x).expect("dimensions validated");
    let solution_distance = instance.known_solutions.first().map(|p| sp.distance(&x, p));
    IterationRecord {
        n,
        y: x.clone(),
        z: x.clone(),
        u: x.clone(),
        x,
        phi_anchor,
        step_norm: 0.0,
        residual_fixed_point: 0.0,
        residual_xy: 0.0,
        cert_eq: 0.0,
        cert_vi: 0.0,
        cert_retraction: 0.0,
        solution_distance,
    }
}

/// Runs the iteration to termination. Parameter and instance validation
/// errors are returned as `Err`; solver failures during the run terminate it
/// with a status and message inside the trace instead.
pub fn run(
    instance: &ProblemInstance,
    params: &AlgorithmParams,
    settings: &SolverSettings,
) -> Result<IterationTrace, IterationError> {
    settings.validate().map_err(IterationError::Solver)?;
    instance
        .validate()
        .map_err(|e| IterationError::InvalidParams(e.to_string()))?;
    params.validate(instance)?;

    let mut records = vec![make_record(1, params.anchor.clone(), instance, params)];
    let mut ledger: Vec<HalfSpace> = Vec::new();
    let mut status = TerminalStatus::MaxIters;
    let mut failure = None;

    for n in 1..=params.max_iters {
        let x_n = records.last().expect("records never empty").x.clone();
        match step(n, &x_n, &mut ledger, instance, params, settings) {
            Ok(out) => {
                let step_norm = instance.space.distance(&out.next_x, &x_n);
                {
                    let rec = records.last_mut().expect("records never empty");
                    rec.z = out.z;
                    rec.u = out.u;
                    rec.y = out.y;
                    rec.cert_eq = out.cert_eq;
                    rec.cert_vi = out.cert_vi;
                    rec.residual_fixed_point = out.residual_fixed_point;
                    rec.residual_xy = out.residual_xy;
                }
                let mut next = make_record(n + 1, out.next_x, instance, params);
                next.step_norm = step_norm;
                next.cert_retraction = out.cert_retraction;
                records.push(next);
                if step_norm <= params.stop_tol {
                    status = TerminalStatus::Converged;
                    break;
                }
            }
            Err(err) => {
                status = match &err {
                    IterationError::Solver(SolverError::InfeasibleRegion(_)) => {
                        TerminalStatus::InfeasibleLedger
                    }
                    _ => TerminalStatus::InnerSolveFailed,
                };
                failure = Some(format!("step {n}: {err}"));
                log::warn!("run terminated at step {n}: {err}");
                break;
            }
        }
    }

    // The final record's own step never ran; fill its subproblem fields as
    // trailing diagnostics (best effort — the ledger is not extended).
    let last = records.len() - 1;
    let (n_last, x_last) = (records[last].n, records[last].x.clone());
    if let Ok(outs) = subproblems_at(n_last, &x_last, instance, params, settings) {
        let rec = &mut records[last];
        rec.z = outs.z;
        rec.u = outs.u;
        rec.y = outs.y;
        rec.cert_eq = outs.cert_eq;
        rec.cert_vi = outs.cert_vi;
        rec.residual_fixed_point = outs.residual_fixed_point;
        rec.residual_xy = outs.residual_xy;
    }

    let final_point = records.last().expect("records never empty").x.clone();
    let iterations = records.len() - 1;
    Ok(IterationTrace { records, terminal_status: status, final_point, failure, iterations })
}

/// One invariant of [`check_trace_invariants`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub name: String,
    /// Largest violation observed; at most the tolerance iff passed.
    pub worst_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl InvariantCheck {
    fn new(name: impl Into<String>, worst_violation: f64, tolerance: f64) -> Self {
        InvariantCheck { name: name.into(), worst_violation, tolerance, passed: worst_violation <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub checks: Vec<InvariantCheck>,
    pub passed: bool,
}

impl std::fmt::Display for InvariantReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {} (worst violation {:.3e}, tol {:.1e})",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.worst_violation,
                c.tolerance
            )?;
        }
        write!(f, "overall: {}", if self.passed { "pass" } else { "FAIL" })
    }
}

/// Re-validates a finished trace from its recorded points alone: half-spaces
/// are reconstructed from each completed step's `(x_n, y_n)` pair, so a
/// corrupted iterate or Lyapunov column is caught. A one-record trace passes
/// vacuously.
pub fn check_trace_invariants(trace: &IterationTrace, instance: &ProblemInstance) -> InvariantReport {
    let sp = &instance.space;
    let records = &trace.records;
    let anchor = &records[0].x;
    let steps = records.len() - 1;
    // Half-space of step k, reconstructed from record k's x and y.
    let halfspaces: Vec<HalfSpace> = (0..steps)
        .map(|i| halfspace_from_iterates(sp, &records[i].x, &records[i].y, i + 1))
        .collect();

    let mut checks = Vec::new();
    let slack_tol = tol::TRACE_SLACK;

    // (i) φ(anchor, x_n) nondecreasing, and the recorded column honest.
    let mut worst_mono = f64::NEG_INFINITY;
    let mut worst_recorded = f64::NEG_INFINITY;
    let mut prev_phi = None;
    for rec in records {
        let phi = sp.lyapunov(anchor, &rec.x).expect("trace dimensions are uniform");
        worst_recorded = worst_recorded.max((phi - rec.phi_anchor).abs());
        if let Some(p) = prev_phi {
            worst_mono = worst_mono.max(p - phi);
        }
        prev_phi = Some(phi);
    }
    checks.push(InvariantCheck::new(
        "anchor Lyapunov values are nondecreasing",
        finite_or_zero(worst_mono),
        slack_tol,
    ));
    checks.push(InvariantCheck::new(
        "recorded anchor Lyapunov values match recomputation",
        finite_or_zero(worst_recorded),
        slack_tol,
    ));

    // (ii) Known solutions decrease through y and satisfy the whole ledger.
    for (s, p) in instance.known_solutions.iter().enumerate() {
        let mut worst_dec = f64::NEG_INFINITY;
        for rec in records {
            let through_y = sp.lyapunov(p, &rec.y).expect("uniform dimensions");
            let at_x = sp.lyapunov(p, &rec.x).expect("uniform dimensions");
            worst_dec = worst_dec.max(through_y - at_x);
        }
        checks.push(InvariantCheck::new(
            format!("known solution {s} does not move away through y"),
            finite_or_zero(worst_dec),
            slack_tol,
        ));
        let worst_member = halfspaces
            .iter()
            .map(|h| -h.slack(sp, p))
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(InvariantCheck::new(
            format!("known solution {s} satisfies every ledger half-space"),
            finite_or_zero(worst_member),
            slack_tol,
        ));
    }

    // (iii) Each iterate satisfies the half-spaces accumulated before it.
    let mut worst_ledger = f64::NEG_INFINITY;
    for (i, rec) in records.iter().enumerate().skip(1) {
        for h in &halfspaces[..i] {
            worst_ledger = worst_ledger.max(-h.slack(sp, &rec.x));
        }
    }
    checks.push(InvariantCheck::new(
        "iterates satisfy the accumulated ledger",
        finite_or_zero(worst_ledger),
        slack_tol,
    ));

    // Recorded step norms are honest.
    let mut worst_step = f64::NEG_INFINITY;
    for i in 1..records.len() {
        let d = sp.distance(&records[i].x, &records[i - 1].x);
        worst_step = worst_step.max((d - records[i].step_norm).abs());
    }
    checks.push(InvariantCheck::new(
        "recorded step norms match recomputation",
        finite_or_zero(worst_step),
        slack_tol,
    ));

    // (iv) Cauchy trend: the largest step in the last quarter does not
    // exceed the largest step in the first quarter. Vacuous for short runs.
    let tail_check = if steps >= 16 {
        let q = steps / 4;
        let norms: Vec<f64> = records[1..].iter().map(|r| r.step_norm).collect();
        let head = norms[..q].iter().fold(0.0f64, |m, v| m.max(*v));
        let tail = norms[steps - q..].iter().fold(0.0f64, |m, v| m.max(*v));
        InvariantCheck::new("step norms trend downward", tail - head, slack_tol)
    } else {
        InvariantCheck::new("step norms trend downward", 0.0, slack_tol)
    };
    checks.push(tail_check);

    let passed = checks.iter().all(|c| c.passed);
    InvariantReport { checks, passed }
}

fn finite_or_zero(v: f64) -> f64 {
    if v == f64::NEG_INFINITY {
        0.0
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{example_problem, hilbert_affine_vi_problem, AlphaRule};
    use crate::sets::BaseSet;

    fn affine_identity_instance() -> ProblemInstance {
        hilbert_affine_vi_problem(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
            BaseSet::Ball { center: vec![0.0, 0.0], radius: 10.0 },
        )
        .unwrap()
    }

    fn params(anchor: Vec<f64>, max_iters: usize) -> AlgorithmParams {
        AlgorithmParams {
            alpha: [1.0 / 3.0; 3],
            r_rule: RRule::Constant { value: 1.0 },
            a: 1.0,
            max_iters,
            stop_tol: 1e-8,
            anchor: Point::new(anchor).unwrap(),
        }
    }

    #[test]
    fn first_step_hand_computed() {
        // A(x) = x, no bifunctions, identity map family, anchor (2,0) in
        // ball(0,10), r = 1, α = (1/3,1/3,1/3):
        //   z₁ = x₁ = (2,0) (degenerate), u₁ = (1,0),
        //   y₁ = (1/3)(2,0) + (1/3)(2,0) + (1/3)(1,0) = (5/3, 0),
        //   half-space normal (1/3, 0), offset 4 − 25/9 = 11/9,
        //   x₂ = midpoint of x₁ and y₁ on the cut: (11/6, 0).
        let inst = affine_identity_instance();
        let p = params(vec![2.0, 0.0], 5);
        let settings = SolverSettings { inner_tol: 1e-12, ..Default::default() };
        let mut ledger = Vec::new();
        let out = step(1, &p.anchor, &mut ledger, &inst, &p, &settings).unwrap();
        assert_eq!(out.z.coords(), &[2.0, 0.0]);
        assert!((out.u.coords()[0] - 1.0).abs() < 1e-10);
        assert!((out.y.coords()[0] - 5.0 / 3.0).abs() < 1e-10);
        assert!(out.y.coords()[1].abs() < 1e-12);
        assert_eq!(ledger.len(), 1);
        assert!((ledger[0].normal.coords()[0] - 1.0 / 3.0).abs() < 1e-10);
        assert!((ledger[0].offset - 11.0 / 9.0).abs() < 1e-9);
        assert!((out.next_x.coords()[0] - 11.0 / 6.0).abs() < 1e-8);
    }

    #[test]
    fn anchor_at_solution_converges_immediately() {
        let inst = example_problem(2.0, 4, AlphaRule::Harmonic).unwrap();
        let p = params(vec![0.0; 4], 50);
        let trace = run(&inst, &p, &SolverSettings::default()).unwrap();
        assert_eq!(trace.terminal_status, TerminalStatus::Converged);
        assert!(trace.iterations <= 2);
        assert!(inst.space.norm(&trace.final_point) <= 1e-10);
    }

    #[test]
    fn zero_budget_yields_single_record() {
        let inst = example_problem(2.0, 3, AlphaRule::Harmonic).unwrap();
        let mut p = params(vec![0.1, 0.0, 0.0], 0);
        p.stop_tol = 1e-8;
        let trace = run(&inst, &p, &SolverSettings::default()).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.terminal_status, TerminalStatus::MaxIters);
        assert_eq!(trace.iterations, 0);
        assert_eq!(trace.final_point.coords(), p.anchor.coords());
    }

    #[test]
    fn run_is_deterministic() {
        let inst = example_problem(2.0, 4, AlphaRule::Harmonic).unwrap();
        let p = params(vec![0.5, 0.0, 0.0, 0.0], 12);
        let settings = SolverSettings { rng_seed: 99, ..Default::default() };
        let t1 = run(&inst, &p, &settings).unwrap();
        let t2 = run(&inst, &p, &settings).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn trace_invariants_hold_on_a_real_run() {
        let inst = example_problem(2.0, 4, AlphaRule::Harmonic).unwrap();
        let p = params(vec![0.5, 0.0, 0.0, 0.0], 40);
        // The ledger-membership invariant is checked at 1e-8; the default
        // inner tolerance leaves the projections right at that edge, so run
        // the solves tighter than the checker looks.
        let settings = SolverSettings { inner_tol: 1e-11, ..Default::default() };
        let trace = run(&inst, &p, &settings).unwrap();
        assert!(trace.iterations > 3);
        let report = check_trace_invariants(&trace, &inst);
        assert!(report.passed, "unexpected invariant failures:\n{report}");
    }

    #[test]
    fn corrupted_iterate_fails_the_ledger_check() {
        let inst = example_problem(2.0, 4, AlphaRule::Harmonic).unwrap();
        let p = params(vec![0.5, 0.0, 0.0, 0.0], 10);
        let mut trace = run(&inst, &p, &SolverSettings::default()).unwrap();
        let last = trace.records.len() - 1;
        // Push the final iterate far outside every cut.
        trace.records[last].x = Point::new(vec![0.9, 0.1, 0.0, 0.0]).unwrap();
        let report = check_trace_invariants(&trace, &inst);
        assert!(!report.passed);
        assert!(report
            .checks
            .iter()
            .any(|c| c.name.contains("accumulated ledger") && !c.passed));
    }

    #[test]
    fn corrupted_phi_column_is_caught() {
        let inst = example_problem(2.0, 4, AlphaRule::Harmonic).unwrap();
        let p = params(vec![0.5, 0.0, 0.0, 0.0], 6);
        let mut trace = run(&inst, &p, &SolverSettings::default()).unwrap();
        trace.records[2].phi_anchor += 0.5;
        let report = check_trace_invariants(&trace, &inst);
        assert!(!report.passed);
        assert!(report
            .checks
            .iter()
            .any(|c| c.name.contains("match recomputation") && !c.passed));
    }

    #[test]
    fn single_record_trace_passes_vacuously() {
        let inst = example_problem(2.0, 3, AlphaRule::Harmonic).unwrap();
        let p = params(vec![0.2, 0.1, 0.0], 0);
        let trace = run(&inst, &p, &SolverSettings::default()).unwrap();
        let report = check_trace_invariants(&trace, &inst);
        assert!(report.passed);
    }

    #[test]
    fn rejects_weights_off_the_simplex() {
        let inst = example_problem(2.0, 3, AlphaRule::Harmonic).unwrap();
        let mut p = params(vec![0.0; 3], 5);
        p.alpha = [0.3, 0.3, 0.3];
        let err = run(&inst, &p, &SolverSettings::default()).unwrap_err();
        assert!(err.to_string().contains("simplex"), "message was: {err}");
    }

    #[test]
    fn rejects_infeasible_anchor_and_bad_r() {
        let inst = example_problem(2.0, 3, AlphaRule::Harmonic).unwrap();
        let mut p = params(vec![2.0, 0.0, 0.0], 5);
        assert!(run(&inst, &p, &SolverSettings::default()).is_err());
        p.anchor = Point::zeros(3);
        p.r_rule = RRule::Constant { value: 0.5 };
        p.a = 1.0;
        assert!(run(&inst, &p, &SolverSettings::default()).is_err());
    }

    #[test]
    fn ledger_cap_aborts_the_run() {
        let inst = example_problem(2.0, 4, AlphaRule::Harmonic).unwrap();
        let p = params(vec![0.5, 0.0, 0.0, 0.0], 30);
        let settings = SolverSettings { max_ledger: Some(3), ..Default::default() };
        let trace = run(&inst, &p, &settings).unwrap();
        assert_eq!(trace.terminal_status, TerminalStatus::InnerSolveFailed);
        assert_eq!(trace.iterations, 3);
        assert!(trace.failure.as_deref().unwrap().contains("ledger cap"));
    }
}
