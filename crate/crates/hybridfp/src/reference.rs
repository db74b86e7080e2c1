//! Direct Euclidean rendering of the outer scheme, used to cross-check the
//! general engine.
//!
//! In a Hilbert space the duality map is the identity, the Lyapunov
//! functional is the squared distance, and the sunny retraction is the
//! metric projection. Spelling the iteration out under those reductions —
//! primal mixing `y = α₁x + α₂z + α₃T_n(u)`, cutting plane
//! `2⟨z, x − y⟩ ≤ ‖x‖² − ‖y‖²`, projection of the anchor — gives a second,
//! independent implementation of the outer loop. Running both on the same
//! instance (the general engine on an exponent-2 space, this one on the
//! matching Euclidean space) must produce the same trace down to rounding;
//! the comparison pins down that the general engine's duality-map plumbing
//! is inert exactly when it should be.
//!
//! The subproblem solvers and the certified retraction are shared with the
//! general engine — the point of the cross-check is the outer algebra, and
//! both renderings must sit on the same inner arithmetic for a
//! coordinatewise comparison to be meaningful.

use crate::iteration::{
    AlgorithmParams, IterationError, IterationRecord, IterationTrace, TerminalStatus,
};
use crate::problem::{cyclic_operator_index, ProblemInstance};
use crate::sets::HalfSpace;
use crate::solvers::{
    eq_resolvent, probe_salt, sunny_retraction, vi_resolvent, CertificateKind, SolverError,
    SolverSettings, SubproblemContext,
};
use crate::space::{dot, l2_norm, sub, DualPoint, Point};

fn euclid_record(n: usize, x: Point, instance: &ProblemInstance, params: &AlgorithmParams) -> IterationRecord {
    let anchor = params.anchor.coords();
    let d = sub(x.coords(), anchor);
    let phi_anchor = dot(&d, &d);
    let solution_distance = instance
        .known_solutions
        .first()
        .map(|p| l2_norm(&sub(x.coords(), p.coords())));
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

/// Runs the corollary scheme on an exponent-2 space. Rejects any other
/// geometry: the reductions it is built on hold nowhere else.
pub fn run_euclidean_reference(
    instance: &ProblemInstance,
    params: &AlgorithmParams,
    settings: &SolverSettings,
) -> Result<IterationTrace, IterationError> {
    settings.validate().map_err(IterationError::Solver)?;
    instance
        .validate()
        .map_err(|e| IterationError::InvalidParams(e.to_string()))?;
    params.validate(instance)?;
    let sp = &instance.space;
    if sp.exponent() != 2.0 {
        return Err(IterationError::InvalidParams(format!(
            "the Euclidean reference engine requires exponent 2, got {}",
            sp.exponent()
        )));
    }

    let ctx = |salt: u64| SubproblemContext {
        space: sp,
        feasible: &instance.feasible,
        known_solutions: &instance.known_solutions,
        settings,
        salt,
    };

    type StepOuts = (Point, Point, Point, f64, f64, f64, f64);
    let subproblems = |n: usize, x_n: &Point| -> Result<StepOuts, IterationError> {
        let r = params.r_rule.r(n);
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
        // T_n(u) is dual-valued; in this geometry dual coordinates are
        // primal coordinates.
        let tnu = instance.maps.member(n, &u);
        let [a1, a2, a3] = params.alpha;
        let y = Point(
            x_n.coords()
                .iter()
                .zip(z.coords().iter().zip(tnu.coords()))
                .map(|(xi, (zi, ti))| a1 * xi + a2 * zi + a3 * ti)
                .collect(),
        );
        let residual_fixed_point = l2_norm(&sub(u.coords(), tnu.coords()));
        let residual_xy = l2_norm(&sub(x_n.coords(), y.coords()));
        Ok((z, u, y, cert_eq, cert_vi, residual_fixed_point, residual_xy))
    };

    let mut records = vec![euclid_record(1, params.anchor.clone(), instance, params)];
    let mut ledger: Vec<HalfSpace> = Vec::new();
    let mut status = TerminalStatus::MaxIters;
    let mut failure = None;

    'outer: for n in 1..=params.max_iters {
        let x_n = records.last().expect("records never empty").x.clone();

        match subproblems(n, &x_n) {
            Ok((z, u, y, cert_eq, cert_vi, residual_fp, residual_xy)) => {
                if let Some(cap) = settings.max_ledger {
                    if ledger.len() >= cap {
                        status = TerminalStatus::InnerSolveFailed;
                        failure = Some(format!(
                            "step {n}: {}",
                            IterationError::LedgerCapExceeded(cap)
                        ));
                        break 'outer;
                    }
                }
                let nx = l2_norm(x_n.coords());
                let ny = l2_norm(y.coords());
                ledger.push(HalfSpace {
                    normal: DualPoint(sub(x_n.coords(), y.coords())),
                    offset: nx * nx - ny * ny,
                    step: n,
                });

                // The certified retraction, not the raw alternating-projection
                // pass: on long ledgers the latter can go quiet far from the
                // true projection, and this engine must be held to the same
                // certificate standard as the one it cross-checks.
                let retract = sunny_retraction(
                    &params.anchor,
                    &ledger,
                    &ctx(probe_salt(CertificateKind::Retraction, n)),
                );
                let (next_x, cert_retraction) = match retract {
                    Ok((p, cert)) => (p, cert.worst_violation),
                    Err(err) => {
                        status = match &err {
                            SolverError::InfeasibleRegion(_) => TerminalStatus::InfeasibleLedger,
                            _ => TerminalStatus::InnerSolveFailed,
                        };
                        failure = Some(format!("step {n}: {err}"));
                        break 'outer;
                    }
                };

                let step_norm = l2_norm(&sub(next_x.coords(), x_n.coords()));
                {
                    let rec = records.last_mut().expect("records never empty");
                    rec.z = z;
                    rec.y = y;
                    rec.u = u;
                    rec.cert_eq = cert_eq;
                    rec.cert_vi = cert_vi;
                    rec.residual_fixed_point = residual_fp;
                    rec.residual_xy = residual_xy;
                }
                let mut next = euclid_record(n + 1, next_x, instance, params);
                next.step_norm = step_norm;
                next.cert_retraction = cert_retraction;
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
                break;
            }
        }
    }

    // The final record's own step never ran; fill its subproblem fields as
    // trailing diagnostics (best effort — the ledger is not extended),
    // mirroring the general engine.
    let last = records.len() - 1;
    let (n_last, x_last) = (records[last].n, records[last].x.clone());
    if let Ok((z, u, y, cert_eq, cert_vi, residual_fp, residual_xy)) = subproblems(n_last, &x_last) {
        let rec = &mut records[last];
        rec.z = z;
        rec.u = u;
        rec.y = y;
        rec.cert_eq = cert_eq;
        rec.cert_vi = cert_vi;
        rec.residual_fixed_point = residual_fp;
        rec.residual_xy = residual_xy;
    }

    let final_point = records.last().expect("records never empty").x.clone();
    let iterations = records.len() - 1;
    Ok(IterationTrace { records, terminal_status: status, final_point, failure, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iteration::{run, RRule};
    use crate::problem::hilbert_affine_vi_problem;
    use crate::sets::BaseSet;

    fn instance() -> ProblemInstance {
        hilbert_affine_vi_problem(
            vec![vec![2.0, 0.5], vec![0.5, 1.0]],
            vec![0.1, -0.2],
            BaseSet::Ball { center: vec![0.0, 0.0], radius: 4.0 },
        )
        .unwrap()
    }

    fn params() -> AlgorithmParams {
        AlgorithmParams {
            alpha: [1.0 / 3.0; 3],
            r_rule: RRule::Constant { value: 1.0 },
            a: 1.0,
            max_iters: 10,
            stop_tol: 0.0,
            anchor: Point::new(vec![1.5, -2.0]).unwrap(),
        }
    }

    #[test]
    fn matches_the_general_engine_in_hilbert_space() {
        let inst = instance();
        let p = params();
        let settings = SolverSettings { inner_tol: 1e-12, ..Default::default() };
        let general = run(&inst, &p, &settings).unwrap();
        let reference = run_euclidean_reference(&inst, &p, &settings).unwrap();
        assert_eq!(general.records.len(), reference.records.len());
        for (a, b) in general.records.iter().zip(&reference.records) {
            for (ca, cb) in a.x.coords().iter().zip(b.x.coords()) {
                assert!((ca - cb).abs() <= 1e-10, "iterates diverged at n = {}", a.n);
            }
            for (ca, cb) in a.y.coords().iter().zip(b.y.coords()) {
                assert!((ca - cb).abs() <= 1e-10, "y diverged at n = {}", a.n);
            }
            assert!((a.phi_anchor - b.phi_anchor).abs() <= 1e-10);
        }
        assert_eq!(general.terminal_status, reference.terminal_status);
    }

    #[test]
    fn rejects_non_euclidean_geometry() {
        let inst = crate::problem::example_problem(3.0, 3, crate::problem::AlphaRule::Harmonic).unwrap();
        let p = AlgorithmParams {
            alpha: [1.0 / 3.0; 3],
            r_rule: RRule::Constant { value: 1.0 },
            a: 1.0,
            max_iters: 3,
            stop_tol: 1e-8,
            anchor: Point::zeros(3),
        };
        let err = run_euclidean_reference(&inst, &p, &SolverSettings::default()).unwrap_err();
        assert!(err.to_string().contains("exponent 2"));
    }
}
