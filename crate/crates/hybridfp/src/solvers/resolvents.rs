//! Equilibrium and variational-inequality resolvents.
//!
//! Both subproblems regularize their operator with the term `(Jz − Jx)/r`,
//! which makes them strongly monotone and solvable by simple damped schemes:
//!
//! * `vi_resolvent` finds `u ∈ C` with
//!   `⟨y − u, A(u)⟩ + (1/r)⟨y − u, Ju − Jx⟩ ≥ 0` for all `y ∈ C`;
//! * `eq_resolvent` finds `z ∈ C` with
//!   `f(Jz, Jy) + (1/r)⟨z − x, Jy − Jz⟩ ≥ 0` for all `y ∈ C`.
//!
//! Closed-form resolvents supplied by the problem are used when their
//! interior validity condition holds; otherwise the generic iterative paths
//! run — extragradient in the Euclidean geometry, damped duality-map
//! fixed-point iterations in ℓ_p. Every returned point carries a certificate
//! of its defining inequality over sampled feasible probes, extended by the
//! exact worst-case probe where the violation is affine in the probe.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::problem::{Bifunction, MonotoneOperator};
use crate::sets::BaseSet;
use crate::solvers::certificates::{certify, sample_probe_points};
use crate::solvers::{Certificate, CertificateKind, SolverError, SubproblemContext};
use crate::space::{axpy, dot, scale, sub, DualPoint, Point, Space};
use crate::tol;

/// Equilibrium resolvent with certificate. Prefers the closed form, falls
/// back to the generic path when the closed form is missing, lands on the
/// boundary, or misses its certificate.
pub fn eq_resolvent(
    f: &Bifunction,
    r: f64,
    x: &Point,
    ctx: &SubproblemContext<'_>,
) -> Result<(Point, Certificate), SolverError> {
    validate_r(r)?;
    if let Some(z) = f.closed_form(x, r) {
        if interior(ctx, &z) {
            let cert = certify_eq(f, r, x, &z, ctx);
            if cert.passed {
                return Ok((z, cert));
            }
            log::debug!(
                "closed-form equilibrium resolvent missed its certificate \
                 (violation {:.3e}); retrying with the generic path",
                cert.worst_violation
            );
        }
    }
    eq_resolvent_generic(f, r, x, ctx)
}

/// Generic iterative equilibrium resolvent; requires the bifunction's
/// operator form `f(w, w') = ⟨G(w), w' − w⟩` unless a closed form exists.
pub fn eq_resolvent_generic(
    f: &Bifunction,
    r: f64,
    x: &Point,
    ctx: &SubproblemContext<'_>,
) -> Result<(Point, Certificate), SolverError> {
    validate_r(r)?;
    let Some(g) = f.operator_form() else {
        // No operator form: the closed form is the only available solver.
        if let Some(z) = f.closed_form(x, r) {
            let cert = certify_eq(f, r, x, &z, ctx);
            return finish(z, cert, 0);
        }
        return Err(SolverError::MissingResolvent(f.name.clone()));
    };
    let g = g.clone();
    let sp = ctx.space;

    // In Euclidean geometry the equilibrium condition coincides with the
    // variational inequality for A = G∘J, so reuse the extragradient path.
    let (z, iters) = if sp.exponent() == 2.0 {
        let a = {
            let sp = sp.clone();
            move |z: &Point| DualPoint(g(&sp.duality_map(z)).0)
        };
        extragradient(&a, r, x, ctx)
    } else {
        // Damped fixed-point iteration on z ↦ pull_C((1−δ)z + δ(x − r·G(Jz))).
        // Interior fixed points satisfy G(Jz) + (z − x)/r = 0; radial-clip
        // fixed points on centered balls satisfy the boundary condition.
        let gz = |z: &Point| g(&sp.duality_map(z));
        let lam = estimate_lipschitz(ctx, |z| gz(z).0, |v| sp.norm(&Point(v.to_vec())), 0x9c);
        let mut delta = 1.0 / (1.0 + r * lam);
        let mut z = ctx.feasible.pull_inside(sp, x);
        let mut best_res = f64::INFINITY;
        let mut bad_streak = 0usize;
        let mut iters = 0;
        for it in 1..=ctx.settings.max_inner_iters {
            iters = it;
            let target = axpy(x.coords(), -r, &gz(&z).0);
            let cand = ctx.feasible.pull_inside(
                sp,
                &Point(z.coords().iter().zip(&target).map(|(zi, ti)| zi + delta * (ti - zi)).collect()),
            );
            let res = sp.distance(&cand, &z);
            z = cand;
            if res <= ctx.settings.inner_tol * (1.0 + sp.norm(&z)) {
                break;
            }
            if res < best_res {
                best_res = res;
                bad_streak = 0;
            } else {
                bad_streak += 1;
                if bad_streak >= 8 {
                    delta = (delta * 0.5).max(1e-8);
                    bad_streak = 0;
                }
            }
        }
        (z, iters)
    };

    let cert = certify_eq(f, r, x, &z, ctx);
    finish(z, cert, iters)
}

/// Variational-inequality resolvent with certificate; closed form preferred,
/// generic path as fallback.
pub fn vi_resolvent(
    a: &MonotoneOperator,
    r: f64,
    x: &Point,
    ctx: &SubproblemContext<'_>,
) -> Result<(Point, Certificate), SolverError> {
    validate_r(r)?;
    if let Some(u) = a.closed_form(x, r) {
        if interior(ctx, &u) {
            let cert = certify_vi(a, r, x, &u, ctx);
            if cert.passed {
                return Ok((u, cert));
            }
            log::debug!(
                "closed-form VI resolvent missed its certificate \
                 (violation {:.3e}); retrying with the generic path",
                cert.worst_violation
            );
        }
    }
    vi_resolvent_generic(a, r, x, ctx)
}

/// Generic iterative VI resolvent: extragradient in Euclidean geometry,
/// damped dual-coordinate fixed-point iteration in ℓ_p.
pub fn vi_resolvent_generic(
    a: &MonotoneOperator,
    r: f64,
    x: &Point,
    ctx: &SubproblemContext<'_>,
) -> Result<(Point, Certificate), SolverError> {
    validate_r(r)?;
    let sp = ctx.space;
    let (u, iters) = if sp.exponent() == 2.0 {
        let af = |z: &Point| a.evaluate(z);
        extragradient(&af, r, x, ctx)
    } else {
        // Iterate w ← (1−δ)w + δ(Jx − r·A(J*w)), re-projected through the
        // primal feasible set each step. Interior fixed points satisfy
        // Ju = Jx − r·A(u); radial clips on centered balls carry the right
        // boundary multiplier.
        let jx = sp.duality_map(x);
        let atilde = |w: &DualPoint| a.evaluate(&sp.inverse_duality_map(w));
        let lam = estimate_lipschitz(
            ctx,
            |z| atilde(&sp.duality_map(z)).0,
            |v| sp.dual_norm(&DualPoint(v.to_vec())),
            0x71,
        );
        let mut delta = 1.0 / (1.0 + r * lam);
        let mut u = ctx.feasible.pull_inside(sp, x);
        let mut w = sp.duality_map(&u);
        let mut best_res = f64::INFINITY;
        let mut bad_streak = 0usize;
        let mut iters = 0;
        for it in 1..=ctx.settings.max_inner_iters {
            iters = it;
            let wt = axpy(jx.coords(), -r, &atilde(&w).0);
            let w_next =
                DualPoint(w.coords().iter().zip(&wt).map(|(wi, ti)| wi + delta * (ti - wi)).collect());
            let u_next = ctx.feasible.pull_inside(sp, &sp.inverse_duality_map(&w_next));
            let w_new = sp.duality_map(&u_next);
            let res = sp.dual_norm(&DualPoint(sub(w_new.coords(), w.coords())));
            u = u_next;
            w = w_new;
            if res <= ctx.settings.inner_tol * (1.0 + sp.dual_norm(&w)) {
                break;
            }
            if res < best_res {
                best_res = res;
                bad_streak = 0;
            } else {
                bad_streak += 1;
                if bad_streak >= 8 {
                    delta = (delta * 0.5).max(1e-8);
                    bad_streak = 0;
                }
            }
        }
        (u, iters)
    };

    let cert = certify_vi(a, r, x, &u, ctx);
    finish(u, cert, iters)
}

fn validate_r(r: f64) -> Result<(), SolverError> {
    if !r.is_finite() || r <= 0.0 {
        return Err(SolverError::InvalidInput(format!(
            "resolvent parameter r must be positive and finite, got {r}"
        )));
    }
    Ok(())
}

fn interior(ctx: &SubproblemContext<'_>, z: &Point) -> bool {
    ctx.feasible.min_slack(ctx.space, z) >= tol::CLOSED_FORM_INTERIOR
}

fn finish(z: Point, cert: Certificate, iterations: usize) -> Result<(Point, Certificate), SolverError> {
    if cert.passed {
        Ok((z, cert))
    } else {
        Err(SolverError::NonconvergedInnerSolve { iterations, best: z, certificate: cert })
    }
}

/// Extragradient iteration for `Φ(z) = A(z) + (z − x)/r` over the feasible
/// set, Euclidean geometry only. The step `τ = 0.5·r/(1 + r·Λ)` satisfies
/// `τ·Lip(Φ) ≤ 0.5 < 1` for any Lipschitz bound `Λ` of `A`.
fn extragradient<F>(a: &F, r: f64, x: &Point, ctx: &SubproblemContext<'_>) -> (Point, usize)
where
    F: Fn(&Point) -> DualPoint,
{
    let sp = ctx.space;
    debug_assert_eq!(sp.exponent(), 2.0);
    let lam = estimate_lipschitz(ctx, |z| a(z).0, |v| sp.dual_norm(&DualPoint(v.to_vec())), 0x3d);
    let tau = 0.5 * r / (1.0 + r * lam);
    let phi = |z: &Point| -> Vec<f64> {
        let az = a(z);
        az.coords()
            .iter()
            .zip(z.coords().iter().zip(x.coords()))
            .map(|(ai, (zi, xi))| ai + (zi - xi) / r)
            .collect()
    };
    let mut z = ctx.feasible.pull_inside(sp, x);
    let mut iters = 0;
    for it in 1..=ctx.settings.max_inner_iters {
        iters = it;
        let zb = ctx.feasible.pull_inside(sp, &Point(axpy(z.coords(), -tau, &phi(&z))));
        let z_next = ctx.feasible.pull_inside(sp, &Point(axpy(z.coords(), -tau, &phi(&zb))));
        let res = sp.distance(&zb, &z).max(sp.distance(&z_next, &z));
        z = z_next;
        if res <= ctx.settings.inner_tol * (1.0 + sp.norm(&z)) {
            break;
        }
    }
    (z, iters)
}

/// Sampled Lipschitz bound of `map` over the feasible set, with the output
/// measured by `out_norm`. Never returns less than a small floor so step
/// sizes stay finite.
fn estimate_lipschitz<M, N>(ctx: &SubproblemContext<'_>, map: M, out_norm: N, stream: u64) -> f64
where
    M: Fn(&Point) -> Vec<f64>,
    N: Fn(&[f64]) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.settings.rng_seed ^ ctx.salt ^ stream);
    let pts: Vec<Point> = (0..8).map(|_| ctx.feasible.sample(ctx.space, &mut rng)).collect();
    let images: Vec<Vec<f64>> = pts.iter().map(&map).collect();
    let mut worst = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let dist = ctx.space.distance(&pts[i], &pts[j]);
            if dist > 1e-12 {
                worst = worst.max(out_norm(&sub(&images[i], &images[j])) / dist);
            }
        }
    }
    worst.max(1e-6)
}

fn certify_vi(
    a: &MonotoneOperator,
    r: f64,
    x: &Point,
    u: &Point,
    ctx: &SubproblemContext<'_>,
) -> Certificate {
    let sp = ctx.space;
    let jx = sp.duality_map(x);
    let ju = sp.duality_map(u);
    // s = A(u) + (Ju − Jx)/r; the condition is ⟨y − u, s⟩ ≥ 0.
    let s = DualPoint(
        a.evaluate(u)
            .coords()
            .iter()
            .zip(ju.coords().iter().zip(jx.coords()))
            .map(|(ai, (jui, jxi))| ai + (jui - jxi) / r)
            .collect(),
    );
    let mut points = sample_probe_points(
        sp,
        ctx.feasible,
        &[],
        u,
        x,
        ctx.known_solutions,
        ctx.settings,
        ctx.salt,
    );
    if let Some(wc) = vi_worst_probe(sp, ctx.feasible, &s) {
        points.push(wc);
    }
    certify(CertificateKind::ViResolvent, ctx.settings.certificate_tol, &points, |y| {
        dot(&sub(u.coords(), y.coords()), s.coords())
    })
}

/// The violation `⟨u − y, s⟩` is affine in `y`, so its exact maximizer over
/// the base set is available in closed form.
fn vi_worst_probe(sp: &Space, feasible: &BaseSet, s: &DualPoint) -> Option<Point> {
    match feasible {
        BaseSet::Ball { center, radius } => {
            let ns = sp.dual_norm(s);
            if ns <= f64::MIN_POSITIVE {
                return None;
            }
            let dir = sp.inverse_duality_map(s);
            Some(Point(axpy(center, -radius / ns, dir.coords())))
        }
        BaseSet::Box { lower, upper } => Some(Point(
            s.coords()
                .iter()
                .enumerate()
                .map(|(i, si)| if *si > 0.0 { lower[i] } else { upper[i] })
                .collect(),
        )),
    }
}

fn certify_eq(
    f: &Bifunction,
    r: f64,
    x: &Point,
    z: &Point,
    ctx: &SubproblemContext<'_>,
) -> Certificate {
    let sp = ctx.space;
    let jz = sp.duality_map(z);
    let zx = sub(z.coords(), x.coords());
    let mut points = sample_probe_points(
        sp,
        ctx.feasible,
        &[],
        z,
        x,
        ctx.known_solutions,
        ctx.settings,
        ctx.salt,
    );
    if let Some(wc) = eq_worst_probe(f, r, sp, ctx.feasible, z, &zx) {
        points.push(wc);
    }
    certify(CertificateKind::EqResolvent, ctx.settings.certificate_tol, &points, |y| {
        let jy = sp.duality_map(y);
        -(f.evaluate(&jz, &jy) + dot(&zx, &sub(jy.coords(), jz.coords())) / r)
    })
}

/// For operator-form bifunctions on a centered ball the violation is affine
/// in `Jy`, whose range is the dual-norm ball of the same radius; the exact
/// maximizer pulls back through the inverse duality map.
fn eq_worst_probe(
    f: &Bifunction,
    r: f64,
    sp: &Space,
    feasible: &BaseSet,
    z: &Point,
    zx: &[f64],
) -> Option<Point> {
    let g = f.operator_form()?;
    let BaseSet::Ball { center, radius } = feasible else {
        return None;
    };
    if center.iter().any(|c| *c != 0.0) {
        return None;
    }
    // H = G(Jz) + (z − x)/r; violation(y) = −⟨H, Jy − Jz⟩ + const terms.
    let h = Point(axpy(g(&sp.duality_map(z)).coords(), 1.0 / r, zx));
    let nh = sp.norm(&h);
    if nh <= f64::MIN_POSITIVE {
        return None;
    }
    Some(Point(scale(h.coords(), -radius / nh)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{example_problem, hilbert_affine_vi_problem, AlphaRule, ProblemInstance};
    use crate::solvers::SolverSettings;

    fn ctx<'a>(inst: &'a ProblemInstance, settings: &'a SolverSettings) -> SubproblemContext<'a> {
        SubproblemContext {
            space: &inst.space,
            feasible: &inst.feasible,
            known_solutions: &inst.known_solutions,
            settings,
            salt: 17,
        }
    }

    #[test]
    fn eq_resolvent_closed_form_oracle() {
        // Euclidean, f(w,w') = ⟨w, w'−w⟩, r = 1: the stationary condition
        // z(1 + 1/r) = x/r gives z = x/(1+r).
        let inst = example_problem(2.0, 2, AlphaRule::Harmonic).unwrap();
        let settings = SolverSettings::default();
        let x = Point::new(vec![0.5, 0.0]).unwrap();
        let (z, cert) = eq_resolvent(&inst.bifunctions[0], 1.0, &x, &ctx(&inst, &settings)).unwrap();
        assert!(cert.passed);
        assert!((z.coords()[0] - 0.25).abs() < 1e-12);
        assert!(z.coords()[1].abs() < 1e-12);
    }

    #[test]
    fn eq_resolvent_fixes_the_solution() {
        let inst = example_problem(3.0, 3, AlphaRule::Harmonic).unwrap();
        let settings = SolverSettings::default();
        let zero = Point::zeros(3);
        let (z, cert) = eq_resolvent(&inst.bifunctions[0], 2.0, &zero, &ctx(&inst, &settings)).unwrap();
        assert!(cert.passed);
        assert!(inst.space.norm(&z) < 1e-12);
    }

    #[test]
    fn eq_generic_matches_closed_form_across_r() {
        let inst = example_problem(3.0, 4, AlphaRule::Harmonic).unwrap();
        let settings = SolverSettings::default();
        let x = Point::new(vec![0.4, -0.3, 0.2, 0.1]).unwrap();
        for r in [1.0, 4.0, 10.0] {
            let (zg, cert) =
                eq_resolvent_generic(&inst.bifunctions[0], r, &x, &ctx(&inst, &settings)).unwrap();
            assert!(cert.passed, "generic certificate failed at r={r}");
            let zc = inst.bifunctions[0].closed_form(&x, r).unwrap();
            assert!(
                inst.space.distance(&zg, &zc) <= tol::PATH_AGREEMENT,
                "paths disagree at r={r}: {:?} vs {:?}",
                zg.coords(),
                zc.coords()
            );
        }
    }

    #[test]
    fn vi_resolvent_closed_form_oracle_lp() {
        // A = J on the unit ball in ℓ_3: (1 + 1/r)Jz = Jx/r gives z = x/(1+r)
        // by homogeneity, so r = 1 halves x.
        let inst = example_problem(3.0, 2, AlphaRule::Harmonic).unwrap();
        let settings = SolverSettings::default();
        let x = Point::new(vec![0.6, -0.2]).unwrap();
        let (u, cert) = vi_resolvent(&inst.operators[0], 1.0, &x, &ctx(&inst, &settings)).unwrap();
        assert!(cert.passed);
        assert!((u.coords()[0] - 0.3).abs() < 1e-12);
        assert!((u.coords()[1] + 0.1).abs() < 1e-12);

        let zero = Point::zeros(2);
        let (u0, _) = vi_resolvent(&inst.operators[0], 3.0, &zero, &ctx(&inst, &settings)).unwrap();
        assert!(inst.space.norm(&u0) < 1e-12);
    }

    #[test]
    fn vi_generic_matches_closed_form_across_r() {
        for p in [1.5, 2.0, 3.0] {
            let inst = example_problem(p, 3, AlphaRule::Harmonic).unwrap();
            let settings = SolverSettings::default();
            let x = Point::new(vec![0.5, 0.3, -0.4]).unwrap();
            for r in [1.0, 10.0] {
                let (ug, cert) =
                    vi_resolvent_generic(&inst.operators[0], r, &x, &ctx(&inst, &settings)).unwrap();
                assert!(cert.passed, "generic VI certificate failed at p={p}, r={r}");
                let uc = inst.operators[0].closed_form(&x, r).unwrap();
                assert!(
                    inst.space.distance(&ug, &uc) <= tol::PATH_AGREEMENT,
                    "paths disagree at p={p}, r={r}"
                );
            }
        }
    }

    #[test]
    fn affine_vi_extragradient_matches_linear_solve() {
        let inst = hilbert_affine_vi_problem(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
            BaseSet::Ball { center: vec![0.0, 0.0], radius: 10.0 },
        )
        .unwrap();
        let settings = SolverSettings::default();
        let x = Point::new(vec![2.0, 0.0]).unwrap();
        let (u, cert) = vi_resolvent(&inst.operators[0], 1.0, &x, &ctx(&inst, &settings)).unwrap();
        assert!(cert.passed);
        assert!((u.coords()[0] - 1.0).abs() < 1e-10);
        let (ug, cert_g) =
            vi_resolvent_generic(&inst.operators[0], 1.0, &x, &ctx(&inst, &settings)).unwrap();
        assert!(cert_g.passed);
        assert!(inst.space.distance(&u, &ug) <= tol::PATH_AGREEMENT);
    }

    #[test]
    fn zero_bifunction_reduces_to_feasibility() {
        // f ≡ 0 with operator form G ≡ 0: the condition collapses to
        // ⟨z − x, Jy − Jz⟩ ≥ 0, satisfied by z = x for feasible x.
        use std::sync::Arc;
        let inst = example_problem(2.0, 2, AlphaRule::Harmonic).unwrap();
        let f = Bifunction::new("zero", Arc::new(|_: &DualPoint, _: &DualPoint| 0.0))
            .with_operator_form(Arc::new(|w: &DualPoint| Point::zeros(w.dim())));
        let settings = SolverSettings::default();
        let x = Point::new(vec![0.3, -0.2]).unwrap();
        let (z, cert) = eq_resolvent(&f, 1.0, &x, &ctx(&inst, &settings)).unwrap();
        assert!(cert.passed);
        assert!(inst.space.distance(&z, &x) <= 1e-7);
    }

    #[test]
    fn bifunction_without_solver_is_rejected() {
        use std::sync::Arc;
        let inst = example_problem(2.0, 2, AlphaRule::Harmonic).unwrap();
        let f = Bifunction::new("opaque", Arc::new(|_: &DualPoint, _: &DualPoint| 0.0));
        let settings = SolverSettings::default();
        let x = Point::zeros(2);
        match eq_resolvent(&f, 1.0, &x, &ctx(&inst, &settings)) {
            Err(SolverError::MissingResolvent(name)) => assert_eq!(name, "opaque"),
            other => panic!("expected MissingResolvent, got {other:?}"),
        }
    }

    #[test]
    fn rejects_nonpositive_r() {
        let inst = example_problem(2.0, 2, AlphaRule::Harmonic).unwrap();
        let settings = SolverSettings::default();
        let x = Point::zeros(2);
        assert!(matches!(
            vi_resolvent(&inst.operators[0], 0.0, &x, &ctx(&inst, &settings)),
            Err(SolverError::InvalidInput(_))
        ));
        assert!(matches!(
            eq_resolvent(&inst.bifunctions[0], -1.0, &x, &ctx(&inst, &settings)),
            Err(SolverError::InvalidInput(_))
        ));
    }

    #[test]
    fn composite_inequality_holds_for_resolvents() {
        // φ(p, z) + φ(z, x) ≤ φ(p, x) for the known solution p = 0.
        for p in [2.0, 3.0] {
            let inst = example_problem(p, 3, AlphaRule::Harmonic).unwrap();
            let settings = SolverSettings::default();
            let zero = Point::zeros(3);
            let x = Point::new(vec![0.5, -0.3, 0.6]).unwrap();
            let x = inst.feasible.pull_inside(&inst.space, &x);
            for r in [1.0, 5.0] {
                let (z, _) = eq_resolvent(&inst.bifunctions[0], r, &x, &ctx(&inst, &settings)).unwrap();
                let lhs = inst.space.lyapunov(&zero, &z).unwrap()
                    + inst.space.lyapunov(&z, &x).unwrap();
                let rhs = inst.space.lyapunov(&zero, &x).unwrap();
                assert!(lhs <= rhs + tol::PATH_AGREEMENT, "p={p} r={r}: {lhs} > {rhs}");
            }
        }
    }
}
