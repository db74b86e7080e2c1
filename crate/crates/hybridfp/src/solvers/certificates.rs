//! Probe-point sampling and certificate evaluation.
//!
//! A certificate evaluates the subproblem's defining inequality — expressed
//! as a violation function, positive where the inequality fails — on a
//! deterministic batch of feasible points: random draws from the region,
//! known solutions, the subproblem input (when feasible), and boundary
//! probes along the coordinate directions. Solvers append exact worst-case
//! candidates of their own where the violation is affine.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::par::map_collect;
use crate::sets::{BaseSet, HalfSpace, Region};
use crate::solvers::{Certificate, CertificateKind, SolverSettings};
use crate::space::{Point, Space};
use crate::tol;

/// Largest parameter θ ∈ [0, 1] with `from + θ(to − from)` feasible, found by
/// bisection; `from` must be feasible. Along a segment every constraint slack
/// is concave, so the feasible parameters form an interval and bisection is
/// sound.
pub(crate) fn bisect_toward(space: &Space, region: Region<'_>, from: &Point, to: &Point) -> Point {
    let blend = |theta: f64| -> Point {
        Point(
            from.coords()
                .iter()
                .zip(to.coords())
                .map(|(a, b)| a + theta * (b - a))
                .collect(),
        )
    };
    if region.contains(space, to, tol::MEMBERSHIP) {
        return to.clone();
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if region.contains(space, &blend(mid), 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    blend(lo)
}

/// The deterministic probe batch for one certificate.
///
/// `feasible_anchor` must be a region-feasible point (solvers pass their own
/// output); infeasible candidates are pulled onto the segment toward it.
#[allow(clippy::too_many_arguments)]
pub fn sample_probe_points(
    space: &Space,
    base: &BaseSet,
    halfspaces: &[HalfSpace],
    feasible_anchor: &Point,
    x: &Point,
    known_solutions: &[Point],
    settings: &SolverSettings,
    salt: u64,
) -> Vec<Point> {
    let region = Region { base, halfspaces };
    let mut rng = ChaCha8Rng::seed_from_u64(settings.rng_seed ^ salt);
    let mut raw: Vec<Point> = (0..settings.certificate_samples)
        .map(|_| base.sample(space, &mut rng))
        .collect();
    raw.extend(known_solutions.iter().cloned());
    if region.contains(space, x, tol::MEMBERSHIP) {
        raw.push(x.clone());
    }
    raw.extend(boundary_probes(base));

    let mut points = Vec::with_capacity(raw.len() + 1);
    points.push(feasible_anchor.clone());
    for cand in raw {
        if region.contains(space, &cand, tol::MEMBERSHIP) {
            points.push(cand);
        } else {
            points.push(bisect_toward(space, region, feasible_anchor, &cand));
        }
    }
    points
}

/// Extremal points of the base set along ± coordinate directions.
fn boundary_probes(base: &BaseSet) -> Vec<Point> {
    match base {
        BaseSet::Ball { center, radius } => {
            let d = center.len();
            let mut probes = Vec::with_capacity(2 * d);
            for i in 0..d {
                for sign in [1.0, -1.0] {
                    let mut c = center.clone();
                    c[i] += sign * radius;
                    probes.push(Point(c));
                }
            }
            probes
        }
        BaseSet::Box { lower, upper } => {
            let mid: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect();
            let mut probes = Vec::with_capacity(2 * lower.len());
            for i in 0..lower.len() {
                let mut lo = mid.clone();
                lo[i] = lower[i];
                probes.push(Point(lo));
                let mut hi = mid.clone();
                hi[i] = upper[i];
                probes.push(Point(hi));
            }
            probes
        }
    }
}

/// Evaluates `violation` over the probe batch (in parallel when enabled) and
/// folds the maximum sequentially, so the certificate is bit-deterministic
/// regardless of thread count.
pub fn certify<F>(kind: CertificateKind, tolerance: f64, points: &[Point], violation: F) -> Certificate
where
    F: Fn(&Point) -> f64 + Send + Sync,
{
    let vals = map_collect(points, violation);
    let worst = vals.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    Certificate {
        kind,
        worst_violation: worst,
        samples_checked: points.len(),
        tolerance,
        passed: worst <= tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::BaseSet;

    fn settings() -> SolverSettings {
        SolverSettings { certificate_samples: 16, rng_seed: 9, ..Default::default() }
    }

    #[test]
    fn probe_batch_is_feasible_and_deterministic() {
        let sp = Space::lp(3.0, 3).unwrap();
        let base = BaseSet::Ball { center: vec![0.0; 3], radius: 1.0 };
        let hs = vec![crate::sets::halfspace_from_iterates(
            &sp,
            &Point::new(vec![0.9, 0.0, 0.0]).unwrap(),
            &Point::new(vec![0.3, 0.0, 0.0]).unwrap(),
            1,
        )];
        let anchor = Point::zeros(3);
        let x = Point::new(vec![0.2, 0.1, 0.0]).unwrap();
        let known = [Point::zeros(3)];
        let pts = sample_probe_points(&sp, &base, &hs, &anchor, &x, &known, &settings(), 42);
        let region = Region { base: &base, halfspaces: &hs };
        for p in &pts {
            assert!(
                region.min_slack(&sp, p) >= -1e-10,
                "infeasible probe with slack {}",
                region.min_slack(&sp, p)
            );
        }
        // x is feasible here, so it must appear verbatim.
        assert!(pts.iter().any(|p| p.coords() == x.coords()));
        let again = sample_probe_points(&sp, &base, &hs, &anchor, &x, &known, &settings(), 42);
        assert_eq!(pts, again);
        let other = sample_probe_points(&sp, &base, &hs, &anchor, &x, &known, &settings(), 43);
        assert_ne!(pts, other);
    }

    #[test]
    fn bisection_lands_on_the_boundary() {
        let sp = Space::hilbert(2).unwrap();
        let base = BaseSet::Ball { center: vec![0.0, 0.0], radius: 1.0 };
        let region = Region { base: &base, halfspaces: &[] };
        let inside = Point::zeros(2);
        let outside = Point::new(vec![3.0, 0.0]).unwrap();
        let hit = bisect_toward(&sp, region, &inside, &outside);
        assert!((hit.coords()[0] - 1.0).abs() < 1e-9);
        // A feasible target is returned unchanged.
        let target = Point::new(vec![0.5, 0.0]).unwrap();
        assert_eq!(bisect_toward(&sp, region, &inside, &target), target);
    }

    #[test]
    fn certificate_marks_pass_and_fail() {
        let pts: Vec<Point> = (0..5).map(|i| Point(vec![i as f64])).collect();
        let cert = certify(CertificateKind::Retraction, 1e-6, &pts, |p| -p.coords()[0]);
        assert!(cert.passed);
        assert_eq!(cert.worst_violation, 0.0);
        assert_eq!(cert.samples_checked, 5);
        let bad = certify(CertificateKind::Retraction, 1e-6, &pts, |p| p.coords()[0]);
        assert!(!bad.passed);
        assert_eq!(bad.worst_violation, 4.0);
    }
}
