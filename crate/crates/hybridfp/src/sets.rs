//! Closed convex feasible sets and the half-space ledger.
//!
//! The outer iteration projects onto `C ∩ H_1 ∩ … ∩ H_n` where `C` is one of
//! the base sets here and each `H_k` is a half-space recorded at step `k`.
//! Half-spaces are stored in the form `2⟨z, c⟩ ≤ b`, which makes the defining
//! inequality `φ(z, y) ≤ φ(z, x)` of a cutting plane exact:
//! `φ(z, y) − φ(z, x) = 2⟨z, Jx − Jy⟩ − (‖x‖² − ‖y‖²)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{dot, sub, DualPoint, Point, Space};

#[derive(Debug, Error)]
pub enum SetError {
    #[error("invalid set: {0}")]
    Invalid(String),
    #[error("set dimension {set} does not match space dimension {space}")]
    DimensionMismatch { set: usize, space: usize },
}

/// A base feasible set `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseSet {
    /// Norm ball `{z : ‖z − center‖ ≤ radius}` in the space's own norm.
    Ball { center: Vec<f64>, radius: f64 },
    /// Coordinate box `{z : lower_i ≤ z_i ≤ upper_i}`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl BaseSet {
    pub fn validate(&self, space: &Space) -> Result<(), SetError> {
        match self {
            BaseSet::Ball { center, radius } => {
                if center.len() != space.dim() {
                    return Err(SetError::DimensionMismatch { set: center.len(), space: space.dim() });
                }
                if !radius.is_finite() || *radius <= 0.0 {
                    return Err(SetError::Invalid(format!("ball radius must be positive, got {radius}")));
                }
                if center.iter().any(|c| !c.is_finite()) {
                    return Err(SetError::Invalid("ball center has non-finite coordinates".into()));
                }
            }
            BaseSet::Box { lower, upper } => {
                if lower.len() != space.dim() || upper.len() != space.dim() {
                    return Err(SetError::DimensionMismatch { set: lower.len().max(upper.len()), space: space.dim() });
                }
                for i in 0..lower.len() {
                    if !lower[i].is_finite() || !upper[i].is_finite() {
                        return Err(SetError::Invalid(format!("box bound {i} is non-finite")));
                    }
                    if lower[i] > upper[i] {
                        return Err(SetError::Invalid(format!(
                            "box is empty at coordinate {i}: lower {} exceeds upper {}",
                            lower[i], upper[i]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Signed margin to the boundary: nonnegative inside, negative outside.
    /// Ball margins are in the space norm, box margins per coordinate.
    pub fn min_slack(&self, space: &Space, x: &Point) -> f64 {
        match self {
            BaseSet::Ball { center, radius } => {
                let d = Point(sub(x.coords(), center));
                radius - space.norm(&d)
            }
            BaseSet::Box { lower, upper } => {
                let mut m = f64::INFINITY;
                for i in 0..lower.len() {
                    m = m.min(x.coords()[i] - lower[i]).min(upper[i] - x.coords()[i]);
                }
                m
            }
        }
    }

    pub fn contains(&self, space: &Space, x: &Point, tol: f64) -> bool {
        self.min_slack(space, x) >= -tol
    }

    /// A point well inside the set: the ball center, or the box midpoint.
    pub fn interior_point(&self) -> Point {
        match self {
            BaseSet::Ball { center, .. } => Point(center.clone()),
            BaseSet::Box { lower, upper } => {
                Point(lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect())
            }
        }
    }

    /// Maps `x` into the set: radial pull toward the center for balls, clamp
    /// for boxes. Exact metric projection for boxes and for Euclidean balls;
    /// for ℓ_p balls it is a feasibility map, not the nearest point.
    pub fn pull_inside(&self, space: &Space, x: &Point) -> Point {
        match self {
            BaseSet::Ball { center, radius } => {
                let d = sub(x.coords(), center);
                let n = space.norm(&Point(d.clone()));
                if n <= *radius {
                    x.clone()
                } else {
                    let s = radius / n;
                    Point(center.iter().zip(&d).map(|(c, di)| c + s * di).collect())
                }
            }
            BaseSet::Box { lower, upper } => Point(
                x.coords()
                    .iter()
                    .enumerate()
                    .map(|(i, &xi)| xi.clamp(lower[i], upper[i]))
                    .collect(),
            ),
        }
    }

    /// A radius bound on the set's extent around [`Self::interior_point`],
    /// used to place certificate probes on the boundary region.
    pub fn extent(&self) -> f64 {
        match self {
            BaseSet::Ball { radius, .. } => *radius,
            BaseSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| 0.5 * (u - l))
                .fold(0.0f64, f64::max),
        }
    }

    /// Draws a random point of the set. Uniform per coordinate for boxes;
    /// for balls, a random direction scaled by a radius with interior bias.
    pub fn sample<R: Rng>(&self, space: &Space, rng: &mut R) -> Point {
        match self {
            BaseSet::Ball { center, radius } => {
                let dim = center.len();
                let dir: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n = space.norm(&Point(dir.clone()));
                let r = radius * rng.gen_range(0.0..1.0f64).powf(1.0 / dim as f64);
                if n == 0.0 {
                    return Point(center.clone());
                }
                Point(center.iter().zip(&dir).map(|(c, d)| c + r * d / n).collect())
            }
            BaseSet::Box { lower, upper } => Point(
                lower
                    .iter()
                    .zip(upper)
                    .map(|(&l, &u)| if l == u { l } else { rng.gen_range(l..=u) })
                    .collect(),
            ),
        }
    }
}

/// Cutting plane `{z : 2⟨z, normal⟩ ≤ offset}` recorded at outer step `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: DualPoint,
    pub offset: f64,
    pub step: usize,
}

impl HalfSpace {
    /// Distance-like signed slack `(offset − 2⟨x, normal⟩) / (2‖normal‖_*)`,
    /// positive inside. A vanishing normal makes the half-space trivial: the
    /// slack is `±∞` by the sign of the offset.
    pub fn slack(&self, space: &Space, x: &Point) -> f64 {
        let raw = self.offset - 2.0 * dot(x.coords(), self.normal.coords());
        let n = space.dual_norm(&self.normal);
        if n <= f64::MIN_POSITIVE {
            return if self.offset >= 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        raw / (2.0 * n)
    }

    pub fn contains(&self, space: &Space, x: &Point, tol: f64) -> bool {
        self.slack(space, x) >= -tol
    }
}

/// Builds the cutting plane separating the next iterate, from the pair
/// `(x_n, y_n)`: normal `Jx − Jy`, offset `‖x‖² − ‖y‖²`. Every `z` with
/// `φ(z, y) ≤ φ(z, x)` satisfies it, exactly.
pub fn halfspace_from_iterates(space: &Space, x: &Point, y: &Point, step: usize) -> HalfSpace {
    let jx = space.duality_map(x);
    let jy = space.duality_map(y);
    let nx = space.norm(x);
    let ny = space.norm(y);
    HalfSpace {
        normal: DualPoint(sub(jx.coords(), jy.coords())),
        offset: nx * nx - ny * ny,
        step,
    }
}

/// A base set together with the accumulated ledger — the region the sunny
/// retraction targets.
#[derive(Debug, Clone, Copy)]
pub struct Region<'a> {
    pub base: &'a BaseSet,
    pub halfspaces: &'a [HalfSpace],
}

impl Region<'_> {
    pub fn min_slack(&self, space: &Space, x: &Point) -> f64 {
        let mut m = self.base.min_slack(space, x);
        for h in self.halfspaces {
            m = m.min(h.slack(space, x));
        }
        m
    }

    pub fn contains(&self, space: &Space, x: &Point, tol: f64) -> bool {
        self.min_slack(space, x) >= -tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn halfspace_from_iterates_worked_example() {
        // Hilbert, x = (1,0), y = (0,0): normal (1,0), offset 1,
        // i.e. the half-plane z₁ ≤ 1/2.
        let sp = Space::hilbert(2).unwrap();
        let h = halfspace_from_iterates(&sp, &pt(&[1.0, 0.0]), &pt(&[0.0, 0.0]), 1);
        assert_eq!(h.normal.coords(), &[1.0, 0.0]);
        assert_eq!(h.offset, 1.0);
        assert!(h.contains(&sp, &pt(&[0.5, 3.0]), 0.0));
        assert!(!h.contains(&sp, &pt(&[0.6, 0.0]), 1e-9));
    }

    #[test]
    fn cutting_plane_identity_is_exact() {
        // φ(z, y) − φ(z, x) = 2⟨z, c⟩ − b with c = Jx − Jy, b = ‖x‖² − ‖y‖².
        let sp = Space::lp(3.0, 3).unwrap();
        let x = pt(&[1.0, -0.5, 0.25]);
        let y = pt(&[0.3, 0.8, -0.1]);
        let h = halfspace_from_iterates(&sp, &x, &y, 7);
        for z in [pt(&[0.0, 0.0, 0.0]), pt(&[1.0, 1.0, 1.0]), pt(&[-2.0, 0.5, 0.75])] {
            let lhs = sp.lyapunov(&z, &y).unwrap() - sp.lyapunov(&z, &x).unwrap();
            let rhs = 2.0 * dot(z.coords(), h.normal.coords()) - h.offset;
            assert!((lhs - rhs).abs() < 1e-12, "identity broke: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn halfspace_slack_is_euclidean_distance_in_hilbert() {
        let sp = Space::hilbert(2).unwrap();
        // z₁ ≤ 0 as 2⟨z, e₁⟩ ≤ 0; (2,3) sits at distance 2 outside.
        let h = HalfSpace { normal: DualPoint(vec![1.0, 0.0]), offset: 0.0, step: 1 };
        assert!((h.slack(&sp, &pt(&[2.0, 3.0])) + 2.0).abs() < 1e-15);
        assert!((h.slack(&sp, &pt(&[-1.5, 0.0])) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_halfspace_is_trivial() {
        let sp = Space::hilbert(2).unwrap();
        let h = HalfSpace { normal: DualPoint::zeros(2), offset: 0.0, step: 1 };
        assert_eq!(h.slack(&sp, &pt(&[5.0, 5.0])), f64::INFINITY);
        let bad = HalfSpace { normal: DualPoint::zeros(2), offset: -1.0, step: 1 };
        assert_eq!(bad.slack(&sp, &pt(&[0.0, 0.0])), f64::NEG_INFINITY);
    }

    #[test]
    fn ball_slack_and_pull() {
        let sp = Space::lp(3.0, 2).unwrap();
        let ball = BaseSet::Ball { center: vec![0.0, 0.0], radius: 1.0 };
        ball.validate(&sp).unwrap();
        let inside = pt(&[0.3, 0.3]);
        assert!(ball.min_slack(&sp, &inside) > 0.0);
        let outside = pt(&[2.0, 2.0]);
        assert!(ball.min_slack(&sp, &outside) < 0.0);
        let pulled = ball.pull_inside(&sp, &outside);
        assert!(ball.min_slack(&sp, &pulled).abs() < 1e-12);
        // Pulling an interior point is the identity.
        assert_eq!(ball.pull_inside(&sp, &inside), inside);
    }

    #[test]
    fn box_slack_clamp_and_validation() {
        let sp = Space::hilbert(3).unwrap();
        let b = BaseSet::Box { lower: vec![-1.0, 0.0, 2.0], upper: vec![1.0, 0.0, 5.0] };
        b.validate(&sp).unwrap();
        let x = pt(&[0.25, 0.0, 6.0]);
        assert!((b.min_slack(&sp, &x) + 1.0).abs() < 1e-15);
        let pulled = b.pull_inside(&sp, &x);
        assert_eq!(pulled.coords(), &[0.25, 0.0, 5.0]);

        let empty = BaseSet::Box { lower: vec![1.0], upper: vec![0.0] };
        assert!(empty.validate(&Space::hilbert(1).unwrap()).is_err());
        let wrong_dim = BaseSet::Ball { center: vec![0.0], radius: 1.0 };
        assert!(wrong_dim.validate(&sp).is_err());
    }

    #[test]
    fn samples_stay_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let sp = Space::lp(1.5, 4).unwrap();
        let ball = BaseSet::Ball { center: vec![1.0, 0.0, -2.0, 0.5], radius: 2.5 };
        let bx = BaseSet::Box { lower: vec![-1.0; 4], upper: vec![3.0; 4] };
        for _ in 0..200 {
            assert!(ball.contains(&sp, &ball.sample(&sp, &mut rng), 1e-12));
            assert!(bx.contains(&sp, &bx.sample(&sp, &mut rng), 0.0));
        }
    }

    #[test]
    fn region_slack_is_the_minimum() {
        let sp = Space::hilbert(2).unwrap();
        let ball = BaseSet::Ball { center: vec![0.0, 0.0], radius: 10.0 };
        let hs = vec![HalfSpace { normal: DualPoint(vec![1.0, 0.0]), offset: 2.0, step: 1 }];
        let region = Region { base: &ball, halfspaces: &hs };
        // At (3, 0): ball slack 7, half-space slack (2 − 6)/2 = −2.
        assert!((region.min_slack(&sp, &pt(&[3.0, 0.0])) + 2.0).abs() < 1e-15);
        assert!(region.contains(&sp, &pt(&[0.5, 0.0]), 0.0));
    }
}
