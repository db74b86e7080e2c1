//! Finite-dimensional Hilbert and ℓ_p backends.
//!
//! A [`Space`] fixes a dimension and a geometry and provides the handful of
//! primitives everything else is built from:
//!
//! * the norm and the dual norm,
//! * the duality pairing `⟨x, w⟩` between the space and its dual,
//! * the normalized duality map `J` and its inverse `J*`,
//! * the Lyapunov functional `φ(x, y) = ‖x‖² − 2⟨x, Jy⟩ + ‖y‖²` and its
//!   dual-space counterpart.
//!
//! Points are plain coordinate vectors tagged at the type level as living in
//! the space ([`Point`]) or in its dual ([`DualPoint`]); the tag is what keeps
//! primal and dual quantities from being mixed up in the solver code.
//!
//! For the Hilbert geometry `J` is the identity on coordinates and
//! `φ(x, y) = ‖x − y‖²`. For ℓ_p with `p ∈ (1, ∞)` the map is
//! `J(x)_i = ‖x‖^{2−p} |x_i|^{p−1} sign(x_i)`, with `J(0) = 0`, and its
//! inverse is the duality map of ℓ_q on the dual coordinates, `1/p + 1/q = 1`.
//! `p ∈ {1, ∞}` is rejected at construction: the duality map is set-valued
//! there and none of the algorithms downstream are defined for it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by space construction and by operations that combine
/// vectors of incompatible dimensions.
#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),
}

/// Geometry of the space: Euclidean, or ℓ_p with `p ∈ (1, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    Hilbert,
    Lp { p: f64 },
}

/// A point of the space `E` (primal coordinates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

/// A point of the dual space `E*` (dual coordinates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DualPoint(pub Vec<f64>);

impl Point {
    /// Builds a point, rejecting NaN and infinite coordinates.
    pub fn new(coords: Vec<f64>) -> Result<Self, SpaceError> {
        check_finite(&coords)?;
        Ok(Point(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl DualPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self, SpaceError> {
        check_finite(&coords)?;
        Ok(DualPoint(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        DualPoint(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

fn check_finite(coords: &[f64]) -> Result<(), SpaceError> {
    match coords.iter().position(|c| !c.is_finite()) {
        Some(i) => Err(SpaceError::NonFinite(i)),
        None => Ok(()),
    }
}

/// A finite-dimensional space with one of the supported geometries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Space {
    dim: usize,
    geometry: Geometry,
}

impl Space {
    /// Euclidean space of the given dimension.
    pub fn hilbert(dim: usize) -> Result<Self, SpaceError> {
        if dim == 0 {
            return Err(SpaceError::InvalidSpace("dimension must be positive".into()));
        }
        Ok(Space { dim, geometry: Geometry::Hilbert })
    }

    /// ℓ_p space of the given dimension, `p ∈ (1, ∞)` strictly.
    pub fn lp(p: f64, dim: usize) -> Result<Self, SpaceError> {
        if dim == 0 {
            return Err(SpaceError::InvalidSpace("dimension must be positive".into()));
        }
        if !p.is_finite() || p <= 1.0 {
            return Err(SpaceError::InvalidSpace(format!(
                "lp exponent must lie strictly between 1 and infinity, got {p}"
            )));
        }
        Ok(Space { dim, geometry: Geometry::Lp { p } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    /// The norm exponent: 2 for Hilbert, p for ℓ_p.
    pub fn exponent(&self) -> f64 {
        match self.geometry {
            Geometry::Hilbert => 2.0,
            Geometry::Lp { p } => p,
        }
    }

    /// The conjugate exponent q with 1/p + 1/q = 1.
    pub fn conjugate_exponent(&self) -> f64 {
        let p = self.exponent();
        p / (p - 1.0)
    }

    pub fn norm(&self, x: &Point) -> f64 {
        match self.geometry {
            Geometry::Hilbert => l2_norm(&x.0),
            Geometry::Lp { p } => lp_norm(&x.0, p),
        }
    }

    pub fn dual_norm(&self, w: &DualPoint) -> f64 {
        match self.geometry {
            Geometry::Hilbert => l2_norm(&w.0),
            Geometry::Lp { .. } => lp_norm(&w.0, self.conjugate_exponent()),
        }
    }

    /// Duality pairing `⟨x, w⟩` (coordinate dot product).
    pub fn pair(&self, x: &Point, w: &DualPoint) -> Result<f64, SpaceError> {
        self.check_dim(x.dim())?;
        self.check_dim(w.dim())?;
        Ok(dot(&x.0, &w.0))
    }

    /// The normalized duality map `J : E → E*`.
    ///
    /// Satisfies `⟨x, Jx⟩ = ‖x‖²` and `‖Jx‖_* = ‖x‖`; maps 0 to 0.
    pub fn duality_map(&self, x: &Point) -> DualPoint {
        self.assert_dim(x.dim());
        match self.geometry {
            Geometry::Hilbert => DualPoint(x.0.clone()),
            Geometry::Lp { p } => DualPoint(power_map(&x.0, p)),
        }
    }

    /// The inverse duality map `J* = J⁻¹ : E* → E`, i.e. the duality map of
    /// the conjugate space applied to dual coordinates.
    pub fn inverse_duality_map(&self, w: &DualPoint) -> Point {
        self.assert_dim(w.dim());
        match self.geometry {
            Geometry::Hilbert => Point(w.0.clone()),
            Geometry::Lp { .. } => Point(power_map(&w.0, self.conjugate_exponent())),
        }
    }

    /// Lyapunov functional `φ(x, y) = ‖x‖² − 2⟨x, Jy⟩ + ‖y‖²`.
    ///
    /// Nonnegative up to rounding; in the Hilbert geometry it equals
    /// `‖x − y‖²`.
    pub fn lyapunov(&self, x: &Point, y: &Point) -> Result<f64, SpaceError> {
        self.check_dim(x.dim())?;
        self.check_dim(y.dim())?;
        let jy = self.duality_map(y);
        let nx = self.norm(x);
        let ny = self.norm(y);
        Ok(nx * nx - 2.0 * dot(&x.0, &jy.0) + ny * ny)
    }

    /// Dual Lyapunov functional
    /// `φ*(w, w') = ‖w‖_*² − 2⟨J*w', w⟩ + ‖w'‖_*²`,
    /// which satisfies `φ*(Jz, Jx) = φ(x, z)`.
    pub fn dual_lyapunov(&self, w: &DualPoint, w2: &DualPoint) -> Result<f64, SpaceError> {
        self.check_dim(w.dim())?;
        self.check_dim(w2.dim())?;
        let jw2 = self.inverse_duality_map(w2);
        let nw = self.dual_norm(w);
        let nw2 = self.dual_norm(w2);
        Ok(nw * nw - 2.0 * dot(&jw2.0, &w.0) + nw2 * nw2)
    }

    /// Distance induced by the norm.
    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        self.assert_dim(x.dim());
        self.assert_dim(y.dim());
        match self.geometry {
            Geometry::Hilbert => l2_norm(&sub(&x.0, &y.0)),
            Geometry::Lp { p } => lp_norm(&sub(&x.0, &y.0), p),
        }
    }

    fn check_dim(&self, got: usize) -> Result<(), SpaceError> {
        if got != self.dim {
            Err(SpaceError::DimensionMismatch { expected: self.dim, got })
        } else {
            Ok(())
        }
    }

    fn assert_dim(&self, got: usize) {
        assert_eq!(got, self.dim, "vector dimension {} does not match space dimension {}", got, self.dim);
    }
}

/// `w_i = s · (|x_i| / s)^{e−1} · sign(x_i)` with `s` the relevant norm:
/// the shared form of the duality map of ℓ_e. Written with the normalized
/// ratio so tiny and large vectors stay well scaled.
fn power_map(xs: &[f64], e: f64) -> Vec<f64> {
    if e == 2.0 {
        // ℓ_2: the map is the identity on coordinates. Taking this exactly
        // (rather than through powf) keeps the p = 2 backend bit-identical
        // to the Hilbert one.
        return xs.to_vec();
    }
    let s = lp_norm(xs, e);
    if s == 0.0 {
        return vec![0.0; xs.len()];
    }
    xs.iter()
        .map(|&xi| {
            let mag = (xi.abs() / s).powf(e - 1.0) * s;
            if xi < 0.0 {
                -mag
            } else if xi > 0.0 {
                mag
            } else {
                0.0
            }
        })
        .collect()
}

pub(crate) fn lp_norm(xs: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        return l2_norm(xs);
    }
    let s: f64 = xs.iter().map(|a| a.abs().powf(p)).sum();
    s.powf(1.0 / p)
}

pub(crate) fn l2_norm(xs: &[f64]) -> f64 {
    xs.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub(crate) fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s·b`.
pub(crate) fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}
