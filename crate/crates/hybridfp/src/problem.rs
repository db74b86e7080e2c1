//! Problem ingredients and the built-in instances.
//!
//! A [`ProblemInstance`] bundles everything the outer iteration consumes: the
//! space, the feasible set, a family of monotone operators, a family of
//! bifunctions, a map family `{T_n}` with its limit maps, and any known
//! common solutions. Two built-ins cover the test surface:
//!
//! * [`example_problem`] — the shift-map instance on the unit ℓ_p ball, whose
//!   unique common solution is the origin;
//! * [`hilbert_affine_vi_problem`] — an affine variational inequality in
//!   Euclidean space with a linear-solve resolvent.
//!
//! [`verify_problem`] spot-checks the structural assumptions (bifunction
//! axioms, operator monotonicity, map-family nonexpansiveness) on random
//! feasible samples and reports worst violations per property.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::par::map_collect;
use crate::sets::{BaseSet, SetError};
use crate::space::{dot, sub, DualPoint, Point, Space, SpaceError};
use crate::tol;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cyclic index is undefined for an empty family")]
    EmptyFamily,
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

type OperatorFn = Arc<dyn Fn(&Point) -> DualPoint + Send + Sync>;
type DualToPrimalFn = Arc<dyn Fn(&DualPoint) -> Point + Send + Sync>;
type ResolventFn = Arc<dyn Fn(&Point, f64) -> Point + Send + Sync>;
type BifunctionFn = Arc<dyn Fn(&DualPoint, &DualPoint) -> f64 + Send + Sync>;
type MemberFn = Arc<dyn Fn(usize, &Point) -> DualPoint + Send + Sync>;
type LimitMapFn = Arc<dyn Fn(&Point) -> DualPoint + Send + Sync>;

/// A monotone operator `A : C → E*`, optionally with a closed-form
/// regularized resolvent `x ↦ z` solving `A(z) + (Jz − Jx)/r = 0`.
#[derive(Clone)]
pub struct MonotoneOperator {
    pub name: String,
    eval: OperatorFn,
    closed_form_resolvent: Option<ResolventFn>,
}

impl MonotoneOperator {
    pub fn new(name: impl Into<String>, eval: OperatorFn) -> Self {
        MonotoneOperator { name: name.into(), eval, closed_form_resolvent: None }
    }

    pub fn with_closed_form(mut self, f: ResolventFn) -> Self {
        self.closed_form_resolvent = Some(f);
        self
    }

    pub fn evaluate(&self, x: &Point) -> DualPoint {
        (self.eval)(x)
    }

    /// The closed-form resolvent candidate, if one was supplied. Callers must
    /// still validate it (interior condition) before trusting it.
    pub fn closed_form(&self, x: &Point, r: f64) -> Option<Point> {
        self.closed_form_resolvent.as_ref().map(|f| f(x, r))
    }
}

impl fmt::Debug for MonotoneOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneOperator")
            .field("name", &self.name)
            .field("closed_form", &self.closed_form_resolvent.is_some())
            .finish()
    }
}

/// A bifunction `f : E* × E* → ℝ` on dual coordinates.
///
/// When `f` has the operator form `f(w, w') = ⟨G(w), w' − w⟩` the generic
/// iterative resolvent can be used; otherwise a closed-form resolvent must be
/// supplied.
#[derive(Clone)]
pub struct Bifunction {
    pub name: String,
    eval: BifunctionFn,
    operator_form: Option<DualToPrimalFn>,
    closed_form_resolvent: Option<ResolventFn>,
}

impl Bifunction {
    pub fn new(name: impl Into<String>, eval: BifunctionFn) -> Self {
        Bifunction { name: name.into(), eval, operator_form: None, closed_form_resolvent: None }
    }

    pub fn with_operator_form(mut self, g: DualToPrimalFn) -> Self {
        self.operator_form = Some(g);
        self
    }

    pub fn with_closed_form(mut self, f: ResolventFn) -> Self {
        self.closed_form_resolvent = Some(f);
        self
    }

    pub fn evaluate(&self, w: &DualPoint, w2: &DualPoint) -> f64 {
        (self.eval)(w, w2)
    }

    pub fn operator_form(&self) -> Option<&DualToPrimalFn> {
        self.operator_form.as_ref()
    }

    pub fn closed_form(&self, x: &Point, r: f64) -> Option<Point> {
        self.closed_form_resolvent.as_ref().map(|f| f(x, r))
    }
}

impl fmt::Debug for Bifunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Bifunction")
            .field("name", &self.name)
            .field("operator_form", &self.operator_form.is_some())
            .field("closed_form", &self.closed_form_resolvent.is_some())
            .finish()
    }
}

/// The family `{T_n}` of maps `E → E*`, together with its limit maps and any
/// known points `p` with `T(p) = J(p)` for every limit map `T`.
#[derive(Clone)]
pub struct MapFamily {
    member: MemberFn,
    limit_maps: Vec<LimitMapFn>,
    known_j_fixed_points: Vec<Point>,
}

impl MapFamily {
    pub fn new(member: MemberFn, limit_maps: Vec<LimitMapFn>, known_j_fixed_points: Vec<Point>) -> Self {
        MapFamily { member, limit_maps, known_j_fixed_points }
    }

    /// The identity family `T_n = J` for every `n`; its limit map is `J`,
    /// so every point is a J-fixed point.
    pub fn identity(space: &Space) -> Self {
        let sp = space.clone();
        let sp2 = space.clone();
        MapFamily {
            member: Arc::new(move |_n, x| sp.duality_map(x)),
            limit_maps: vec![Arc::new(move |x: &Point| sp2.duality_map(x))],
            known_j_fixed_points: vec![Point::zeros(space.dim())],
        }
    }

    /// Evaluates `T_n(x)`, `n ≥ 1`.
    pub fn member(&self, n: usize, x: &Point) -> DualPoint {
        debug_assert!(n >= 1, "map family members are one-indexed");
        (self.member)(n, x)
    }

    pub fn limit_maps(&self) -> &[LimitMapFn] {
        &self.limit_maps
    }

    pub fn known_j_fixed_points(&self) -> &[Point] {
        &self.known_j_fixed_points
    }
}

impl fmt::Debug for MapFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MapFamily")
            .field("limit_maps", &self.limit_maps.len())
            .field("known_j_fixed_points", &self.known_j_fixed_points.len())
            .finish()
    }
}

/// Rule producing the mixing weight `α_n ∈ (0, 1/2]` of the shift-map family.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaRule {
    /// `α_n = 1/(n+2)` — the default.
    Harmonic,
    /// A constant weight; must lie in `(0, 1/2]` so that `1 − α_n ≥ 1/2`.
    Constant { value: f64 },
}

impl AlphaRule {
    pub fn alpha(&self, n: usize) -> f64 {
        match self {
            AlphaRule::Harmonic => 1.0 / (n as f64 + 2.0),
            AlphaRule::Constant { value } => *value,
        }
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        if let AlphaRule::Constant { value } = self {
            if !value.is_finite() || *value <= 0.0 || *value > 0.5 {
                return Err(ProblemError::Invalid(format!(
                    "constant map-family weight must lie in (0, 0.5] so that 1 − α_n ≥ 1/2, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// A fully assembled problem: the inputs of one run.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub name: String,
    pub space: Space,
    pub feasible: BaseSet,
    pub operators: Vec<MonotoneOperator>,
    pub bifunctions: Vec<Bifunction>,
    pub maps: MapFamily,
    pub known_solutions: Vec<Point>,
}

impl ProblemInstance {
    /// Structural validation: feasible set matches the space, known solutions
    /// are feasible and of the right dimension.
    pub fn validate(&self) -> Result<(), ProblemError> {
        self.feasible.validate(&self.space)?;
        for (i, p) in self.known_solutions.iter().enumerate() {
            if p.dim() != self.space.dim() {
                return Err(ProblemError::Invalid(format!(
                    "known solution {i} has dimension {}, space has {}",
                    p.dim(),
                    self.space.dim()
                )));
            }
            if !self.feasible.contains(&self.space, p, tol::MEMBERSHIP.max(1e-9)) {
                return Err(ProblemError::Invalid(format!("known solution {i} is not feasible")));
            }
        }
        for (i, p) in self.maps.known_j_fixed_points().iter().enumerate() {
            if p.dim() != self.space.dim() {
                return Err(ProblemError::Invalid(format!(
                    "known J-fixed point {i} has dimension {}, space has {}",
                    p.dim(),
                    self.space.dim()
                )));
            }
        }
        Ok(())
    }
}

/// One-based cyclic family index: step `n` uses member `((n−1) mod count) + 1`.
pub fn cyclic_operator_index(n: usize, count: usize) -> Result<usize, ProblemError> {
    if count == 0 {
        return Err(ProblemError::EmptyFamily);
    }
    debug_assert!(n >= 1);
    Ok(((n - 1) % count) + 1)
}

/// The family `T_n = α_n J + (1 − α_n) T` built on the truncated right shift
/// `T(x) = J(0, x_1, …, x_{d−1})`. Its limit map is `T` itself, whose only
/// J-fixed point is the origin.
pub fn truncated_shift_family(space: &Space, alpha_rule: AlphaRule) -> Result<MapFamily, ProblemError> {
    if space.dim() < 2 {
        return Err(ProblemError::Invalid(format!(
            "the truncated shift needs dimension ≥ 2, got {}",
            space.dim()
        )));
    }
    alpha_rule.validate()?;
    let sp = space.clone();
    let shift = move |x: &Point| -> DualPoint {
        let mut shifted = vec![0.0; x.dim()];
        shifted[1..].copy_from_slice(&x.coords()[..x.dim() - 1]);
        sp.duality_map(&Point(shifted))
    };
    let limit_shift = shift.clone();
    let sp = space.clone();
    let rule = alpha_rule;
    let member: MemberFn = Arc::new(move |n: usize, x: &Point| {
        let a = rule.alpha(n);
        let jx = sp.duality_map(x);
        let tx = shift(x);
        DualPoint(
            jx.coords()
                .iter()
                .zip(tx.coords())
                .map(|(j, t)| a * j + (1.0 - a) * t)
                .collect(),
        )
    });
    Ok(MapFamily::new(member, vec![Arc::new(limit_shift)], vec![Point::zeros(space.dim())]))
}

/// The shift-map instance on the unit ℓ_p ball in dimension `d ≥ 2`.
///
/// * operator `A = J`,
/// * bifunction `f(w, w') = ⟨J*w, w' − w⟩`,
/// * map family `T_n = α_n J + (1 − α_n) T` with
///   `T(x) = J(0, x_1, …, x_{d−1})` (coordinates shifted right, last dropped),
/// * known common solution: the origin.
///
/// Both resolvents have the closed form `z = x/(1+r)`, exact at every `p`.
pub fn example_problem(p: f64, d: usize, alpha_rule: AlphaRule) -> Result<ProblemInstance, ProblemError> {
    if d < 2 {
        return Err(ProblemError::Invalid(format!("shift-map instance needs dimension ≥ 2, got {d}")));
    }
    alpha_rule.validate()?;
    let space = Space::lp(p, d)?;
    let feasible = BaseSet::Ball { center: vec![0.0; d], radius: 1.0 };

    let sp = space.clone();
    let operator = MonotoneOperator::new(
        "duality-map",
        Arc::new(move |x: &Point| sp.duality_map(x)),
    )
    .with_closed_form(Arc::new(|x: &Point, r: f64| {
        Point(x.coords().iter().map(|c| c / (1.0 + r)).collect())
    }));

    let sp = space.clone();
    let sp2 = space.clone();
    let bifunction = Bifunction::new(
        "dual-pairing",
        Arc::new(move |w: &DualPoint, w2: &DualPoint| {
            dot(sp.inverse_duality_map(w).coords(), &sub(w2.coords(), w.coords()))
        }),
    )
    .with_operator_form(Arc::new(move |w: &DualPoint| sp2.inverse_duality_map(w)))
    .with_closed_form(Arc::new(|x: &Point, r: f64| {
        Point(x.coords().iter().map(|c| c / (1.0 + r)).collect())
    }));

    let maps = truncated_shift_family(&space, alpha_rule)?;

    Ok(ProblemInstance {
        name: "paper-example".into(),
        space,
        feasible,
        operators: vec![operator],
        bifunctions: vec![bifunction],
        maps,
        known_solutions: vec![Point::zeros(d)],
    })
}

/// Affine variational inequality `A(x) = Mx + c` on a Euclidean feasible set,
/// with the identity map family and no bifunctions.
///
/// `M` must be positive semidefinite (checked by sampled quadratic forms).
/// The closed-form resolvent solves `(I + rM) z = x − r c`; the generic
/// solver takes over when that point is not interior to the feasible set.
pub fn hilbert_affine_vi_problem(
    matrix: Vec<Vec<f64>>,
    offset: Vec<f64>,
    feasible: BaseSet,
) -> Result<ProblemInstance, ProblemError> {
    let d = offset.len();
    if d == 0 || matrix.len() != d || matrix.iter().any(|row| row.len() != d) {
        return Err(ProblemError::Invalid(format!(
            "matrix must be square of the offset dimension {d}"
        )));
    }
    if matrix.iter().flatten().chain(offset.iter()).any(|v| !v.is_finite()) {
        return Err(ProblemError::Invalid("matrix or offset has non-finite entries".into()));
    }
    let space = Space::hilbert(d)?;
    feasible.validate(&space)?;

    // Sampled positive-semidefiniteness of the symmetric part: coordinate
    // directions plus pseudo-random unit vectors.
    let scale = matrix.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_9ad5);
    let mut probes: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e
        })
        .collect();
    for _ in 0..64 {
        use rand::Rng;
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = crate::space::l2_norm(&v);
        if n > 0.0 {
            probes.push(v.iter().map(|a| a / n).collect());
        }
    }
    for v in &probes {
        let mv = mat_vec(&matrix, v);
        if dot(v, &mv) < -1e-10 * scale {
            return Err(ProblemError::Invalid(
                "matrix is not positive semidefinite (sampled quadratic form is negative)".into(),
            ));
        }
    }

    let m = matrix.clone();
    let c = offset.clone();
    let operator = MonotoneOperator::new(
        "affine",
        Arc::new(move |x: &Point| DualPoint(crate::space::add(&mat_vec(&m, x.coords()), &c))),
    )
    .with_closed_form({
        let m = matrix.clone();
        let c = offset.clone();
        Arc::new(move |x: &Point, r: f64| {
            let d = x.dim();
            let mut a = vec![vec![0.0; d]; d];
            for i in 0..d {
                for j in 0..d {
                    a[i][j] = r * m[i][j] + if i == j { 1.0 } else { 0.0 };
                }
            }
            let rhs: Vec<f64> = x.coords().iter().zip(&c).map(|(xi, ci)| xi - r * ci).collect();
            // I + rM is invertible for PSD M and r > 0.
            Point(solve_linear(a, rhs).expect("I + rM is nonsingular for PSD M"))
        })
    });

    let zero = Point::zeros(d);
    let zero_is_solution =
        offset.iter().all(|c| *c == 0.0) && feasible.contains(&space, &zero, tol::MEMBERSHIP);
    Ok(ProblemInstance {
        name: "hilbert-affine-vi".into(),
        space: space.clone(),
        feasible,
        operators: vec![operator],
        bifunctions: vec![],
        maps: MapFamily::identity(&space),
        known_solutions: if zero_is_solution { vec![zero] } else { vec![] },
    })
}

pub(crate) fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Gaussian elimination with partial pivoting; `None` on a (numerically)
/// singular system. Consumes its arguments: callers pass owned copies.
pub(crate) fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Outcome of one sampled structural property.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub samples_checked: usize,
    pub passed: bool,
}

impl PropertyCheck {
    fn new(name: String, worst_violation: f64, tolerance: f64, samples_checked: usize) -> Self {
        let passed = worst_violation <= tolerance;
        PropertyCheck { name, worst_violation, tolerance, samples_checked, passed }
    }
}

/// Report of [`verify_problem`]: one entry per sampled property.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct VerificationReport {
    pub checks: Vec<PropertyCheck>,
    pub passed: bool,
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {} (worst violation {:.3e}, tol {:.1e}, {} samples)",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.worst_violation,
                c.tolerance,
                c.samples_checked
            )?;
        }
        write!(f, "overall: {}", if self.passed { "pass" } else { "FAIL" })
    }
}

/// Spot-checks the structural assumptions of `instance` on `samples` random
/// feasible points. Failures are reported, never thrown. Deterministic for a
/// fixed `rng_seed`.
pub fn verify_problem(instance: &ProblemInstance, samples: usize, rng_seed: u64) -> VerificationReport {
    let samples = samples.max(1);
    let sp = &instance.space;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    // All randomness is drawn up front, sequentially, so the report does not
    // depend on how the checks are scheduled.
    let xs: Vec<Point> = (0..samples).map(|_| instance.feasible.sample(sp, &mut rng)).collect();
    let ys: Vec<Point> = (0..samples).map(|_| instance.feasible.sample(sp, &mut rng)).collect();
    let zs: Vec<Point> = (0..samples).map(|_| instance.feasible.sample(sp, &mut rng)).collect();
    let ws: Vec<DualPoint> = xs.iter().map(|x| sp.duality_map(x)).collect();
    let w2s: Vec<DualPoint> = ys.iter().map(|y| sp.duality_map(y)).collect();
    let w3s: Vec<DualPoint> = zs.iter().map(|z| sp.duality_map(z)).collect();
    let idx: Vec<usize> = (0..samples).collect();

    let mut checks = Vec::new();

    for (k, f) in instance.bifunctions.iter().enumerate() {
        let diag = map_collect(&idx, |&i| f.evaluate(&ws[i], &ws[i]).abs());
        checks.push(PropertyCheck::new(
            format!("bifunction[{k}] '{}' vanishes on the diagonal", f.name),
            fold_max(&diag),
            tol::BIFUNCTION_DIAGONAL,
            samples,
        ));

        let mono = map_collect(&idx, |&i| f.evaluate(&ws[i], &w2s[i]) + f.evaluate(&w2s[i], &ws[i]));
        checks.push(PropertyCheck::new(
            format!("bifunction[{k}] '{}' is monotone", f.name),
            fold_max(&mono),
            tol::PROBLEM_SAMPLED,
            samples,
        ));

        let convex = map_collect(&idx, |&i| {
            let mid = DualPoint(
                w2s[i].coords().iter().zip(w3s[i].coords()).map(|(a, b)| 0.5 * (a + b)).collect(),
            );
            f.evaluate(&ws[i], &mid)
                - 0.5 * (f.evaluate(&ws[i], &w2s[i]) + f.evaluate(&ws[i], &w3s[i]))
        });
        checks.push(PropertyCheck::new(
            format!("bifunction[{k}] '{}' is midpoint-convex in its second argument", f.name),
            fold_max(&convex),
            tol::PROBLEM_SAMPLED,
            samples,
        ));
    }

    for (k, a) in instance.operators.iter().enumerate() {
        let mono = map_collect(&idx, |&i| {
            let ax = a.evaluate(&xs[i]);
            let ay = a.evaluate(&ys[i]);
            -dot(&sub(xs[i].coords(), ys[i].coords()), &sub(ax.coords(), ay.coords()))
        });
        checks.push(PropertyCheck::new(
            format!("operator[{k}] '{}' is monotone", a.name),
            fold_max(&mono),
            tol::PROBLEM_SAMPLED,
            samples,
        ));
    }

    let fixed = instance.maps.known_j_fixed_points();
    if !fixed.is_empty() {
        for (k, t) in instance.maps.limit_maps().iter().enumerate() {
            let residuals: Vec<f64> = fixed
                .iter()
                .map(|p| {
                    let tp = t(p);
                    let jp = sp.duality_map(p);
                    sp.dual_norm(&DualPoint(sub(tp.coords(), jp.coords())))
                })
                .collect();
            checks.push(PropertyCheck::new(
                format!("limit map[{k}] fixes the known J-fixed points"),
                fold_max(&residuals),
                tol::IDENTITY_REL,
                fixed.len(),
            ));
        }

        // Nonexpansiveness in the Lyapunov sense, for a few family indices
        // and every limit map: φ(p, J*(T x)) ≤ φ(p, x).
        let family_indices = [1usize, 2, 3, 7, 50];
        let nonexp = map_collect(&idx, |&i| {
            let mut worst = f64::NEG_INFINITY;
            for p in fixed {
                let base = sp.lyapunov(p, &xs[i]).expect("dimensions fixed by construction");
                for &n in &family_indices {
                    let img = sp.inverse_duality_map(&instance.maps.member(n, &xs[i]));
                    worst = worst.max(sp.lyapunov(p, &img).unwrap() - base);
                }
                for t in instance.maps.limit_maps() {
                    let img = sp.inverse_duality_map(&t(&xs[i]));
                    worst = worst.max(sp.lyapunov(p, &img).unwrap() - base);
                }
            }
            worst
        });
        checks.push(PropertyCheck::new(
            "map family is generalized nonexpansive toward known J-fixed points".into(),
            fold_max(&nonexp),
            tol::PROBLEM_SAMPLED,
            samples,
        ));
    }

    let passed = checks.iter().all(|c| c.passed);
    VerificationReport { checks, passed }
}

fn fold_max(vals: &[f64]) -> f64 {
    vals.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
}
