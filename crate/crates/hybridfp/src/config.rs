//! JSON run configuration: problem selection, algorithm parameters, solver
//! settings, and output paths.
//!
//! The schema is strict — unknown fields are rejected so a typo cannot
//! silently fall back to a default. A problem is either one of the built-ins
//! addressed by name, or an inline definition assembled from a small catalog
//! of parametric forms (affine operator, scaled duality map, truncated shift
//! family, scaled-pairing bifunction). See `docs/config_schema.md` for the
//! published schema with examples.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::iteration::{AlgorithmParams, RRule};
use crate::problem::{
    mat_vec, solve_linear, truncated_shift_family, AlphaRule, Bifunction, MapFamily,
    MonotoneOperator, ProblemInstance,
};
use crate::sets::BaseSet;
use crate::solvers::SolverSettings;
use crate::space::{DualPoint, Point, Space};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Top-level run configuration.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub params: ParamsConfig,
    #[serde(default)]
    pub settings: SolverSettings,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Builtin(BuiltinConfig),
    Inline(InlineProblem),
}

/// Parameters of a named built-in. `p`, `dim` and `alpha_rule` configure
/// "paper-example"; `matrix`, `offset` and `feasible_set` configure
/// "hilbert-affine-vi". Supplying a field the chosen built-in does not use
/// is rejected.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinConfig {
    pub name: String,
    pub p: Option<f64>,
    pub dim: Option<usize>,
    pub alpha_rule: Option<AlphaRule>,
    pub matrix: Option<Vec<Vec<f64>>>,
    pub offset: Option<Vec<f64>>,
    pub feasible_set: Option<BaseSet>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProblem {
    pub name: Option<String>,
    pub space: SpaceConfig,
    pub feasible_set: BaseSet,
    #[serde(default)]
    pub operators: Vec<OperatorConfig>,
    #[serde(default)]
    pub bifunctions: Vec<BifunctionConfig>,
    pub maps: Option<MapFamilyConfig>,
    #[serde(default)]
    pub known_solutions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceConfig {
    Hilbert { dim: usize },
    Lp { p: f64, dim: usize },
}

/// The operator catalog. Config validation is structural only — a negative
/// scale or a non-monotone matrix parses fine and is the job of problem
/// verification to reject, so broken definitions can be exercised as
/// negative controls.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    /// `A(x) = M x + c`; monotone iff `M` is positive semidefinite.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// `A(x) = scale · Jx`; monotone iff `scale ≥ 0`.
    ScaledDualityMap { scale: f64 },
}

/// The bifunction catalog.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BifunctionConfig {
    /// `f(w, w') = scale · ⟨J*w, w' − w⟩` — the operator form with
    /// `G = scale · J*`. Monotone iff `scale ≥ 0`.
    ScaledPairing { scale: f64 },
}

/// The map-family catalog.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapFamilyConfig {
    Identity,
    TruncatedShift { alpha_rule: Option<AlphaRule> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default = "default_alpha")]
    pub alpha: [f64; 3],
    #[serde(default = "default_r_rule")]
    pub r_rule: RRule,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    pub anchor: Vec<f64>,
}

fn default_alpha() -> [f64; 3] {
    [1.0 / 3.0; 3]
}
fn default_r_rule() -> RRule {
    RRule::Constant { value: 1.0 }
}
fn default_a() -> f64 {
    1.0
}
fn default_max_iters() -> usize {
    1000
}
fn default_stop_tol() -> f64 {
    1e-8
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsConfig {
    pub trace_csv: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    Ok(serde_json::from_str(text)?)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

impl RunConfig {
    /// Builds the runnable pieces. Structural errors (wrong dimensions,
    /// unknown built-in names, fields a built-in does not use) surface here;
    /// algorithm-parameter violations surface from the run itself.
    pub fn instantiate(&self) -> Result<(ProblemInstance, AlgorithmParams, SolverSettings), ConfigError> {
        let instance = match &self.problem {
            ProblemConfig::Builtin(b) => instantiate_builtin(b)?,
            ProblemConfig::Inline(i) => instantiate_inline(i)?,
        };
        let anchor = Point::new(self.params.anchor.clone())
            .map_err(|e| invalid(format!("anchor: {e}")))?;
        let params = AlgorithmParams {
            alpha: self.params.alpha,
            r_rule: self.params.r_rule,
            a: self.params.a,
            max_iters: self.params.max_iters,
            stop_tol: self.params.stop_tol,
            anchor,
        };
        self.settings.validate().map_err(|e| invalid(e.to_string()))?;
        Ok((instance, params, self.settings.clone()))
    }
}

fn instantiate_builtin(b: &BuiltinConfig) -> Result<ProblemInstance, ConfigError> {
    match b.name.as_str() {
        "paper-example" => {
            reject_unused(
                &b.name,
                &[("matrix", b.matrix.is_some()), ("offset", b.offset.is_some()), ("feasible_set", b.feasible_set.is_some())],
            )?;
            let p = b.p.ok_or_else(|| invalid("built-in 'paper-example' requires 'p'"))?;
            let dim = b.dim.ok_or_else(|| invalid("built-in 'paper-example' requires 'dim'"))?;
            let rule = b.alpha_rule.unwrap_or(AlphaRule::Harmonic);
            crate::problem::example_problem(p, dim, rule).map_err(|e| invalid(e.to_string()))
        }
        "hilbert-affine-vi" => {
            reject_unused(
                &b.name,
                &[("p", b.p.is_some()), ("dim", b.dim.is_some()), ("alpha_rule", b.alpha_rule.is_some())],
            )?;
            let matrix = b
                .matrix
                .clone()
                .ok_or_else(|| invalid("built-in 'hilbert-affine-vi' requires 'matrix'"))?;
            let offset = b
                .offset
                .clone()
                .ok_or_else(|| invalid("built-in 'hilbert-affine-vi' requires 'offset'"))?;
            let feasible = b
                .feasible_set
                .clone()
                .ok_or_else(|| invalid("built-in 'hilbert-affine-vi' requires 'feasible_set'"))?;
            crate::problem::hilbert_affine_vi_problem(matrix, offset, feasible)
                .map_err(|e| invalid(e.to_string()))
        }
        other => Err(invalid(format!(
            "unknown built-in '{other}'; available: \"paper-example\", \"hilbert-affine-vi\""
        ))),
    }
}

fn reject_unused(name: &str, fields: &[(&str, bool)]) -> Result<(), ConfigError> {
    for (field, present) in fields {
        if *present {
            return Err(invalid(format!("built-in '{name}' does not use the field '{field}'")));
        }
    }
    Ok(())
}

fn instantiate_inline(i: &InlineProblem) -> Result<ProblemInstance, ConfigError> {
    let space = match i.space {
        SpaceConfig::Hilbert { dim } => Space::hilbert(dim),
        SpaceConfig::Lp { p, dim } => Space::lp(p, dim),
    }
    .map_err(|e| invalid(e.to_string()))?;
    i.feasible_set.validate(&space).map_err(|e| invalid(e.to_string()))?;

    let operators = i
        .operators
        .iter()
        .enumerate()
        .map(|(k, op)| build_operator(k, op, &space))
        .collect::<Result<Vec<_>, _>>()?;
    let bifunctions = i
        .bifunctions
        .iter()
        .enumerate()
        .map(|(k, bf)| build_bifunction(k, bf, &space))
        .collect::<Result<Vec<_>, _>>()?;

    let maps = match &i.maps {
        None | Some(MapFamilyConfig::Identity) => MapFamily::identity(&space),
        Some(MapFamilyConfig::TruncatedShift { alpha_rule }) => {
            truncated_shift_family(&space, alpha_rule.unwrap_or(AlphaRule::Harmonic))
                .map_err(|e| invalid(e.to_string()))?
        }
    };

    let known_solutions = i
        .known_solutions
        .iter()
        .map(|v| Point::new(v.clone()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| invalid(format!("known solution: {e}")))?;

    let instance = ProblemInstance {
        name: i.name.clone().unwrap_or_else(|| "inline".into()),
        space,
        feasible: i.feasible_set.clone(),
        operators,
        bifunctions,
        maps,
        known_solutions,
    };
    instance.validate().map_err(|e| invalid(e.to_string()))?;
    Ok(instance)
}

fn build_operator(k: usize, op: &OperatorConfig, space: &Space) -> Result<MonotoneOperator, ConfigError> {
    match op {
        OperatorConfig::Affine { matrix, offset } => {
            let d = space.dim();
            if matrix.len() != d || matrix.iter().any(|row| row.len() != d) || offset.len() != d {
                return Err(invalid(format!(
                    "operator {k}: affine matrix/offset must be {d}×{d} and length {d}"
                )));
            }
            let m = matrix.clone();
            let c = offset.clone();
            let mut built = MonotoneOperator::new(
                format!("affine-{k}"),
                Arc::new(move |x: &Point| DualPoint(crate::space::add(&mat_vec(&m, x.coords()), &c))),
            );
            if space.exponent() == 2.0 {
                // (I + rM) z = x − rc has a direct solution only when J is
                // the identity.
                let m = matrix.clone();
                let c = offset.clone();
                built = built.with_closed_form(Arc::new(move |x: &Point, r: f64| {
                    let d = x.dim();
                    let mut a = vec![vec![0.0; d]; d];
                    for i in 0..d {
                        for j in 0..d {
                            a[i][j] = r * m[i][j] + if i == j { 1.0 } else { 0.0 };
                        }
                    }
                    let rhs: Vec<f64> =
                        x.coords().iter().zip(&c).map(|(xi, ci)| xi - r * ci).collect();
                    match solve_linear(a, rhs) {
                        Some(z) => Point(z),
                        None => x.clone(),
                    }
                }));
            }
            Ok(built)
        }
        OperatorConfig::ScaledDualityMap { scale } => {
            let s = *scale;
            if !s.is_finite() {
                return Err(invalid(format!(
                    "operator {k}: scaled duality map needs a finite scale, got {s}"
                )));
            }
            let sp = space.clone();
            let mut built = MonotoneOperator::new(
                format!("scaled-duality-{k}"),
                Arc::new(move |x: &Point| {
                    DualPoint(sp.duality_map(x).coords().iter().map(|w| s * w).collect())
                }),
            );
            if s >= 0.0 {
                built = built.with_closed_form(Arc::new(move |x: &Point, r: f64| {
                    // s·Ju + (Ju − Jx)/r = 0 ⇒ Ju = Jx/(1 + rs) ⇒ u = x/(1 + rs).
                    Point(x.coords().iter().map(|c| c / (1.0 + r * s)).collect())
                }));
            }
            Ok(built)
        }
    }
}

fn build_bifunction(k: usize, bf: &BifunctionConfig, space: &Space) -> Result<Bifunction, ConfigError> {
    match bf {
        BifunctionConfig::ScaledPairing { scale } => {
            let s = *scale;
            if !s.is_finite() {
                return Err(invalid(format!(
                    "bifunction {k}: scaled pairing needs a finite scale, got {s}"
                )));
            }
            let sp = space.clone();
            let sp2 = space.clone();
            let mut built = Bifunction::new(
                format!("scaled-pairing-{k}"),
                Arc::new(move |w: &DualPoint, w2: &DualPoint| {
                    let g = sp.inverse_duality_map(w);
                    s * crate::space::dot(g.coords(), &crate::space::sub(w2.coords(), w.coords()))
                }),
            )
            .with_operator_form(Arc::new(move |w: &DualPoint| {
                Point(sp2.inverse_duality_map(w).coords().iter().map(|g| s * g).collect())
            }));
            if s >= 0.0 {
                built = built.with_closed_form(Arc::new(move |x: &Point, r: f64| {
                    Point(x.coords().iter().map(|c| c / (1.0 + r * s)).collect())
                }));
            }
            Ok(built)
        }
    }
}
