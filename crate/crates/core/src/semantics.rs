//! Evaluation of outcome expressions to delay distributions.
//!
//! A [`BasicAssignment`] maps base-outcome names to [`DistributionSpec`]s
//! on a shared grid. [`evaluate`] folds an expression into a single
//! [`DeltaQ`] by structural recursion: `top` and `bot` become perfection
//! and failure by construction, assigned names are realized onto the grid,
//! and unassigned names evaluate to perfection (useful for
//! partially-specified designs, though the CLI warns since a typo looks
//! the same).

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deltaq::{DeltaQ, DeltaQError, Grid};
use crate::expr::OutcomeExpr;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SemanticsError {
    #[error("invalid distribution: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    DeltaQ(#[from] DeltaQError),
    #[error("invalid assignment file: {0}")]
    BadFile(String),
}

/// The shape of one base outcome's delay distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum DistKind {
    /// All tangible mass at one instant.
    Point { t: f64 },
    /// Tangible mass spread evenly over `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Exponential with the given rate.
    Exponential { rate: f64 },
    /// Piecewise-linear CDF through `(t, cumulative)` points; a final
    /// cumulative below one leaves the remainder completing at some finite
    /// time past the table, which realizes as overflow.
    Table { points: Vec<(f64, f64)> },
}

/// A distribution plus how much of the outcome simply never completes.
///
/// The tangible ("success") mass is `1 - intangible`. JSON accepts either
/// `"success"` or `"failure"`; tiny failure rates like `1e-16` must be
/// given as `"failure"` since `1 - 1e-16` is not representable.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    pub kind: DistKind,
    intangible: f64,
}

impl DistributionSpec {
    pub fn new(kind: DistKind, success: f64) -> Result<Self, SemanticsError> {
        Self::with_failure(kind, 1.0 - success)
    }

    /// Construct from the failure side, preserving tiny failure masses.
    pub fn with_failure(kind: DistKind, failure: f64) -> Result<Self, SemanticsError> {
        if !(0.0..=1.0).contains(&failure) {
            return Err(SemanticsError::InvalidSpec(format!(
                "failure mass must be in [0,1], got {failure}"
            )));
        }
        match &kind {
            DistKind::Point { t } => {
                if !(t.is_finite() && *t >= 0.0) {
                    return Err(SemanticsError::InvalidSpec(format!("point time must be >= 0, got {t}")));
                }
            }
            DistKind::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && hi >= lo) {
                    return Err(SemanticsError::InvalidSpec(format!(
                        "uniform needs 0 <= lo <= hi, got [{lo}, {hi}]"
                    )));
                }
            }
            DistKind::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(SemanticsError::InvalidSpec(format!("rate must be positive, got {rate}")));
                }
            }
            DistKind::Table { points } => {
                if points.is_empty() {
                    return Err(SemanticsError::InvalidSpec("table must not be empty".into()));
                }
                let mut prev = (0.0f64, 0.0f64);
                for &(t, p) in points {
                    if !(t.is_finite() && t >= prev.0 && (0.0..=1.0).contains(&p) && p >= prev.1) {
                        return Err(SemanticsError::InvalidSpec(format!(
                            "table must be nondecreasing in both coordinates with cumulative in [0,1]; offending point ({t}, {p})"
                        )));
                    }
                    prev = (t, p);
                }
            }
        }
        Ok(DistributionSpec { kind, intangible: failure })
    }

    pub fn point(t: f64, success: f64) -> Result<Self, SemanticsError> {
        Self::new(DistKind::Point { t }, success)
    }

    pub fn uniform(lo: f64, hi: f64, success: f64) -> Result<Self, SemanticsError> {
        Self::new(DistKind::Uniform { lo, hi }, success)
    }

    pub fn exponential(rate: f64, success: f64) -> Result<Self, SemanticsError> {
        Self::new(DistKind::Exponential { rate }, success)
    }

    pub fn table(points: Vec<(f64, f64)>, success: f64) -> Result<Self, SemanticsError> {
        Self::new(DistKind::Table { points }, success)
    }

    pub fn intangible(&self) -> f64 {
        self.intangible
    }

    pub fn success(&self) -> f64 {
        1.0 - self.intangible
    }

    /// The same shape made proper: all mass tangible.
    pub fn properised(&self) -> Result<Self, SemanticsError> {
        if self.intangible >= 1.0 {
            return Err(SemanticsError::DeltaQ(DeltaQError::ProperiseFailure));
        }
        Ok(DistributionSpec { kind: self.kind.clone(), intangible: 0.0 })
    }

    /// CDF of the tangible shape (before scaling by success); the value of
    /// the underlying proper distribution at `t`.
    fn shape_cdf(&self, t: f64) -> f64 {
        match &self.kind {
            DistKind::Point { t: t0 } => {
                if t >= *t0 {
                    1.0
                } else {
                    0.0
                }
            }
            DistKind::Uniform { lo, hi } => {
                if t < *lo {
                    0.0
                } else if t >= *hi {
                    1.0
                } else {
                    (t - lo) / (hi - lo)
                }
            }
            DistKind::Exponential { rate } => {
                if t <= 0.0 {
                    0.0
                } else {
                    -(-rate * t).exp_m1()
                }
            }
            DistKind::Table { points } => {
                let mut prev = (0.0f64, 0.0f64);
                for &(pt, pp) in points {
                    if t < pt {
                        if pt == prev.0 {
                            return prev.1;
                        }
                        let frac = (t - prev.0) / (pt - prev.0);
                        return prev.1 + frac * (pp - prev.1);
                    }
                    prev = (pt, pp);
                }
                prev.1
            }
        }
    }

    /// Bin the distribution onto the grid. `mass[k]` receives the tangible
    /// mass between consecutive lattice points, atoms land exactly on
    /// their lattice point, everything tangible past `t_max` (or past the
    /// table's last point) goes to overflow, and the intangible bucket is
    /// exactly the stored failure mass.
    pub fn realize(&self, grid: Grid) -> Result<DeltaQ, SemanticsError> {
        let success = 1.0 - self.intangible;
        let n = grid.n_bins();
        let mut mass = vec![0.0; n + 1];
        let overflow;
        match &self.kind {
            DistKind::Point { t } => {
                let atom = DeltaQ::atom(grid, *t)?;
                for (slot, m) in mass.iter_mut().zip(atom.mass()) {
                    *slot = m * success;
                }
                overflow = atom.overflow() * success;
            }
            _ => {
                let mut prev = 0.0;
                for (k, slot) in mass.iter_mut().enumerate() {
                    let f = self.shape_cdf(k as f64 * grid.dt());
                    *slot = (f - prev).max(0.0) * success;
                    prev = f;
                }
                overflow = (1.0 - prev).max(0.0) * success;
            }
        }
        Ok(DeltaQ::from_parts(grid, mass, overflow, self.intangible)?)
    }
}

// -- JSON ------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawKind {
    Point {
        t: f64,
        success: Option<f64>,
        failure: Option<f64>,
    },
    Uniform {
        lo: f64,
        hi: f64,
        success: Option<f64>,
        failure: Option<f64>,
    },
    Exponential {
        rate: f64,
        success: Option<f64>,
        failure: Option<f64>,
    },
    Table {
        points: Vec<RawPoint>,
        success: Option<f64>,
        failure: Option<f64>,
    },
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    t: f64,
    p: f64,
}

fn failure_mass(success: Option<f64>, failure: Option<f64>) -> Result<f64, SemanticsError> {
    match (success, failure) {
        (Some(_), Some(_)) => Err(SemanticsError::InvalidSpec(
            "give either \"success\" or \"failure\", not both".into(),
        )),
        (Some(s), None) => Ok(1.0 - s),
        (None, Some(f)) => Ok(f),
        (None, None) => Ok(0.0),
    }
}

impl<'de> Deserialize<'de> for DistributionSpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = RawKind::deserialize(de)?;
        let (kind, s, f) = match raw {
            RawKind::Point { t, success, failure } => (DistKind::Point { t }, success, failure),
            RawKind::Uniform { lo, hi, success, failure } => {
                (DistKind::Uniform { lo, hi }, success, failure)
            }
            RawKind::Exponential { rate, success, failure } => {
                (DistKind::Exponential { rate }, success, failure)
            }
            RawKind::Table { points, success, failure } => (
                DistKind::Table { points: points.into_iter().map(|p| (p.t, p.p)).collect() },
                success,
                failure,
            ),
        };
        let failure = failure_mass(s, f).map_err(serde::de::Error::custom)?;
        DistributionSpec::with_failure(kind, failure).map_err(serde::de::Error::custom)
    }
}

impl Serialize for DistributionSpec {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = ser.serialize_map(None)?;
        match &self.kind {
            DistKind::Point { t } => {
                map.serialize_entry("kind", "point")?;
                map.serialize_entry("t", t)?;
            }
            DistKind::Uniform { lo, hi } => {
                map.serialize_entry("kind", "uniform")?;
                map.serialize_entry("lo", lo)?;
                map.serialize_entry("hi", hi)?;
            }
            DistKind::Exponential { rate } => {
                map.serialize_entry("kind", "exponential")?;
                map.serialize_entry("rate", rate)?;
            }
            DistKind::Table { points } => {
                map.serialize_entry("kind", "table")?;
                let pts: Vec<RawPoint> = points.iter().map(|&(t, p)| RawPoint { t, p }).collect();
                map.serialize_entry("points", &pts)?;
            }
        }
        // The failure side round-trips exactly; the success side would not.
        map.serialize_entry("failure", &self.intangible)?;
        map.end()
    }
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    dt: f64,
    #[serde(rename = "tMax")]
    t_max: f64,
}

#[derive(Serialize, Deserialize)]
struct AssignmentFile {
    grid: GridSpec,
    outcomes: BTreeMap<String, DistributionSpec>,
}

/// Map from base-outcome names to distributions on a shared grid. Names
/// absent from the map are unassigned and evaluate to perfection. `top`
/// and `bot` are never entries; they get their semantics by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicAssignment {
    grid: Grid,
    outcomes: BTreeMap<String, DistributionSpec>,
}

impl BasicAssignment {
    pub fn new(grid: Grid) -> Self {
        BasicAssignment { grid, outcomes: BTreeMap::new() }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Replace the grid (e.g. from CLI overrides); the specs are
    /// re-realized lazily so no data is lost.
    pub fn set_grid(&mut self, grid: Grid) {
        self.grid = grid;
    }

    pub fn insert(&mut self, name: impl Into<String>, spec: DistributionSpec) {
        let name = name.into();
        // top and bot have their meaning by construction, never by entry
        debug_assert!(name != "top" && name != "bot", "reserved outcome name {name}");
        self.outcomes.insert(name, spec);
    }

    pub fn get(&self, name: &str) -> Option<&DistributionSpec> {
        self.outcomes.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.outcomes.keys()
    }

    /// Names appearing in `expr` that have no assignment (and will
    /// silently evaluate to perfection).
    pub fn unassigned_names(&self, expr: &OutcomeExpr) -> Vec<String> {
        expr.base_names()
            .into_iter()
            .filter(|n| !self.outcomes.contains_key(n))
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self, SemanticsError> {
        let file: AssignmentFile =
            serde_json::from_str(text).map_err(|e| SemanticsError::BadFile(e.to_string()))?;
        let grid = Grid::with_dt(file.grid.dt, file.grid.t_max)?;
        if file.outcomes.contains_key("top") || file.outcomes.contains_key("bot") {
            return Err(SemanticsError::BadFile(
                "`top` and `bot` are constant outcomes and cannot be assigned".into(),
            ));
        }
        Ok(BasicAssignment { grid, outcomes: file.outcomes })
    }

    pub fn to_json(&self) -> String {
        let file = AssignmentFile {
            grid: GridSpec { dt: self.grid.dt(), t_max: self.grid.t_max() },
            outcomes: self.outcomes.clone(),
        };
        serde_json::to_string_pretty(&file).expect("assignment serialization cannot fail")
    }
}

/// Evaluate an outcome expression to its delay distribution under a basic
/// assignment.
///
/// Structural recursion: sequential composition convolves, probabilistic
/// choice mixes, all-to-finish multiplies CDFs, any-to-finish applies
/// inclusion-exclusion. Results are memoized on structurally equal
/// subtrees, which rewriting produces in abundance. Evaluation is pure, so
/// memoization is unobservable.
pub fn evaluate(expr: &OutcomeExpr, assignment: &BasicAssignment) -> Result<DeltaQ, SemanticsError> {
    let grid = assignment.grid();
    let mut realized: HashMap<&str, DeltaQ> = HashMap::new();
    for name in expr.base_names() {
        if let Some(spec) = assignment.get(&name) {
            let key = assignment.outcomes.get_key_value(name.as_str()).expect("present").0;
            realized.insert(key.as_str(), spec.realize(grid)?);
        }
    }
    let mut memo: HashMap<OutcomeExpr, DeltaQ> = HashMap::new();
    eval_rec(expr, grid, &realized, &mut memo)
}

fn eval_rec(
    expr: &OutcomeExpr,
    grid: Grid,
    realized: &HashMap<&str, DeltaQ>,
    memo: &mut HashMap<OutcomeExpr, DeltaQ>,
) -> Result<DeltaQ, SemanticsError> {
    match expr {
        OutcomeExpr::Top => return Ok(DeltaQ::perfection(grid)),
        OutcomeExpr::Bottom => return Ok(DeltaQ::failure(grid)),
        OutcomeExpr::Base(name) => {
            return Ok(match realized.get(name.as_str()) {
                Some(dq) => dq.clone(),
                // Unassigned names are treated as perfection.
                None => DeltaQ::perfection(grid),
            });
        }
        _ => {}
    }
    if let Some(hit) = memo.get(expr) {
        return Ok(hit.clone());
    }
    let result = match expr {
        OutcomeExpr::Seq(l, r) => {
            eval_rec(l, grid, realized, memo)?.convolve(&eval_rec(r, grid, realized, memo)?)?
        }
        OutcomeExpr::ProbChoice { left, right, w_left, w_right } => eval_rec(left, grid, realized, memo)?
            .mixture(&eval_rec(right, grid, realized, memo)?, *w_left, *w_right)?,
        OutcomeExpr::AllToFinish(l, r) => eval_rec(l, grid, realized, memo)?
            .all_to_finish(&eval_rec(r, grid, realized, memo)?)?,
        OutcomeExpr::AnyToFinish(l, r) => eval_rec(l, grid, realized, memo)?
            .any_to_finish(&eval_rec(r, grid, realized, memo)?)?,
        _ => unreachable!("leaves handled above"),
    };
    memo.insert(expr.clone(), result.clone());
    Ok(result)
}
