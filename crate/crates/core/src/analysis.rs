//! User-facing analyses: failure rate, quantitative timeliness agreement
//! checking, and design comparison.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deltaq::DeltaQError;
use crate::expr::OutcomeExpr;
use crate::rewrite::{extract_failure, properise, RewriteError};
use crate::semantics::{evaluate, BasicAssignment, SemanticsError};

/// Tolerance used when comparing two designs whose distributions were
/// computed along different floating-point routes.
pub const COMPARISON_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    DeltaQ(#[from] DeltaQError),
    #[error("QTA point at t={t} lies beyond the grid (tMax={t_max}); rerun with a larger tMax")]
    QtaBeyondGrid { t: f64, t_max: f64 },
    #[error("invalid QTA: {0}")]
    InvalidQta(String),
}

/// One deadline of an agreement: at least this cumulative probability by
/// this time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QtaPoint {
    pub t: f64,
    pub p: f64,
}

/// A quantitative timeliness agreement: cumulative-probability deadlines
/// plus the largest tolerable failure fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qta {
    pub points: Vec<QtaPoint>,
    #[serde(rename = "maxFailure", default)]
    pub max_failure: f64,
}

impl Qta {
    pub fn new(points: Vec<QtaPoint>, max_failure: f64) -> Result<Self, AnalysisError> {
        let qta = Qta { points, max_failure };
        qta.validate()?;
        Ok(qta)
    }

    pub fn from_json(text: &str) -> Result<Self, AnalysisError> {
        let qta: Qta =
            serde_json::from_str(text).map_err(|e| AnalysisError::InvalidQta(e.to_string()))?;
        qta.validate()?;
        Ok(qta)
    }

    fn validate(&self) -> Result<(), AnalysisError> {
        if !(0.0..=1.0).contains(&self.max_failure) {
            return Err(AnalysisError::InvalidQta(format!(
                "maxFailure must be in [0,1], got {}",
                self.max_failure
            )));
        }
        let mut prev = QtaPoint { t: 0.0, p: 0.0 };
        for pt in &self.points {
            if !(pt.t.is_finite() && pt.t >= prev.t && (0.0..=1.0).contains(&pt.p) && pt.p >= prev.p) {
                return Err(AnalysisError::InvalidQta(format!(
                    "points must be nondecreasing in both coordinates with p in [0,1]; offending point (t={}, p={})",
                    pt.t, pt.p
                )));
            }
            prev = *pt;
        }
        if let Some(last) = self.points.last() {
            if last.p > 1.0 - self.max_failure + 1e-12 {
                return Err(AnalysisError::InvalidQta(format!(
                    "final required probability {} exceeds 1 - maxFailure = {}",
                    last.p,
                    1.0 - self.max_failure
                )));
            }
        }
        Ok(())
    }
}

/// One missed deadline: the observed cumulative probability fell short of
/// the requirement at this time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub t: f64,
    pub required: f64,
    pub observed: f64,
}

/// Outcome of checking a design against an agreement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub satisfied: bool,
    pub violations: Vec<Violation>,
    pub failure_observed: f64,
    pub failure_allowed: f64,
    /// Smallest margin `observed - required` over the deadline points
    /// (infinite when the agreement has no points).
    pub slack: f64,
}

/// The overall failure probability of an expression under an assignment.
///
/// Properises every assigned improper name and extracts the accumulated
/// failure choice symbolically, which keeps tiny masses exact. When
/// extraction is impossible (failure trapped under `\/`, or a name that
/// fails unconditionally), falls back to the intangible mass of the
/// evaluated distribution; where both routes are available they agree to
/// high precision.
pub fn failure_rate(
    expr: &OutcomeExpr,
    assignment: &BasicAssignment,
) -> Result<f64, AnalysisError> {
    let improper: Vec<String> = expr
        .base_names()
        .into_iter()
        .filter(|n| assignment.get(n).is_some_and(|s| s.intangible() > 0.0))
        .collect();
    let properisable = improper
        .iter()
        .all(|n| assignment.get(n).is_some_and(|s| s.intangible() < 1.0));
    if properisable {
        let result = properise(expr, assignment, &improper)?;
        if let Ok((_core, f)) = extract_failure(&result.expr) {
            return Ok(f);
        }
    }
    Ok(evaluate(expr, assignment)?.intangible())
}

/// Check an expression against an agreement. The discrete CDF is
/// interpolated linearly between bin edges so a deadline falling mid-bin
/// is not penalised by binning.
pub fn check_qta(
    expr: &OutcomeExpr,
    assignment: &BasicAssignment,
    qta: &Qta,
) -> Result<Verdict, AnalysisError> {
    qta.validate()?;
    let t_max = assignment.grid().t_max();
    for pt in &qta.points {
        if pt.t > t_max {
            return Err(AnalysisError::QtaBeyondGrid { t: pt.t, t_max });
        }
    }
    let observed = evaluate(expr, assignment)?;
    let mut violations = Vec::new();
    let mut slack = f64::INFINITY;
    for pt in &qta.points {
        let got = observed.cdf_at(pt.t)?;
        slack = slack.min(got - pt.p);
        if got < pt.p {
            violations.push(Violation { t: pt.t, required: pt.p, observed: got });
        }
    }
    let failure_observed = observed.intangible();
    let satisfied = violations.is_empty() && failure_observed <= qta.max_failure;
    Ok(Verdict {
        satisfied,
        violations,
        failure_observed,
        failure_allowed: qta.max_failure,
        slack,
    })
}

/// How two designs relate under the timeliness partial order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Equal,
    /// The first design is at least as timely as the second.
    ALeqB,
    /// The second design is at least as timely as the first.
    BLeqA,
    Incomparable,
}

impl std::fmt::Display for Comparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Comparison::Equal => write!(f, "equal"),
            Comparison::ALeqB => write!(f, "A <= B"),
            Comparison::BLeqA => write!(f, "B <= A"),
            Comparison::Incomparable => write!(f, "incomparable"),
        }
    }
}

/// Compare two designs under one assignment by applying the timeliness
/// order both ways (with [`COMPARISON_TOLERANCE`] slack).
pub fn compare_designs(
    expr_a: &OutcomeExpr,
    expr_b: &OutcomeExpr,
    assignment: &BasicAssignment,
) -> Result<Comparison, AnalysisError> {
    let a = evaluate(expr_a, assignment)?;
    let b = evaluate(expr_b, assignment)?;
    let ab = a.leq_with_tolerance(&b, COMPARISON_TOLERANCE)?;
    let ba = b.leq_with_tolerance(&a, COMPARISON_TOLERANCE)?;
    Ok(match (ab, ba) {
        (true, true) => Comparison::Equal,
        (true, false) => Comparison::ALeqB,
        (false, true) => Comparison::BLeqA,
        (false, false) => Comparison::Incomparable,
    })
}

// -- exact display of tiny failure rates --------------------------------------

/// Render a failure probability and its success complement.
///
/// The failure side is scientific with two significant digits. The success
/// side is computed by decimal string arithmetic on the exact binary
/// expansion of the failure mass, so `1 - 5e-18` prints as
/// `0.999999999999999995` instead of collapsing to `1`.
pub fn format_failure_success(failure: f64) -> (String, String) {
    assert!((0.0..=1.0).contains(&failure), "failure must be a probability");
    if failure == 0.0 {
        return ("0".into(), "1".into());
    }
    if failure == 1.0 {
        return ("1".into(), "0".into());
    }
    (format!("{failure:.1e}"), success_decimal(failure))
}

/// Exact fractional decimal expansion of an f64 in (0, 1): the digit
/// string and its length (number of decimal places).
fn exact_fraction_digits(f: f64) -> (BigUint, usize) {
    let bits = f.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mantissa, exp) = if exp_bits == 0 {
        (frac, -1074i64) // subnormal
    } else {
        (frac | (1u64 << 52), exp_bits - 1075)
    };
    debug_assert!(exp < 0, "values in (0,1) have negative binary exponent");
    let shift = (-exp) as u32;
    // f = mantissa / 2^shift = mantissa * 5^shift / 10^shift
    let scaled = BigUint::from(mantissa) * BigUint::from(5u8).pow(shift);
    (scaled, shift as usize)
}

fn success_decimal(failure: f64) -> String {
    let (f_scaled, places) = exact_fraction_digits(failure);
    let ten = BigUint::from(10u8);
    let one_scaled = ten.pow(places as u32);
    let s_scaled = &one_scaled - &f_scaled;

    // Keep two significant digits past the leading digit of whichever side
    // starts deeper, so both the failure structure and a small success
    // remain visible.
    let digits_of = |v: &BigUint| v.to_str_radix(10).len();
    let first_nonzero_f = places - digits_of(&f_scaled) + 1;
    let first_nonzero_s = places - digits_of(&s_scaled) + 1;
    let round_at = (first_nonzero_f.max(first_nonzero_s) + 1).min(places);

    let scale = ten.pow((places - round_at) as u32);
    let quotient = &s_scaled / &scale;
    let remainder = &s_scaled % &scale;
    let rounded = if remainder * 2u8 >= scale { quotient + 1u8 } else { quotient };

    let mut digits = rounded.to_str_radix(10);
    if digits.len() > round_at {
        // rounding carried all the way up
        return "1".into();
    }
    digits.insert_str(0, &"0".repeat(round_at - digits.len()));
    let trimmed = digits.trim_end_matches('0');
    if trimmed.is_empty() {
        return "0".into();
    }
    format!("0.{trimmed}")
}
