//! Monte Carlo oracle: an independent operational reading of the
//! semantics, used to validate the analytic kernel.
//!
//! One trial walks the expression tree drawing concrete delays:
//! sequential composition adds them, all-to-finish takes the later, any-
//! to-finish the earlier, and probabilistic choice flips a weighted coin.
//! Failure is an explicit token: it propagates absorbingly through
//! sequencing and all-to-finish and survives any-to-finish only when both
//! sides fail. Nothing here touches the binned kernel, so agreement
//! between the two is meaningful evidence.
//!
//! The generator is ChaCha8 with one counter-derived stream per trial, so
//! reports are reproducible from the seed alone and trials could run in
//! any order or in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

use crate::expr::OutcomeExpr;
use crate::semantics::{BasicAssignment, DistKind, DistributionSpec};

/// Name of the RNG algorithm, recorded in every report.
pub const RNG_ALGORITHM: &str = "chacha8/per-trial-stream";

/// Result of a single trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleOutcome {
    /// The outcome completed after this delay.
    Completed(f64),
    /// The outcome never completes.
    Failed,
}

/// Aggregated result of a sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleReport {
    pub trials: u64,
    pub completed: u64,
    pub failed: u64,
    /// Completions at a finite time beyond the grid (subset of `completed`).
    pub overflow: u64,
    /// Sorted completion times of all completed trials.
    pub times: Vec<f64>,
    pub seed: u64,
    pub algorithm: &'static str,
}

impl SampleReport {
    /// Fraction of all trials that completed within `t`.
    pub fn empirical_cdf_at(&self, t: f64) -> f64 {
        let below = self.times.partition_point(|&x| x <= t);
        below as f64 / self.trials as f64
    }

    pub fn failure_fraction(&self) -> f64 {
        self.failed as f64 / self.trials as f64
    }

    /// CSV of sorted completion times plus summary comment lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t\n");
        for t in &self.times {
            let _ = writeln!(out, "{t}");
        }
        let _ = writeln!(out, "# trials={}", self.trials);
        let _ = writeln!(out, "# failed={}", self.failed);
        let _ = writeln!(out, "# overflow={}", self.overflow);
        let _ = writeln!(out, "# seed={}", self.seed);
        let _ = writeln!(out, "# rng={}", self.algorithm);
        out
    }
}

fn sample_shape(kind: &DistKind, rng: &mut impl Rng, late_time: f64) -> f64 {
    match kind {
        DistKind::Point { t } => *t,
        DistKind::Uniform { lo, hi } => lo + rng.random::<f64>() * (hi - lo),
        DistKind::Exponential { rate } => {
            let u: f64 = rng.random();
            -(1.0 - u).ln() / rate
        }
        DistKind::Table { points } => {
            let f_final = points.last().expect("non-empty table").1;
            let u: f64 = rng.random();
            if u >= f_final {
                // Completion past the table's specification: finite but
                // beyond the grid, matching the kernel's overflow bucket.
                return late_time;
            }
            let mut prev = (0.0, 0.0);
            for &(t, p) in points {
                if u < p {
                    if t == prev.0 {
                        return t;
                    }
                    let frac = (u - prev.1) / (p - prev.1);
                    return prev.0 + frac * (t - prev.0);
                }
                prev = (t, p);
            }
            prev.0
        }
    }
}

fn sample_spec(spec: &DistributionSpec, rng: &mut impl Rng, late_time: f64) -> SampleOutcome {
    if rng.random::<f64>() < spec.intangible() {
        SampleOutcome::Failed
    } else {
        SampleOutcome::Completed(sample_shape(&spec.kind, rng, late_time))
    }
}

/// Draw one trial of the whole expression.
pub fn sample_once(
    expr: &OutcomeExpr,
    assignment: &BasicAssignment,
    rng: &mut impl Rng,
) -> SampleOutcome {
    use SampleOutcome::*;
    let late_time = assignment.grid().t_max() + assignment.grid().dt();
    match expr {
        OutcomeExpr::Top => Completed(0.0),
        OutcomeExpr::Bottom => Failed,
        OutcomeExpr::Base(name) => match assignment.get(name) {
            Some(spec) => sample_spec(spec, rng, late_time),
            // Unassigned names evaluate to perfection.
            None => Completed(0.0),
        },
        OutcomeExpr::Seq(l, r) => {
            match (sample_once(l, assignment, rng), sample_once(r, assignment, rng)) {
                (Completed(a), Completed(b)) => Completed(a + b),
                _ => Failed,
            }
        }
        OutcomeExpr::AllToFinish(l, r) => {
            match (sample_once(l, assignment, rng), sample_once(r, assignment, rng)) {
                (Completed(a), Completed(b)) => Completed(a.max(b)),
                _ => Failed,
            }
        }
        OutcomeExpr::AnyToFinish(l, r) => {
            match (sample_once(l, assignment, rng), sample_once(r, assignment, rng)) {
                (Completed(a), Completed(b)) => Completed(a.min(b)),
                (Completed(a), Failed) => Completed(a),
                (Failed, Completed(b)) => Completed(b),
                (Failed, Failed) => Failed,
            }
        }
        OutcomeExpr::ProbChoice { left, right, w_left, w_right } => {
            let p_left = w_left / (w_left + w_right);
            if rng.random::<f64>() < p_left {
                sample_once(left, assignment, rng)
            } else {
                sample_once(right, assignment, rng)
            }
        }
    }
}

/// Run `trials` independent trials, deterministically from `seed`.
pub fn sample(
    expr: &OutcomeExpr,
    assignment: &BasicAssignment,
    seed: u64,
    trials: u64,
) -> SampleReport {
    assert!(trials >= 1, "at least one trial required");
    let t_max = assignment.grid().t_max();
    let mut times = Vec::new();
    let mut failed = 0u64;
    let mut overflow = 0u64;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        match sample_once(expr, assignment, &mut rng) {
            SampleOutcome::Completed(t) => {
                if t > t_max {
                    overflow += 1;
                }
                times.push(t);
            }
            SampleOutcome::Failed => failed += 1,
        }
    }
    times.sort_by(|a, b| a.partial_cmp(b).expect("delays are never NaN"));
    SampleReport {
        trials,
        completed: trials - failed,
        failed,
        overflow,
        times,
        seed,
        algorithm: RNG_ALGORITHM,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deltaq::Grid;
    use crate::parser::parse;
    use crate::semantics::evaluate;

    fn asg() -> BasicAssignment {
        BasicAssignment::new(Grid::with_dt(0.1, 10.0).unwrap())
    }

    #[test]
    fn trivial_outcomes() {
        let asg = asg();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            assert_eq!(
                sample_once(&OutcomeExpr::Top, &asg, &mut rng),
                SampleOutcome::Completed(0.0)
            );
            assert_eq!(sample_once(&OutcomeExpr::Bottom, &asg, &mut rng), SampleOutcome::Failed);
        }
    }

    #[test]
    fn any_to_finish_takes_first() {
        let mut asg = asg();
        asg.insert("a", DistributionSpec::point(2.0, 1.0).unwrap());
        asg.insert("b", DistributionSpec::point(3.0, 1.0).unwrap());
        let e = parse("a \\/ b").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            assert_eq!(sample_once(&e, &asg, &mut rng), SampleOutcome::Completed(2.0));
        }
    }

    #[test]
    fn bottom_always_fails_in_bulk() {
        let report = sample(&OutcomeExpr::Bottom, &asg(), 42, 1000);
        assert_eq!(report.failed, 1000);
        assert_eq!(report.completed, 0);
        assert!(report.times.is_empty());
    }

    #[test]
    fn identical_seeds_reproduce_reports() {
        let mut asg = asg();
        asg.insert("a", DistributionSpec::uniform(0.0, 5.0, 0.9).unwrap());
        asg.insert("b", DistributionSpec::exponential(0.7, 0.95).unwrap());
        let e = parse("(a ->- b) <[0.6]> (a \\/ b)").unwrap();
        let r1 = sample(&e, &asg, 777, 5000);
        let r2 = sample(&e, &asg, 777, 5000);
        assert_eq!(r1, r2);
        assert_eq!(r1.to_csv(), r2.to_csv());
        let r3 = sample(&e, &asg, 778, 5000);
        assert_ne!(r1.times, r3.times);
    }

    #[test]
    fn branch_fractions_match_weights() {
        let mut asg = asg();
        asg.insert("fast", DistributionSpec::point(1.0, 1.0).unwrap());
        asg.insert("slow", DistributionSpec::point(9.0, 1.0).unwrap());
        let e = parse("fast <[0.95]> slow").unwrap();
        let n = 100_000u64;
        let report = sample(&e, &asg, 4242, n);
        let fast = report.times.iter().filter(|&&t| t < 5.0).count() as f64;
        let p_hat = fast / n as f64;
        // binomial: sigma = sqrt(p(1-p)/n)
        let sigma = (0.95f64 * 0.05 / n as f64).sqrt();
        assert!(
            (p_hat - 0.95).abs() <= 3.0 * sigma,
            "branch fraction {p_hat} outside 3 sigma of 0.95"
        );
    }

    #[test]
    fn failure_fraction_tracks_intangible_mass() {
        let mut asg = asg();
        asg.insert("a", DistributionSpec::uniform(0.0, 2.0, 0.8).unwrap());
        asg.insert("b", DistributionSpec::point(1.0, 0.9).unwrap());
        let e = parse("a ->- b").unwrap();
        let n = 100_000u64;
        let report = sample(&e, &asg, 9, n);
        let im = evaluate(&e, &asg).unwrap().intangible();
        assert!((im - 0.28).abs() < 1e-12);
        let sigma = (im * (1.0 - im) / n as f64).sqrt();
        assert!((report.failure_fraction() - im).abs() <= 4.0 * sigma);
    }

    #[test]
    fn overflow_counted_separately() {
        let mut asg = asg(); // t_max = 10
        asg.insert("a", DistributionSpec::point(7.0, 1.0).unwrap());
        let e = parse("a ->- a").unwrap(); // always 14 > 10
        let report = sample(&e, &asg, 5, 100);
        assert_eq!(report.overflow, 100);
        assert_eq!(report.completed, 100);
        let csv = report.to_csv();
        assert!(csv.contains("# overflow=100"));
        assert!(csv.contains("# seed=5"));
    }

    #[test]
    fn table_sampling_matches_realization() {
        let g = Grid::with_dt(0.05, 10.0).unwrap();
        let mut asg = BasicAssignment::new(g);
        let spec = DistributionSpec::table(vec![(1.0, 0.3), (1.0, 0.5), (4.0, 0.9)], 1.0).unwrap();
        asg.insert("x", spec.clone());
        let e = parse("x").unwrap();
        let n = 100_000u64;
        let report = sample(&e, &asg, 31, n);
        let analytic = spec.realize(g).unwrap();
        let dkw = (2.0f64 / 0.01).ln().sqrt() / (2.0 * n as f64).sqrt();
        for k in [20usize, 40, 80, 120, 199] {
            let t = k as f64 * g.dt();
            let gap = (report.empirical_cdf_at(t) - analytic.cdf()[k]).abs();
            assert!(gap <= dkw + g.dt(), "gap {gap} at t={t}");
        }
        // the 10% past the table shows up as overflow, not failure
        assert_eq!(report.failed, 0);
        let sigma = (0.1f64 * 0.9 / n as f64).sqrt();
        assert!((report.overflow as f64 / n as f64 - 0.1).abs() <= 4.0 * sigma);
    }
}
