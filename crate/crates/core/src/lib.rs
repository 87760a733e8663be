//! Compositional timeliness analysis over improper delay distributions.
//!
//! A system's behaviour is written as an *outcome expression*: base
//! outcomes combined by sequential composition, probabilistic choice,
//! all-to-finish, and any-to-finish. Given per-outcome delay
//! distributions (which may fail to complete with some probability), the
//! library computes the delay distribution of the whole system, rewrites
//! expressions under proven timeliness equivalences, extracts overall
//! failure probabilities without full evaluation, checks quantitative
//! timeliness agreements, and cross-validates everything against a Monte
//! Carlo sampler.
//!
//! ```
//! use deltaq::{parse, evaluate, BasicAssignment, DistributionSpec, Grid};
//!
//! let expr = parse("hit <[0.95]> (miss ->- fetch)").unwrap();
//! let mut asg = BasicAssignment::new(Grid::with_dt(0.01, 20.0).unwrap());
//! asg.insert("hit", DistributionSpec::point(0.1, 1.0).unwrap());
//! asg.insert("miss", DistributionSpec::point(0.1, 1.0).unwrap());
//! asg.insert("fetch", DistributionSpec::uniform(1.0, 3.0, 0.999).unwrap());
//! let dq = evaluate(&expr, &asg).unwrap();
//! assert!(dq.cdf_at(5.0).unwrap() > 0.99);
//! ```

pub mod analysis;
pub mod deltaq;
pub mod expr;
pub mod mc;
pub mod parser;
pub mod rewrite;
pub mod semantics;
pub mod testing;

pub use analysis::{
    check_qta, compare_designs, failure_rate, format_failure_success, AnalysisError, Comparison,
    Qta, QtaPoint, Verdict, Violation,
};
pub use deltaq::{DeltaQ, DeltaQError, Grid};
pub use expr::{Branch, OutcomeExpr, TreePath};
pub use mc::{sample, sample_once, SampleOutcome, SampleReport};
pub use parser::{parse, ParseError};
pub use rewrite::{
    accumulate_failure, apply_at, derived_steps, distribute_choice, extract_failure,
    extract_failure_with_trace, find_rule, normalize, properise, reassoc_left, reassoc_right,
    rule_catalog, Direction, ProperisationResult, RewriteError, RewriteRule, RewriteTrace, RuleFamily,
    Side, TraceStep,
};
pub use semantics::{evaluate, BasicAssignment, DistKind, DistributionSpec, SemanticsError};
