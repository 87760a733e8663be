//! Bottom-up normalisation strategy and failure extraction.
//!
//! [`normalize`] walks the tree once, children before parents, and at each
//! node applies rewrite steps until none fits: constant subtrees collapse,
//! failure choices (`o <m|m'> bot`) commute outward through `->-`, `<m|m'>`
//! and `/\`, and adjacent failure choices merge. Each step removes a node
//! or moves a `bot` strictly closer to the root, so the loop terminates.
//! Failure choices never cross `\/`: no choice weight can reproduce
//! first-to-finish's behaviour, so such nodes are left intact.
//!
//! Every step is applied through [`apply_at`] and recorded in a
//! [`RewriteTrace`], which can be replayed to reproduce the result.

use crate::expr::{Branch, OutcomeExpr, TreePath};

use super::{apply_at, RewriteError};

/// One recorded rewrite application.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub rule: &'static str,
    pub path: TreePath,
    /// Printed form of the subtree before the step.
    pub before: String,
    /// Printed form of the subtree after the step.
    pub after: String,
    /// Weights of the rewritten node, when it is a probabilistic choice.
    pub coefficients: Vec<f64>,
}

/// A replayable log of rewrite steps from a start expression.
#[derive(Debug, Clone, PartialEq)]
pub struct RewriteTrace {
    pub start: OutcomeExpr,
    pub steps: Vec<TraceStep>,
}

impl RewriteTrace {
    pub fn new(start: OutcomeExpr) -> Self {
        RewriteTrace { start, steps: Vec::new() }
    }

    /// Re-apply every recorded step to the start expression.
    pub fn replay(&self) -> Result<OutcomeExpr, RewriteError> {
        let mut tree = self.start.clone();
        for step in &self.steps {
            tree = apply_at(&tree, step.rule, &step.path)?;
        }
        Ok(tree)
    }

    /// Line-oriented export: `<n>: <ruleId> @ <path> :: <before> => <after>`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (n, step) in self.steps.iter().enumerate() {
            out.push_str(&format!(
                "{}: {} @ {} :: {} => {}\n",
                n + 1,
                step.rule,
                step.path,
                step.before,
                step.after
            ));
        }
        out
    }
}

struct Normalizer {
    tree: OutcomeExpr,
    trace: RewriteTrace,
    steps_applied: usize,
}

impl Normalizer {
    fn node(&self, path: &TreePath) -> &OutcomeExpr {
        self.tree.subtree(path).expect("normaliser paths stay valid")
    }

    fn apply(&mut self, rule: &'static str, path: &TreePath) {
        let before = self.node(path).to_string();
        self.tree = apply_at(&self.tree, rule, path)
            .unwrap_or_else(|e| panic!("strategy step {rule} at {path} must apply: {e}"));
        self.steps_applied += 1;
        assert!(self.steps_applied < 100_000, "normalisation failed to terminate");
        let after_node = self.node(path);
        let coefficients = match after_node {
            OutcomeExpr::ProbChoice { w_left, w_right, .. } => vec![*w_left, *w_right],
            _ => Vec::new(),
        };
        self.trace.steps.push(TraceStep {
            rule,
            path: path.clone(),
            before,
            after: after_node.to_string(),
            coefficients,
        });
    }

    fn normalize_at(&mut self, path: &TreePath) {
        if self.node(path).children().is_some() {
            self.normalize_at(&path.child(Branch::Left));
            self.normalize_at(&path.child(Branch::Right));
        }
        while let Some(rule) = decide(self.node(path)) {
            self.apply(rule, path);
            // Steps like distribution leave fresh structure below; settle
            // the children again before re-examining this node.
            if self.node(path).children().is_some() {
                self.normalize_at(&path.child(Branch::Left));
                self.normalize_at(&path.child(Branch::Right));
            }
        }
    }
}

fn is_bot(e: &OutcomeExpr) -> bool {
    matches!(e, OutcomeExpr::Bottom)
}

fn is_top(e: &OutcomeExpr) -> bool {
    matches!(e, OutcomeExpr::Top)
}

/// `o <m|m'> bot` with both weights positive.
fn is_bubble(e: &OutcomeExpr) -> bool {
    matches!(
        e,
        OutcomeExpr::ProbChoice { right, w_left, w_right, .. }
            if is_bot(right) && *w_left > 0.0 && *w_right > 0.0
    )
}

/// Pick the next strategy step for this node, if any. Children are
/// already in normal form when this runs.
fn decide(node: &OutcomeExpr) -> Option<&'static str> {
    match node {
        OutcomeExpr::ProbChoice { left, right, w_left, w_right } => {
            if *w_right == 0.0 {
                return Some("choice-degenerate-left");
            }
            if *w_left == 0.0 {
                return Some("choice-degenerate-right");
            }
            match (left.as_ref(), right.as_ref()) {
                (l, r) if is_bot(l) && is_bot(r) => Some("choice-bot-collapse"),
                (l, r) if is_top(l) && is_top(r) => Some("choice-top-collapse"),
                // move the literal failure to the right, then re-associate
                (l, _) if is_bot(l) => Some("choice-swap"),
                (l, r) if is_bot(r) => {
                    // already `core <m|m'> bot`; only a failure choice in
                    // the core still needs hoisting
                    is_bubble(l).then_some("reassoc-right")
                }
                (l, r) if is_bubble(l) && is_bubble(r) => Some("fail-acc-choice"),
                (_, r) if is_bubble(r) => Some("reassoc-left"),
                (l, _) if is_bubble(l) => Some("choice-swap"),
                _ => None,
            }
        }
        OutcomeExpr::Seq(l, r) => {
            if is_bot(l) {
                Some("bot-seq")
            } else if is_bot(r) {
                Some("seq-bot")
            } else if is_top(l) {
                Some("top-seq")
            } else if is_top(r) {
                Some("seq-top")
            } else if is_bubble(l) && is_bubble(r) {
                Some("fail-acc-seq")
            } else if is_bubble(l) {
                Some("choice-bot-left-commute")
            } else if is_bubble(r) {
                Some("choice-bot-right-commute")
            } else {
                None
            }
        }
        OutcomeExpr::AllToFinish(l, r) => {
            if is_bot(l) {
                Some("atf-bot-left")
            } else if is_bot(r) {
                Some("atf-bot-right")
            } else if is_top(l) {
                Some("top-atf")
            } else if is_top(r) {
                Some("atf-top-right")
            } else if is_bubble(l) && is_bubble(r) {
                Some("fail-acc-atf")
            } else if is_bubble(l) {
                // distribute, then the bot /\ o2 copy collapses
                Some("atf-dist-left")
            } else if is_bubble(r) {
                Some("atf-dist-right")
            } else {
                None
            }
        }
        OutcomeExpr::AnyToFinish(l, r) => {
            if is_bot(l) {
                Some("bot-ftf")
            } else if is_bot(r) {
                Some("ftf-bot-right")
            } else if is_top(l) {
                Some("ftf-top-left")
            } else if is_top(r) {
                Some("ftf-top-right")
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Normalise bottom-up: collapse constant subtrees, commute failure
/// choices outward through `->-`, `<m|m'>`, and `/\`, and merge adjacent
/// failure choices. Returns the normal form and the replayable trace.
pub fn normalize(expr: &OutcomeExpr) -> (OutcomeExpr, RewriteTrace) {
    let mut n = Normalizer {
        tree: expr.clone(),
        trace: RewriteTrace::new(expr.clone()),
        steps_applied: 0,
    };
    n.normalize_at(&TreePath::root());
    (n.tree, n.trace)
}

/// Split an expression into a failure-free core and the probability that
/// the expression fails outright: `expr` is timeliness-equivalent to
/// `core <1-f|f> bot`.
///
/// Fails when a failure choice sits under `\/` where no rule can reach it;
/// callers can fall back to numeric evaluation of the intangible mass.
pub fn extract_failure(expr: &OutcomeExpr) -> Result<(OutcomeExpr, f64), RewriteError> {
    extract_failure_with_trace(expr).map(|(core, f, _)| (core, f))
}

/// [`extract_failure`], also returning the trace that justifies the result.
pub fn extract_failure_with_trace(
    expr: &OutcomeExpr,
) -> Result<(OutcomeExpr, f64, RewriteTrace), RewriteError> {
    let (nf, trace) = normalize(expr);
    match &nf {
        OutcomeExpr::Bottom => Ok((OutcomeExpr::Top, 1.0, trace)),
        OutcomeExpr::ProbChoice { left, right, w_left, w_right }
            if is_bot(right) && !left.contains_bottom() =>
        {
            // failure mass straight from the weight pair; never 1 - (1-f)
            let f = w_right / (w_left + w_right);
            Ok((left.as_ref().clone(), f, trace))
        }
        e if !e.contains_bottom() => Ok((e.clone(), 0.0, trace)),
        e => Err(RewriteError::NotExtractable(format!(
            "a failure choice is trapped under first-to-finish (\\/) in `{e}`; \
             no equivalence moves failure across it"
        ))),
    }
}
