//! Outcome-expression AST, canonical printer, substitution, and tree paths.
//!
//! An outcome expression describes what a system accomplishes in terms of
//! base outcomes combined by four operators: sequential composition
//! (`->-`), probabilistic choice (`<m|m'>`), all-to-finish (`/\`), and
//! any-to-finish (`\/`). `top` is the always-instant perfect outcome and
//! `bot` is unconditional failure.

use std::fmt;
use std::hash::{Hash, Hasher};

/// One node of an outcome expression.
///
/// Probabilistic choice carries the raw weights as given; normalisation to
/// `m/(m+m')` happens at evaluation time. Weights must be finite,
/// non-negative, and not both zero.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeExpr {
    /// A named base outcome.
    Base(String),
    /// Perfection: completes instantly with probability one.
    Top,
    /// Unconditional failure: never completes.
    Bottom,
    /// Sequential composition: both outcomes, delays add.
    Seq(Box<OutcomeExpr>, Box<OutcomeExpr>),
    /// Probabilistic choice between the two sides with weights `(w_left, w_right)`.
    ProbChoice {
        left: Box<OutcomeExpr>,
        right: Box<OutcomeExpr>,
        w_left: f64,
        w_right: f64,
    },
    /// All-to-finish (last-to-finish): completes when both sides have.
    AllToFinish(Box<OutcomeExpr>, Box<OutcomeExpr>),
    /// Any-to-finish (first-to-finish): completes when either side has.
    AnyToFinish(Box<OutcomeExpr>, Box<OutcomeExpr>),
}

impl OutcomeExpr {
    pub fn base(name: impl Into<String>) -> Self {
        OutcomeExpr::Base(name.into())
    }

    pub fn seq(left: OutcomeExpr, right: OutcomeExpr) -> Self {
        OutcomeExpr::Seq(Box::new(left), Box::new(right))
    }

    pub fn all_to_finish(left: OutcomeExpr, right: OutcomeExpr) -> Self {
        OutcomeExpr::AllToFinish(Box::new(left), Box::new(right))
    }

    pub fn any_to_finish(left: OutcomeExpr, right: OutcomeExpr) -> Self {
        OutcomeExpr::AnyToFinish(Box::new(left), Box::new(right))
    }

    /// Probabilistic choice with explicit weights.
    ///
    /// Panics on non-finite or negative weights or a zero total; callers
    /// that take weights from untrusted input must validate first (the
    /// parser does).
    pub fn prob_choice(left: OutcomeExpr, right: OutcomeExpr, w_left: f64, w_right: f64) -> Self {
        assert!(
            w_left.is_finite() && w_right.is_finite() && w_left >= 0.0 && w_right >= 0.0,
            "choice weights must be finite and non-negative"
        );
        assert!(w_left + w_right > 0.0, "choice weights must not both be zero");
        OutcomeExpr::ProbChoice {
            left: Box::new(left),
            right: Box::new(right),
            // +0.0 canonicalises -0.0 so Eq and Hash agree.
            w_left: w_left + 0.0,
            w_right: w_right + 0.0,
        }
    }

    /// The `<[p]>` shorthand: weights `(p, 1-p)` for `p` in `[0,1]`.
    pub fn prob_choice_p(left: OutcomeExpr, right: OutcomeExpr, p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p), "choice probability must be in [0,1]");
        Self::prob_choice(left, right, p, 1.0 - p)
    }

    /// Replace every `Base(name)` leaf with `replacement`.
    pub fn substitute(&self, name: &str, replacement: &OutcomeExpr) -> OutcomeExpr {
        match self {
            OutcomeExpr::Base(n) if n == name => replacement.clone(),
            OutcomeExpr::Base(_) | OutcomeExpr::Top | OutcomeExpr::Bottom => self.clone(),
            OutcomeExpr::Seq(l, r) => {
                OutcomeExpr::seq(l.substitute(name, replacement), r.substitute(name, replacement))
            }
            OutcomeExpr::ProbChoice { left, right, w_left, w_right } => OutcomeExpr::ProbChoice {
                left: Box::new(left.substitute(name, replacement)),
                right: Box::new(right.substitute(name, replacement)),
                w_left: *w_left,
                w_right: *w_right,
            },
            OutcomeExpr::AllToFinish(l, r) => OutcomeExpr::all_to_finish(
                l.substitute(name, replacement),
                r.substitute(name, replacement),
            ),
            OutcomeExpr::AnyToFinish(l, r) => OutcomeExpr::any_to_finish(
                l.substitute(name, replacement),
                r.substitute(name, replacement),
            ),
        }
    }

    /// The children of a binary node, if any.
    pub fn children(&self) -> Option<(&OutcomeExpr, &OutcomeExpr)> {
        match self {
            OutcomeExpr::Seq(l, r)
            | OutcomeExpr::AllToFinish(l, r)
            | OutcomeExpr::AnyToFinish(l, r) => Some((l, r)),
            OutcomeExpr::ProbChoice { left, right, .. } => Some((left, right)),
            _ => None,
        }
    }

    /// All distinct base-outcome names, in first-occurrence order.
    pub fn base_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.collect_names(&mut names);
        names
    }

    fn collect_names(&self, names: &mut Vec<String>) {
        match self {
            OutcomeExpr::Base(n) => {
                if !names.iter().any(|m| m == n) {
                    names.push(n.clone());
                }
            }
            OutcomeExpr::Top | OutcomeExpr::Bottom => {}
            _ => {
                let (l, r) = self.children().expect("binary node");
                l.collect_names(names);
                r.collect_names(names);
            }
        }
    }

    /// Whether `Bottom` occurs anywhere in the tree.
    pub fn contains_bottom(&self) -> bool {
        match self {
            OutcomeExpr::Bottom => true,
            OutcomeExpr::Base(_) | OutcomeExpr::Top => false,
            _ => {
                let (l, r) = self.children().expect("binary node");
                l.contains_bottom() || r.contains_bottom()
            }
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self.children() {
            Some((l, r)) => 1 + l.size() + r.size(),
            None => 1,
        }
    }

    /// The subtree at `path`, or `None` if the path walks off the tree.
    pub fn subtree(&self, path: &TreePath) -> Option<&OutcomeExpr> {
        let mut node = self;
        for branch in &path.0 {
            let (l, r) = node.children()?;
            node = match branch {
                Branch::Left => l,
                Branch::Right => r,
            };
        }
        Some(node)
    }

    /// A copy of the tree with the subtree at `path` replaced.
    pub fn with_subtree(&self, path: &TreePath, replacement: OutcomeExpr) -> Option<OutcomeExpr> {
        if path.0.is_empty() {
            return Some(replacement);
        }
        let rest = TreePath(path.0[1..].to_vec());
        let rebuild = |l: &OutcomeExpr, r: &OutcomeExpr| -> Option<(OutcomeExpr, OutcomeExpr)> {
            Some(match path.0[0] {
                Branch::Left => (l.with_subtree(&rest, replacement.clone())?, r.clone()),
                Branch::Right => (l.clone(), r.with_subtree(&rest, replacement.clone())?),
            })
        };
        match self {
            OutcomeExpr::Seq(l, r) => {
                let (l, r) = rebuild(l, r)?;
                Some(OutcomeExpr::seq(l, r))
            }
            OutcomeExpr::AllToFinish(l, r) => {
                let (l, r) = rebuild(l, r)?;
                Some(OutcomeExpr::all_to_finish(l, r))
            }
            OutcomeExpr::AnyToFinish(l, r) => {
                let (l, r) = rebuild(l, r)?;
                Some(OutcomeExpr::any_to_finish(l, r))
            }
            OutcomeExpr::ProbChoice { left, right, w_left, w_right } => {
                let (l, r) = rebuild(left, right)?;
                Some(OutcomeExpr::ProbChoice {
                    left: Box::new(l),
                    right: Box::new(r),
                    w_left: *w_left,
                    w_right: *w_right,
                })
            }
            _ => None,
        }
    }
}

// Weights are guaranteed finite and non-NaN by construction, so `==` is an
// equivalence relation on the values that actually occur.
impl Eq for OutcomeExpr {}

impl Hash for OutcomeExpr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            OutcomeExpr::Base(n) => n.hash(state),
            OutcomeExpr::Top | OutcomeExpr::Bottom => {}
            OutcomeExpr::Seq(l, r)
            | OutcomeExpr::AllToFinish(l, r)
            | OutcomeExpr::AnyToFinish(l, r) => {
                l.hash(state);
                r.hash(state);
            }
            OutcomeExpr::ProbChoice { left, right, w_left, w_right } => {
                left.hash(state);
                right.hash(state);
                // -0.0 never occurs (canonicalised in the constructor).
                w_left.to_bits().hash(state);
                w_right.to_bits().hash(state);
            }
        }
    }
}

/// Render a weight so that parsing it back yields the identical `f64`.
pub(crate) fn format_weight(w: f64) -> String {
    if w == w.trunc() && w.abs() < 1e15 {
        format!("{}", w as i64)
    } else if (1e-4..1e16).contains(&w) {
        format!("{w}")
    } else {
        format!("{w:e}")
    }
}

impl fmt::Display for OutcomeExpr {
    /// Fully parenthesised canonical form. `parse(print(e))` reproduces `e`
    /// exactly, including weight bits.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeExpr::Base(n) => write!(f, "{n}"),
            OutcomeExpr::Top => write!(f, "top"),
            OutcomeExpr::Bottom => write!(f, "bot"),
            OutcomeExpr::Seq(l, r) => write!(f, "({l} ->- {r})"),
            OutcomeExpr::AllToFinish(l, r) => write!(f, "({l} /\\ {r})"),
            OutcomeExpr::AnyToFinish(l, r) => write!(f, "({l} \\/ {r})"),
            OutcomeExpr::ProbChoice { left, right, w_left, w_right } => {
                // Use the `<[p]>` sugar when it round-trips bit-exactly.
                if (0.0..=1.0).contains(w_left) && *w_right == 1.0 - *w_left {
                    write!(f, "({left} <[{}]> {right})", format_weight(*w_left))
                } else {
                    write!(
                        f,
                        "({left} <{}|{}> {right})",
                        format_weight(*w_left),
                        format_weight(*w_right)
                    )
                }
            }
        }
    }
}

/// One step into a binary node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Left,
    Right,
}

/// A path from the root of an expression to one of its subtrees, written
/// as a string of `L`/`R` characters; the empty path is the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TreePath(pub Vec<Branch>);

impl TreePath {
    pub fn root() -> Self {
        TreePath(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, branch: Branch) -> Self {
        let mut p = self.0.clone();
        p.push(branch);
        TreePath(p)
    }

    /// Parse an `L`/`R` string; `""` and `"."` both denote the root.
    pub fn parse(text: &str) -> Result<Self, String> {
        if text == "." {
            return Ok(Self::root());
        }
        let mut branches = Vec::with_capacity(text.len());
        for c in text.chars() {
            match c {
                'L' | 'l' => branches.push(Branch::Left),
                'R' | 'r' => branches.push(Branch::Right),
                other => return Err(format!("invalid path character {other:?} (expected L or R)")),
            }
        }
        Ok(TreePath(branches))
    }
}

impl fmt::Display for TreePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, ".");
        }
        for b in &self.0 {
            write!(f, "{}", if *b == Branch::Left { 'L' } else { 'R' })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a() -> OutcomeExpr {
        OutcomeExpr::base("a")
    }
    fn b() -> OutcomeExpr {
        OutcomeExpr::base("b")
    }

    #[test]
    fn print_constants_and_operators() {
        assert_eq!(OutcomeExpr::Top.to_string(), "top");
        assert_eq!(OutcomeExpr::Bottom.to_string(), "bot");
        assert_eq!(
            OutcomeExpr::prob_choice(a(), b(), 1.0, 1.0).to_string(),
            "(a <1|1> b)"
        );
        assert_eq!(
            OutcomeExpr::seq(OutcomeExpr::seq(a(), b()), OutcomeExpr::base("c")).to_string(),
            "((a ->- b) ->- c)"
        );
        assert_eq!(OutcomeExpr::all_to_finish(a(), b()).to_string(), "(a /\\ b)");
        assert_eq!(OutcomeExpr::any_to_finish(a(), b()).to_string(), "(a \\/ b)");
    }

    #[test]
    fn print_uses_sugar_only_when_exact() {
        let sugar = OutcomeExpr::prob_choice_p(a(), b(), 0.95);
        assert_eq!(sugar.to_string(), "(a <[0.95]> b)");
        let raw = OutcomeExpr::prob_choice(a(), b(), 0.95, 0.05);
        // 0.05 != 1.0 - 0.95 bit-exactly, so the pair form is used.
        assert_eq!(raw.to_string(), "(a <0.95|0.05> b)");
    }

    #[test]
    fn substitute_replaces_all_occurrences() {
        assert_eq!(a().substitute("a", &OutcomeExpr::Top), OutcomeExpr::Top);
        let e = OutcomeExpr::seq(a(), OutcomeExpr::seq(b(), a()));
        let got = e.substitute("a", &OutcomeExpr::Bottom);
        assert_eq!(
            got,
            OutcomeExpr::seq(
                OutcomeExpr::Bottom,
                OutcomeExpr::seq(b(), OutcomeExpr::Bottom)
            )
        );
    }

    #[test]
    fn substitute_no_occurrence_is_identity() {
        let e = OutcomeExpr::seq(a(), b());
        assert_eq!(e.substitute("c", &OutcomeExpr::Bottom), e);
    }

    #[test]
    fn paths_navigate_and_replace() {
        let e = OutcomeExpr::seq(OutcomeExpr::seq(a(), b()), OutcomeExpr::base("c"));
        let p = TreePath::parse("LR").unwrap();
        assert_eq!(e.subtree(&p), Some(&b()));
        let swapped = e.with_subtree(&p, OutcomeExpr::Top).unwrap();
        assert_eq!(swapped.to_string(), "((a ->- top) ->- c)");
        assert!(e.subtree(&TreePath::parse("LLL").unwrap()).is_none());
        assert_eq!(TreePath::parse("").unwrap(), TreePath::root());
        assert_eq!(TreePath::parse(".").unwrap(), TreePath::root());
        assert!(TreePath::parse("LX").is_err());
    }

    #[test]
    fn base_names_deduplicated_in_order() {
        let e = OutcomeExpr::seq(OutcomeExpr::seq(b(), a()), b());
        assert_eq!(e.base_names(), vec!["b".to_string(), "a".to_string()]);
    }

    #[test]
    fn weight_formatting_round_trips() {
        for w in [0.0, 1.0, 0.95, 1e-16, 5e-18, 123.0, 0.3333333333333333] {
            let s = format_weight(w);
            assert_eq!(s.parse::<f64>().unwrap(), w, "weight {w} via {s}");
        }
    }
}
