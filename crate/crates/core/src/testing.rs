//! Seeded random generators and comparison helpers shared by the unit,
//! property, and acceptance suites. Not part of the stable API surface.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::deltaq::{DeltaQ, Grid};
use crate::expr::OutcomeExpr;
use crate::semantics::{evaluate, BasicAssignment, DistributionSpec};

/// Deterministic RNG for reproducible suites.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random mass vector with optional overflow and intangible buckets.
/// Shapes vary: atoms, blocks, and geometric decay.
pub fn random_deltaq(rng: &mut impl Rng, grid: Grid) -> DeltaQ {
    let n = grid.n_bins();
    let intangible = if rng.random::<f64>() < 0.4 { 0.0 } else { rng.random::<f64>() * 0.3 };
    let overflow = if rng.random::<f64>() < 0.5 { 0.0 } else { rng.random::<f64>() * 0.2 };
    let tangible = 1.0 - intangible - overflow;
    let mut mass = vec![0.0; n + 1];
    match rng.random_range(0..3u8) {
        0 => {
            // a few atoms
            for _ in 0..rng.random_range(1..=4) {
                mass[rng.random_range(0..=n)] += rng.random::<f64>();
            }
        }
        1 => {
            // contiguous block
            let start = rng.random_range(0..n);
            let stop = rng.random_range(start + 1..=n);
            for slot in &mut mass[start..=stop] {
                *slot = rng.random::<f64>() + 0.1;
            }
        }
        _ => {
            // geometric decay from a random start
            let start = rng.random_range(0..=n / 2);
            let rate = 0.8 + rng.random::<f64>() * 0.15;
            let mut w = 1.0;
            for slot in mass.iter_mut().skip(start) {
                *slot = w;
                w *= rate;
            }
        }
    }
    let sum: f64 = mass.iter().sum();
    for slot in &mut mass {
        *slot *= tangible / sum;
    }
    DeltaQ::from_parts(grid, mass, overflow, intangible).expect("generated mass is conserved")
}

/// A random `DeltaQ` whose CDF is strictly between 0 and 1 somewhere.
pub fn random_nontrivial_deltaq(rng: &mut impl Rng, grid: Grid) -> DeltaQ {
    loop {
        let dq = random_deltaq(rng, grid);
        let cdf = dq.cdf();
        if cdf.iter().any(|&f| f > 1e-6 && f < 1.0 - 1e-6) {
            return dq;
        }
    }
}

/// A random distribution spec with bounded parameters; improper with
/// probability ~0.4, and then by at least 0.01 so sampled failure counts
/// are statistically meaningful.
pub fn random_spec(rng: &mut impl Rng) -> DistributionSpec {
    let success = if rng.random::<f64>() < 0.6 {
        1.0
    } else {
        1.0 - (0.01 + rng.random::<f64>() * 0.29)
    };
    match rng.random_range(0..4u8) {
        0 => DistributionSpec::point(rng.random::<f64>() * 5.0, success),
        1 => {
            let lo = rng.random::<f64>() * 3.0;
            let width = 1.0 + rng.random::<f64>() * 3.0;
            DistributionSpec::uniform(lo, lo + width, success)
        }
        2 => DistributionSpec::exponential(0.3 + rng.random::<f64>() * 1.7, success),
        _ => {
            let t1 = 0.5 + rng.random::<f64>() * 2.0;
            let t2 = t1 + 0.5 + rng.random::<f64>() * 2.0;
            let p1 = 0.2 + rng.random::<f64>() * 0.4;
            let p2 = p1 + rng.random::<f64>() * (1.0 - p1);
            DistributionSpec::table(vec![(t1, p1), (t2, p2)], success)
        }
    }
    .expect("generated parameters are valid")
}

/// An assignment giving every listed name a random spec.
pub fn random_assignment(rng: &mut impl Rng, grid: Grid, names: &[String]) -> BasicAssignment {
    let mut asg = BasicAssignment::new(grid);
    for name in names {
        asg.insert(name.clone(), random_spec(rng));
    }
    asg
}

const LEAF_NAMES: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

/// A random expression of at most the given depth over the standard leaf
/// names. `bottom_prob` is the per-leaf chance of `bot`; `allow_ftf`
/// gates any-to-finish nodes (failure extraction cannot cross them).
pub fn random_expr_with(
    rng: &mut impl Rng,
    max_depth: usize,
    bottom_prob: f64,
    allow_ftf: bool,
) -> OutcomeExpr {
    if max_depth == 0 || rng.random::<f64>() < 0.3 {
        let roll = rng.random::<f64>();
        return if roll < bottom_prob {
            OutcomeExpr::Bottom
        } else if roll < bottom_prob + 0.05 {
            OutcomeExpr::Top
        } else {
            OutcomeExpr::base(LEAF_NAMES[rng.random_range(0..LEAF_NAMES.len())])
        };
    }
    let l = random_expr_with(rng, max_depth - 1, bottom_prob, allow_ftf);
    let r = random_expr_with(rng, max_depth - 1, bottom_prob, allow_ftf);
    let n_ops: u8 = if allow_ftf { 4 } else { 3 };
    match rng.random_range(0..n_ops) {
        0 => OutcomeExpr::seq(l, r),
        1 => OutcomeExpr::all_to_finish(l, r),
        2 => {
            let w = 0.05 + rng.random::<f64>() * 0.9;
            OutcomeExpr::prob_choice_p(l, r, w)
        }
        _ => OutcomeExpr::any_to_finish(l, r),
    }
}

/// A random expression over the full grammar.
pub fn random_expr(rng: &mut impl Rng, max_depth: usize) -> OutcomeExpr {
    random_expr_with(rng, max_depth, 0.08, true)
}

fn sub(rng: &mut impl Rng) -> OutcomeExpr {
    random_expr_with(rng, 2, 0.08, true)
}

fn w(rng: &mut impl Rng) -> f64 {
    0.05 + rng.random::<f64>() * 0.95
}

/// `o <a|a'> bot` with a random core: the shape failure accumulation eats.
fn bubble(rng: &mut impl Rng) -> OutcomeExpr {
    OutcomeExpr::prob_choice(sub(rng), OutcomeExpr::Bottom, w(rng), w(rng))
}

/// A random expression matching the pattern of the named rewrite rule
/// (catalog or derived), with random weights kept away from the rules'
/// degenerate preconditions.
pub fn random_match_for_rule(rng: &mut impl Rng, rule_id: &str) -> OutcomeExpr {
    use OutcomeExpr::{Bottom, Top};
    match rule_id {
        "choice-bot-collapse" => OutcomeExpr::prob_choice(Bottom, Bottom, w(rng), w(rng)),
        "choice-top-collapse" => OutcomeExpr::prob_choice(Top, Top, w(rng), w(rng)),
        "bot-seq" => OutcomeExpr::seq(Bottom, sub(rng)),
        "seq-bot" => OutcomeExpr::seq(sub(rng), Bottom),
        "top-seq" => OutcomeExpr::seq(Top, sub(rng)),
        "seq-top" => OutcomeExpr::seq(sub(rng), Top),
        "top-atf" => OutcomeExpr::all_to_finish(Top, sub(rng)),
        "bot-ftf" => OutcomeExpr::any_to_finish(Bottom, sub(rng)),
        "choice-bot-left-commute" => OutcomeExpr::seq(bubble(rng), sub(rng)),
        "choice-bot-right-commute" => OutcomeExpr::seq(sub(rng), bubble(rng)),
        "choice-top-left-commute" => OutcomeExpr::seq(
            OutcomeExpr::prob_choice(sub(rng), Top, w(rng), w(rng)),
            sub(rng),
        ),
        "choice-top-right-commute" => OutcomeExpr::seq(
            sub(rng),
            OutcomeExpr::prob_choice(sub(rng), Top, w(rng), w(rng)),
        ),
        "choice-top-renest" => OutcomeExpr::prob_choice(
            sub(rng),
            OutcomeExpr::prob_choice(sub(rng), Top, w(rng), w(rng)),
            w(rng),
            w(rng),
        ),
        "choice-bot-merge" => OutcomeExpr::prob_choice(
            Bottom,
            OutcomeExpr::prob_choice(Bottom, sub(rng), w(rng), w(rng)),
            w(rng),
            w(rng),
        ),
        "reassoc-left" => OutcomeExpr::prob_choice(
            sub(rng),
            OutcomeExpr::prob_choice(sub(rng), sub(rng), w(rng), w(rng)),
            w(rng),
            w(rng),
        ),
        "reassoc-right" => OutcomeExpr::prob_choice(
            OutcomeExpr::prob_choice(sub(rng), sub(rng), w(rng), w(rng)),
            sub(rng),
            w(rng),
            w(rng),
        ),
        "seq-dist-right" => OutcomeExpr::seq(
            sub(rng),
            OutcomeExpr::prob_choice(sub(rng), sub(rng), w(rng), w(rng)),
        ),
        "seq-dist-left" => OutcomeExpr::seq(
            OutcomeExpr::prob_choice(sub(rng), sub(rng), w(rng), w(rng)),
            sub(rng),
        ),
        "atf-dist-right" => OutcomeExpr::all_to_finish(
            sub(rng),
            OutcomeExpr::prob_choice(sub(rng), sub(rng), w(rng), w(rng)),
        ),
        "atf-dist-left" => OutcomeExpr::all_to_finish(
            OutcomeExpr::prob_choice(sub(rng), sub(rng), w(rng), w(rng)),
            sub(rng),
        ),
        "ftf-dist-right" => OutcomeExpr::any_to_finish(
            sub(rng),
            OutcomeExpr::prob_choice(sub(rng), sub(rng), w(rng), w(rng)),
        ),
        "ftf-dist-left" => OutcomeExpr::any_to_finish(
            OutcomeExpr::prob_choice(sub(rng), sub(rng), w(rng), w(rng)),
            sub(rng),
        ),
        "fail-acc-seq" => OutcomeExpr::seq(bubble(rng), bubble(rng)),
        "fail-acc-choice" => OutcomeExpr::prob_choice(bubble(rng), bubble(rng), w(rng), w(rng)),
        "fail-acc-atf" => OutcomeExpr::all_to_finish(bubble(rng), bubble(rng)),
        // derived helper steps
        "choice-swap" => OutcomeExpr::prob_choice(sub(rng), sub(rng), w(rng), w(rng)),
        "choice-degenerate-left" => OutcomeExpr::prob_choice(sub(rng), sub(rng), w(rng), 0.0),
        "choice-degenerate-right" => OutcomeExpr::prob_choice(sub(rng), sub(rng), 0.0, w(rng)),
        "atf-bot-left" => OutcomeExpr::all_to_finish(Bottom, sub(rng)),
        "atf-bot-right" => OutcomeExpr::all_to_finish(sub(rng), Bottom),
        "atf-top-right" => OutcomeExpr::all_to_finish(sub(rng), Top),
        "ftf-bot-right" => OutcomeExpr::any_to_finish(sub(rng), Bottom),
        "ftf-top-left" => OutcomeExpr::any_to_finish(Top, sub(rng)),
        "ftf-top-right" => OutcomeExpr::any_to_finish(sub(rng), Top),
        other => panic!("no generator for rule {other}"),
    }
}

/// Evaluate both expressions under the assignment and return the CDF
/// sup-distance and the absolute intangible-mass difference.
pub fn evaluation_gap(
    a: &OutcomeExpr,
    b: &OutcomeExpr,
    assignment: &BasicAssignment,
) -> (f64, f64) {
    let da = evaluate(a, assignment).expect("evaluation succeeds");
    let db = evaluate(b, assignment).expect("evaluation succeeds");
    let sup = da.cdf_sup_distance(&db).expect("same grid");
    (sup, (da.intangible() - db.intangible()).abs())
}

/// Union of base names of several expressions.
pub fn all_names(exprs: &[&OutcomeExpr]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for e in exprs {
        for n in e.base_names() {
            if !names.contains(&n) {
                names.push(n);
            }
        }
    }
    names
}
