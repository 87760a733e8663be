//! Property tests: grammar round-trips, kernel mass laws, the timeliness
//! partial order, and the algebra of intangible masses.

use proptest::prelude::*;

use deltaq::testing;
use deltaq::{parse, DeltaQ, Grid, OutcomeExpr};

// -- expression strategies ----------------------------------------------------

fn leaf() -> impl Strategy<Value = OutcomeExpr> {
    prop_oneof![
        Just(OutcomeExpr::Top),
        Just(OutcomeExpr::Bottom),
        "[a-z][a-z0-9_]{0,8}".prop_filter_map("reserved word", |s| {
            (s != "top" && s != "bot").then(|| OutcomeExpr::base(s))
        }),
    ]
}

fn weight() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.0),
        Just(1.0),
        Just(0.95),
        Just(1e-16),
        Just(5e-18),
        (1u64..u64::MAX).prop_map(|bits| f64::from_bits(bits % (1u64 << 62)).abs())
            .prop_filter("finite", |w| w.is_finite()),
        0.0..1.0f64,
    ]
}

fn expr() -> impl Strategy<Value = OutcomeExpr> {
    leaf().prop_recursive(5, 64, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| OutcomeExpr::seq(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| OutcomeExpr::all_to_finish(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| OutcomeExpr::any_to_finish(l, r)),
            (inner.clone(), inner.clone(), weight(), weight()).prop_filter_map(
                "zero total weight",
                |(l, r, a, b)| (a + b > 0.0).then(|| OutcomeExpr::prob_choice(l, r, a, b))
            ),
            (inner, 0.0..=1.0f64).prop_map(|(l, p)| OutcomeExpr::prob_choice_p(l, OutcomeExpr::Top, p)),
        ]
    })
}

proptest! {
    /// Printing is the inverse of parsing, down to weight bits.
    #[test]
    fn parse_print_round_trip(e in expr()) {
        let printed = e.to_string();
        let reparsed = parse(&printed).unwrap_or_else(|err| panic!("reparse of `{printed}` failed: {err}"));
        prop_assert_eq!(reparsed, e);
    }

    /// The `<[p]>` sugar rejects probabilities outside [0,1] and the pair
    /// form rejects negative or empty weights.
    #[test]
    fn parser_rejects_out_of_range_weights(p in prop_oneof![1.0001..1e6f64, Just(1.5), Just(2.0)]) {
        let text = format!("a <[{p}]> b");
        prop_assert!(parse(&text).is_err(), "{text} should not parse");
        let neg = format!("a <-{p}|1> b");
        prop_assert!(parse(&neg).is_err(), "{neg} should not parse");
    }

    /// Substitution is idempotent when the replacement does not mention
    /// the substituted name.
    #[test]
    fn substitute_idempotent_without_occurrences(e in expr()) {
        let replacement = parse("(x ->- y)").unwrap();
        let once = e.substitute("a", &replacement);
        let twice = once.substitute("a", &replacement);
        prop_assert_eq!(once, twice);
    }
}

// -- kernel invariants --------------------------------------------------------

#[test]
fn operations_conserve_mass_and_intangible_algebra() {
    let mut rng = testing::rng(404);
    let grid = Grid::new(0.1, 200).unwrap();
    for _ in 0..200 {
        let a = testing::random_deltaq(&mut rng, grid);
        let b = testing::random_deltaq(&mut rng, grid);
        let (ia, ib) = (a.intangible(), b.intangible());

        let conv = a.convolve(&b).unwrap();
        let atf = a.all_to_finish(&b).unwrap();
        let ftf = a.any_to_finish(&b).unwrap();
        let mix = a.mixture(&b, 0.3, 0.7).unwrap();

        for (name, dq) in [("conv", &conv), ("atf", &atf), ("ftf", &ftf), ("mix", &mix)] {
            assert!(
                (dq.total_mass() - 1.0).abs() <= 1e-9,
                "{name} lost mass: {}",
                dq.total_mass()
            );
        }
        let both = 1.0 - (1.0 - ia) * (1.0 - ib);
        assert!((conv.intangible() - both).abs() <= 1e-9);
        assert!((atf.intangible() - both).abs() <= 1e-9);
        assert!((ftf.intangible() - ia * ib).abs() <= 1e-9);
        assert!((mix.intangible() - (0.3 * ia + 0.7 * ib)).abs() <= 1e-9);
    }
}

#[test]
fn binary_operations_commute_and_associate() {
    let mut rng = testing::rng(405);
    let grid = Grid::new(0.1, 128).unwrap();
    for _ in 0..50 {
        let a = testing::random_deltaq(&mut rng, grid);
        let b = testing::random_deltaq(&mut rng, grid);
        let c = testing::random_deltaq(&mut rng, grid);

        type Op = fn(&DeltaQ, &DeltaQ) -> Result<DeltaQ, deltaq::DeltaQError>;
        let ops: [(&str, Op); 3] = [
            ("conv", DeltaQ::convolve),
            ("atf", DeltaQ::all_to_finish),
            ("ftf", DeltaQ::any_to_finish),
        ];
        for (name, op) in ops {
            let ab = op(&a, &b).unwrap();
            let ba = op(&b, &a).unwrap();
            assert!(ab.cdf_sup_distance(&ba).unwrap() <= 1e-9, "{name} not commutative");
            let ab_c = op(&ab, &c).unwrap();
            let a_bc = op(&a, &op(&b, &c).unwrap()).unwrap();
            assert!(ab_c.cdf_sup_distance(&a_bc).unwrap() <= 1e-9, "{name} not associative");
        }
        // mixture commutes once the weights swap with the operands
        let m1 = a.mixture(&b, 2.0, 5.0).unwrap();
        let m2 = b.mixture(&a, 5.0, 2.0).unwrap();
        assert!(m1.cdf_sup_distance(&m2).unwrap() <= 1e-12);
    }
}

#[test]
fn leq_is_a_partial_order_on_samples() {
    let mut rng = testing::rng(406);
    let grid = Grid::new(0.1, 100).unwrap();
    let pool: Vec<DeltaQ> = (0..30).map(|_| testing::random_deltaq(&mut rng, grid)).collect();
    for x in &pool {
        assert!(x.leq(x).unwrap(), "reflexivity");
    }
    for x in &pool {
        for y in &pool {
            let xy = x.leq(y).unwrap();
            let yx = y.leq(x).unwrap();
            if xy && yx {
                // antisymmetry up to tolerance
                assert!(x.cdf_sup_distance(y).unwrap() <= 1e-9);
                assert!((x.intangible() - y.intangible()).abs() <= 1e-9);
            }
            if !(xy || yx) {
                continue;
            }
            for z in &pool {
                if xy && y.leq(z).unwrap() {
                    assert!(x.leq(z).unwrap(), "transitivity");
                }
            }
        }
    }
}

#[test]
fn mixture_closure_over_extreme_weights() {
    // probabilistic choice always lands back in valid distributions, even
    // with very lopsided weights
    let mut rng = testing::rng(407);
    let grid = Grid::new(0.1, 100).unwrap();
    for _ in 0..50 {
        let a = testing::random_deltaq(&mut rng, grid);
        let b = testing::random_deltaq(&mut rng, grid);
        for (wl, wr) in [(1.0, 0.0), (0.0, 3.0), (1e-300, 1.0), (1.0, 1e-18), (5.0, 5.0)] {
            let m = a.mixture(&b, wl, wr).unwrap();
            assert!((m.total_mass() - 1.0).abs() <= 1e-9);
            let cdf = m.cdf();
            assert!(cdf.windows(2).all(|w| w[1] >= w[0] - 1e-12), "cdf must be monotone");
        }
    }
}
