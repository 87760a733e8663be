use ::deltaq::testing;
use ::deltaq::*;
use rand::Rng as _;

#[test]
fn probe_round6() {
    let mut rng = testing::rng(666);
    let grid = Grid::with_dt(0.00025, 40.0).unwrap();
    // advance generator to round 6 (each round: expr + assignment)
    for _ in 0..6 {
        let e = testing::random_expr(&mut rng, 5);
        let _ = testing::random_assignment(&mut rng, grid, &e.base_names());
    }
    let expr = testing::random_expr(&mut rng, 5);
    let asg = testing::random_assignment(&mut rng, grid, &expr.base_names());
    println!("expr: {expr}");
    for n in expr.base_names() {
        println!("  {n}: {:?}", asg.get(&n));
    }
    let analytic = evaluate(&expr, &asg).unwrap();
    let report = sample(&expr, &asg, 60_006, 100_000);
    let cdf = analytic.cdf();
    let mut worst = (0usize, 0.0f64);
    for (k, f) in cdf.iter().enumerate() {
        let t = k as f64 * grid.dt();
        let g = (report.empirical_cdf_at(t) - f).abs();
        if g > worst.1 { worst = (k, g); }
    }
    let (k, g) = worst;
    let t = k as f64 * grid.dt();
    println!("worst gap {g:.5} at bin {k} (t={t})");
    for j in k.saturating_sub(3)..(k+4).min(cdf.len()) {
        let tj = j as f64 * grid.dt();
        println!("  bin {j} t={tj:.6}: analytic {:.5} empirical {:.5}", cdf[j], report.empirical_cdf_at(tj));
    }
    println!("Im analytic {} empirical {}", analytic.intangible(), report.failure_fraction());
    println!("overflow analytic {} empirical {}", analytic.overflow(), report.overflow as f64 / 1e5);
}
