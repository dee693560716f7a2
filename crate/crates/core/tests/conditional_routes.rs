use combgen::conditional::{
    averaged_acceptance_asymptotic, averaged_conditional_sample, averaged_conditional_sample_with_budget,
    block_moment_statistic, limit_order_statistics, limit_quenched_sample, quenched_registry, QuenchedConfig,
};
use combgen::rng::run_replicates;
use combgen::stats::{ks_one_sample, ks_two_sample, mean_within_se, uniform_cdf};
use combgen::verify::quenched_batch;
use combgen::Error;

#[test]
fn averaged_pair_at_moderate_eps_matches_exact_density() {
    let eps = 0.05;
    let t = run_replicates(10_000, 101, |rng, _| Ok(averaged_conditional_sample(2, eps, rng)?.ranked_times[0])).unwrap();
    let exact = move |x: f64| (1.0 - (-eps * x.clamp(0.0, 1.0)).exp()) / (1.0 - (-eps).exp());
    assert!(ks_one_sample("exact", &t, exact).unwrap().pass);
    assert!(ks_one_sample("uniform", &t, uniform_cdf).unwrap().statistic < 0.02);
}

#[test]
fn averaged_budget_exhaustion_is_reported() {
    let mut rng = combgen::rng::replicate_rng(102, 0);
    let e = averaged_conditional_sample_with_budget(4, 1e-3, 10, &mut rng).unwrap_err();
    assert!(matches!(e, Error::BudgetExhausted { .. }));
    assert!((averaged_acceptance_asymptotic(3, 0.01) - 1.5e-4).abs() < 1e-12);
}

#[test]
fn ranked_averaged_times_have_simplex_density() {
    // sorted pair with density 2 on the simplex: P(max <= b) = b²
    let rows = run_replicates(10_000, 103, |rng, _| Ok(averaged_conditional_sample(3, 0.01, rng)?.ranked_times)).unwrap();
    assert!(rows.iter().all(|r| r[0] <= r[1]));
    let max: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    assert!(ks_one_sample("max", &max, |b| b.clamp(0.0, 1.0).powi(2)).unwrap().pass);
}

#[test]
fn min_of_four_sorted_uniforms() {
    let m = run_replicates(10_000, 104, |rng, _| Ok(limit_order_statistics(5, rng)?[0])).unwrap();
    assert!(mean_within_se("min", &m, 0.2, 3.0).unwrap().pass);
}

#[test]
fn limit_spacings_sum_to_kill_length() {
    let s = run_replicates(200, 105, |rng, _| limit_quenched_sample(4, rng)).unwrap();
    for x in &s {
        assert_eq!(x.spacings.len(), 5);
        assert_eq!(x.sups.len(), 3);
        assert!((x.spacings.iter().sum::<f64>() - x.kill_length).abs() < 1e-9);
        assert!(x.sups.iter().all(|&h| h > 0.0 && h < 1.0));
    }
}

#[test]
fn quenched_routes_agree_at_coarse_eps() {
    let cfg = QuenchedConfig::new(2, 0.1);
    let registry = quenched_registry();
    let batch = |name: &str, seed| quenched_batch(registry.get(name).unwrap().as_ref(), &cfg, 4_000, seed).unwrap();
    let roulette = batch("roulette", 106);
    for (name, seed) in [("full-comb", 107), ("rejection", 108)] {
        let other = batch(name, seed);
        let a: Vec<f64> = roulette.iter().map(|s| s.scaled_times()[0]).collect();
        let b: Vec<f64> = other.iter().map(|s| s.scaled_times()[0]).collect();
        assert!(ks_two_sample(name, &a, &b).unwrap().pass, "{name} times");
        let a: Vec<f64> = roulette.iter().map(|s| s.scaled_length()).collect();
        let b: Vec<f64> = other.iter().map(|s| s.scaled_length()).collect();
        assert!(ks_two_sample(name, &a, &b).unwrap().pass, "{name} lengths");
    }
}

#[test]
fn quenched_times_stay_below_eps() {
    let cfg = QuenchedConfig::new(4, 0.01);
    let s = quenched_batch(quenched_registry().get("roulette").unwrap().as_ref(), &cfg, 300, 109).unwrap();
    for q in &s {
        assert_eq!(q.coalescence_times.len(), 3);
        assert!(q.coalescence_times.iter().all(|&h| h >= 0.0 && h <= q.eps));
        assert!(q.block_length > 0.0 && q.block_length <= 1.0);
    }
}

#[test]
fn block_moments_near_factorials() {
    let z2 = run_replicates(10_000, 110, |rng, _| block_moment_statistic(2, 1e-3, rng)).unwrap();
    let mean2 = z2.iter().sum::<f64>() / z2.len() as f64;
    assert!((1.9..=2.1).contains(&mean2), "{mean2}");
    let z3 = run_replicates(10_000, 111, |rng, _| block_moment_statistic(3, 1e-3, rng)).unwrap();
    let mean3 = z3.iter().sum::<f64>() / z3.len() as f64;
    assert!((5.5..=6.5).contains(&mean3), "{mean3}");
}
