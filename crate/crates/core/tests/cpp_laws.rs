use combgen::conditional::limit_quenched_sample;
use combgen::cpp::{exact_interval_sups, sample_cpp, sample_killed_brownian_cpp, sample_size_biased_killed_cpp};
use combgen::intensity::{brownian, brownian_capped_unit};
use combgen::rng::run_replicates;
use combgen::stats::{
    chi_square_homogeneity, exponential_cdf, ks_one_sample, ks_two_sample, mean_within_se, poisson_count_test,
};
use combgen::Error;

#[test]
fn brownian_counts_above_half_are_poisson_four() {
    let counts = run_replicates(10_000, 81, |rng, _| Ok(sample_cpp(&brownian(), 1.0, 0.5, rng)?.comb.len() as u64)).unwrap();
    let r = poisson_count_test("count", &counts, 4.0).unwrap();
    assert!(r.pass, "{}", r.summary_line());
}

#[test]
fn counts_above_one_have_rate_two() {
    let x = 1.5;
    let counts = run_replicates(10_000, 82, |rng, _| {
        let c = sample_cpp(&brownian(), x, 0.25, rng)?.comb;
        Ok(c.heights().iter().filter(|&&h| h >= 1.0).count() as u64)
    })
    .unwrap();
    assert!(poisson_count_test("count", &counts, 2.0 * x).unwrap().pass);
}

#[test]
fn height_tail_ratio() {
    let hs: Vec<f64> = run_replicates(5_000, 83, |rng, _| Ok(sample_cpp(&brownian(), 1.0, 0.5, rng)?.comb.heights().to_vec()))
        .unwrap()
        .concat();
    let above: Vec<f64> = hs.iter().map(|&h| if h >= 1.0 { 1.0 } else { 0.0 }).collect();
    assert!(mean_within_se("P(H>=1 | H>=0.5)", &above, 0.5, 3.0).unwrap().pass);
    assert!(hs.iter().all(|&h| h >= 0.5));
}

#[test]
fn kill_length_is_exponential_two() {
    let l1 = run_replicates(10_000, 84, |rng, _| Ok(sample_killed_brownian_cpp(0.01, rng)?.1)).unwrap();
    let r = ks_one_sample("l1", &l1, exponential_cdf(2.0)).unwrap();
    assert!(r.statistic < 0.02, "{}", r.summary_line());
    assert!(mean_within_se("mean l1", &l1, 0.5, 3.0).unwrap().pass);
    let heights = run_replicates(500, 85, |rng, _| Ok(sample_killed_brownian_cpp(0.01, rng)?.0.comb.max_height())).unwrap();
    assert!(heights.iter().all(|&h| h < 1.0));
}

#[test]
fn size_biased_kill_lengths() {
    let zero = run_replicates(10_000, 86, |rng, _| Ok(sample_size_biased_killed_cpp(0, 0.1, rng)?.kill_length)).unwrap();
    assert!(ks_one_sample("n=0", &zero, exponential_cdf(2.0)).unwrap().pass);
    let three = run_replicates(10_000, 87, |rng, _| Ok(sample_size_biased_killed_cpp(3, 0.1, rng)?.kill_length)).unwrap();
    assert!(mean_within_se("n=3", &three, 2.0, 3.0).unwrap().pass);
}

#[test]
fn exact_sups_match_closed_forms() {
    let s = run_replicates(20_000, 88, |rng, _| Ok(exact_interval_sups(&[1.0], &brownian(), rng)?[0])).unwrap();
    let below: Vec<f64> = s.iter().map(|&v| if v <= 0.5 { 1.0 } else { 0.0 }).collect();
    assert!(mean_within_se("P(S<=0.5)", &below, (-4.0f64).exp(), 3.0).unwrap().pass);
    assert!(ks_one_sample("sup", &s, |t| if t <= 0.0 { 0.0 } else { (-2.0 / t).exp() }).unwrap().pass);

    let x = 0.7;
    let c = run_replicates(10_000, 89, |rng, _| Ok(exact_interval_sups(&[x], &brownian_capped_unit(), rng)?[0])).unwrap();
    assert!(c.iter().all(|&v| v < 1.0));
    let cdf = move |s: f64| if s <= 0.0 { 0.0 } else if s >= 1.0 { 1.0 } else { (-2.0 * x * (1.0 / s - 1.0)).exp() };
    assert!(ks_one_sample("capped sup", &c, cdf).unwrap().pass);

    assert!(matches!(
        exact_interval_sups(&[0.0], &brownian(), &mut combgen::rng::replicate_rng(1, 0)),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn dilated_cpp_keeps_its_law() {
    // dilating a CPP on [0,1] by 2 gives a CPP on [0,2] with doubled floor
    let a = 2.0;
    let dilated = run_replicates(10_000, 90, |rng, _| {
        let c = sample_cpp(&brownian(), 1.0, 0.2, rng)?.comb.dilate(a)?;
        Ok(c.heights().iter().filter(|&&h| h >= 1.0).count() as u64)
    })
    .unwrap();
    let direct = run_replicates(10_000, 91, |rng, _| {
        let c = sample_cpp(&brownian(), a, 0.4, rng)?.comb;
        Ok(c.heights().iter().filter(|&&h| h >= 1.0).count() as u64)
    })
    .unwrap();
    assert!(chi_square_homogeneity("dilation", &dilated, &direct).unwrap().pass);
}

#[test]
fn floor_does_not_change_high_atoms() {
    let coarse = run_replicates(10_000, 92, |rng, _| Ok(sample_cpp(&brownian(), 1.0, 0.5, rng)?.comb.max_height().max(0.5))).unwrap();
    let fine = run_replicates(10_000, 93, |rng, _| Ok(sample_cpp(&brownian(), 1.0, 0.05, rng)?.comb.max_height().max(0.5))).unwrap();
    assert!(ks_two_sample("floor", &coarse, &fine).unwrap().pass);
}

#[test]
fn disjoint_interval_sups_are_uncorrelated() {
    let pairs = run_replicates(10_000, 94, |rng, _| {
        let c = sample_cpp(&brownian(), 2.0, 0.01, rng)?.comb;
        Ok((c.metric(0.0, 1.0 - 1e-9)?, c.metric(1.0 + 1e-9, 2.0)?))
    })
    .unwrap();
    let r = combgen::stats::correlation_check("sups", &pairs, 0.05).unwrap();
    assert!(r.pass, "{}", r.summary_line());
}

#[test]
fn size_biased_cpp_sups_match_limit_sampler() {
    // metric between consecutive uniform points of a size-biased killed CPP
    let n = 3;
    let from_cpp = run_replicates(5_000, 95, |rng, _| {
        use rand::Rng;
        let s = sample_size_biased_killed_cpp(n, 1e-3, rng)?;
        loop {
            let mut u: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * s.kill_length).collect();
            u.sort_by(f64::total_cmp);
            match s.comb.metric(u[0], u[1]) {
                Ok(h) => return Ok(h),
                Err(Error::AtAtomPosition(_)) => continue,
                Err(e) => return Err(e),
            }
        }
    })
    .unwrap();
    let limit = run_replicates(5_000, 96, |rng, _| Ok(limit_quenched_sample(n, rng)?.sups[0])).unwrap();
    let trimmed: Vec<f64> = from_cpp.iter().map(|h| h.max(1e-3)).collect();
    let limit: Vec<f64> = limit.iter().map(|h| h.max(1e-3)).collect();
    assert!(ks_two_sample("cpp vs limit", &trimmed, &limit).unwrap().pass);
}
