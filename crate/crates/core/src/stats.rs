//! KS, chi-square, Poisson-count and correlation checks producing [`TestReport`]s.
//!
//! Pass/fail is decided by a declared bound on the statistic; p-values are
//! informational.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

use crate::error::{Error, Result};

pub const MIN_KS_SAMPLES: usize = 100;
/// Asymptotic 99% quantile of the Kolmogorov distribution.
pub const KS_CRITICAL_1PCT: f64 = 1.63;
pub const CHI_SQUARE_MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Threshold {
    /// Pass iff `statistic < bound`.
    Below { bound: f64 },
    /// Pass iff `statistic > bound`.
    Above { bound: f64 },
    /// Pass iff `lower ≤ statistic ≤ upper`.
    Within { lower: f64, upper: f64 },
}

impl Threshold {
    pub fn accepts(&self, x: f64) -> bool {
        match *self {
            Threshold::Below { bound } => x < bound,
            Threshold::Above { bound } => x > bound,
            Threshold::Within { lower, upper } => x >= lower && x <= upper,
        }
    }
}

impl std::fmt::Display for Threshold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Threshold::Below { bound } => write!(f, "< {bound:.4}"),
            Threshold::Above { bound } => write!(f, "> {bound:.4}"),
            Threshold::Within { lower, upper } => write!(f, "in [{lower:.4}, {upper:.4}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub sample_size: usize,
    pub statistic: f64,
    pub threshold: Threshold,
    pub p_value: Option<f64>,
    pub pass: bool,
    pub seed: Option<u64>,
    pub params: BTreeMap<String, Value>,
}

impl TestReport {
    pub fn new(name: impl Into<String>, sample_size: usize, statistic: f64, threshold: Threshold) -> Self {
        TestReport {
            name: name.into(),
            sample_size,
            statistic,
            threshold,
            p_value: None,
            pass: threshold.accepts(statistic),
            seed: None,
            params: BTreeMap::new(),
        }
    }

    pub fn with_threshold(mut self, threshold: Threshold) -> Self {
        self.threshold = threshold;
        self.pass = threshold.accepts(self.statistic);
        self
    }

    pub fn with_p_value(mut self, p: f64) -> Self {
        self.p_value = Some(p);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// One summary line: `PASS name: statistic (threshold) n=… [p=…]`.
    pub fn summary_line(&self) -> String {
        let mut s = format!(
            "{} {}: {:.6} ({}) n={}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.statistic,
            self.threshold,
            self.sample_size
        );
        if let Some(p) = self.p_value {
            s.push_str(&format!(" p={p:.4}"));
        }
        s
    }
}

/// Plain-text table of reports.
pub fn summary_table(reports: &[TestReport]) -> String {
    let width = reports.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
    let mut out = format!(
        "{:<6} {:<width$} {:>12} {:<24} {:>8} {:>8}\n",
        "result", "test", "statistic", "threshold", "n", "p"
    );
    for r in reports {
        out.push_str(&format!(
            "{:<6} {:<width$} {:>12.6} {:<24} {:>8} {:>8}\n",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.statistic,
            r.threshold.to_string(),
            r.sample_size,
            r.p_value.map(|p| format!("{p:.4}")).unwrap_or_else(|| "-".into()),
        ));
    }
    out
}

fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("samples contain NaN"));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `Q_KS(λ) = 2 Σ_{j≥1} (-1)^{j-1} e^{-2 j² λ²}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut prev = 0.0f64;
    for j in 1..=100 {
        let term = sign * (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() <= 1e-10 * prev.abs() || term.abs() < 1e-300 {
            return (2.0 * sum).clamp(0.0, 1.0);
        }
        prev = term;
        sign = -sign;
    }
    1.0
}

/// Asymptotic p-value of a KS distance with effective sample size `n`.
pub fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)
}

pub fn ks_threshold(n_eff: f64) -> f64 {
    KS_CRITICAL_1PCT / n_eff.sqrt()
}

/// `sup_x |F_n(x) - F(x)|`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let v = sorted_finite(samples)?;
    let n = v.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        d = d.max((f - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    Ok(d)
}

/// One-sample KS against `cdf`, thresholded at the 1% critical distance `1.63/√n`.
pub fn ks_one_sample(name: &str, samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestReport> {
    if samples.len() < MIN_KS_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples, KS needs at least {MIN_KS_SAMPLES}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let d = ks_statistic(samples, cdf)?;
    Ok(TestReport::new(name, samples.len(), d, Threshold::Below { bound: ks_threshold(n) })
        .with_p_value(ks_p_value(d, n)))
}

/// `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_two_sample_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted_finite(a)?;
    let b = sorted_finite(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

pub fn ks_two_sample(name: &str, a: &[f64], b: &[f64]) -> Result<TestReport> {
    if a.len() < MIN_KS_SAMPLES || b.len() < MIN_KS_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} and {} samples, KS needs at least {MIN_KS_SAMPLES} each",
            a.len(),
            b.len()
        )));
    }
    let d = ks_two_sample_statistic(a, b)?;
    let n_eff = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    Ok(TestReport::new(name, a.len() + b.len(), d, Threshold::Below { bound: ks_threshold(n_eff) })
        .with_p_value(ks_p_value(d, n_eff)))
}

/// Merges adjacent bins (left to right, remainder into the last bin) until
/// every bin expects at least `min_expected`.
pub fn merge_bins(observed: &[f64], expected: &[f64], min_expected: f64) -> (Vec<f64>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&oi, &ei) in observed.iter().zip(expected) {
        o += oi;
        e += ei;
        if e >= min_expected {
            obs.push(o);
            exp.push(e);
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match (obs.last_mut(), exp.last_mut()) {
            (Some(lo), Some(le)) => {
                *lo += o;
                *le += e;
            }
            _ => {
                obs.push(o);
                exp.push(e);
            }
        }
    }
    (obs, exp)
}

fn chi_square_critical(df: f64, level: f64) -> Result<(ChiSquared, f64)> {
    let dist = ChiSquared::new(df).map_err(|e| Error::invalid(format!("chi-square df {df}: {e}")))?;
    let crit = dist.inverse_cdf(1.0 - level);
    Ok((dist, crit))
}

/// Pearson goodness of fit with `df = bins - 1 - fitted`, at significance `level`.
pub fn chi_square_counts_with(
    name: &str,
    observed: &[f64],
    expected: &[f64],
    fitted: usize,
    level: f64,
) -> Result<TestReport> {
    if observed.len() != expected.len() {
        return Err(Error::invalid("observed and expected bin counts differ in length"));
    }
    let (obs, exp) = merge_bins(observed, expected, CHI_SQUARE_MIN_EXPECTED);
    if obs.len() < 2 + fitted || exp.iter().any(|&e| e < CHI_SQUARE_MIN_EXPECTED) {
        return Err(Error::InsufficientData(format!(
            "only {} bins with expected count ≥ {CHI_SQUARE_MIN_EXPECTED}",
            obs.len()
        )));
    }
    let stat: f64 = obs.iter().zip(&exp).map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = (obs.len() - 1 - fitted) as f64;
    let (dist, crit) = chi_square_critical(df, level)?;
    let n = observed.iter().sum::<f64>() as usize;
    Ok(TestReport::new(name, n, stat, Threshold::Below { bound: crit })
        .with_p_value(dist.sf(stat))
        .with_param("df", df)
        .with_param("bins", obs.len()))
}

pub fn chi_square_counts(name: &str, observed: &[f64], expected: &[f64]) -> Result<TestReport> {
    chi_square_counts_with(name, observed, expected, 0, 0.01)
}

/// Two-sample homogeneity over a common integer support.
pub fn chi_square_homogeneity(name: &str, a: &[u64], b: &[u64]) -> Result<TestReport> {
    let max = a.iter().chain(b).copied().max().ok_or_else(|| Error::InsufficientData("no samples".into()))?;
    let mut ca = vec![0.0; max as usize + 1];
    let mut cb = vec![0.0; max as usize + 1];
    for &x in a {
        ca[x as usize] += 1.0;
    }
    for &x in b {
        cb[x as usize] += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let total = na + nb;
    // merge on the pooled expectation of the smaller sample
    let pooled: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| (x + y) * na.min(nb) / total).collect();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut sa, mut sb, mut se) = (0.0, 0.0, 0.0);
    for ((x, y), p) in ca.iter().zip(&cb).zip(&pooled) {
        sa += x;
        sb += y;
        se += p;
        if se >= CHI_SQUARE_MIN_EXPECTED {
            bins.push((sa, sb));
            sa = 0.0;
            sb = 0.0;
            se = 0.0;
        }
    }
    if sa + sb > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += sa;
                last.1 += sb;
            }
            None => bins.push((sa, sb)),
        }
    }
    if bins.len() < 2 {
        return Err(Error::InsufficientData("fewer than two usable bins".into()));
    }
    let mut stat = 0.0;
    for &(x, y) in &bins {
        let col = x + y;
        let ea = col * na / total;
        let eb = col * nb / total;
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let df = (bins.len() - 1) as f64;
    let (dist, crit) = chi_square_critical(df, 0.01)?;
    Ok(TestReport::new(name, a.len() + b.len(), stat, Threshold::Below { bound: crit })
        .with_p_value(dist.sf(stat))
        .with_param("df", df))
}

/// Chi-square of observed counts against `Poisson(mean)`, upper tail merged.
pub fn poisson_count_test(name: &str, counts: &[u64], mean: f64) -> Result<TestReport> {
    if counts.is_empty() {
        return Err(Error::InsufficientData("no counts".into()));
    }
    let dist = Poisson::new(mean).map_err(|e| Error::invalid(format!("Poisson mean {mean}: {e}")))?;
    let n = counts.len() as f64;
    let mut k_max = 0u64;
    while n * dist.sf(k_max) >= CHI_SQUARE_MIN_EXPECTED {
        k_max += 1;
    }
    let mut observed = vec![0.0; k_max as usize + 1];
    for &c in counts {
        observed[c.min(k_max) as usize] += 1.0;
    }
    let mut expected: Vec<f64> = (0..k_max).map(|k| n * dist.pmf(k)).collect();
    expected.push(n * (1.0 - dist.cdf(k_max.saturating_sub(1))).max(0.0));
    if k_max == 0 {
        expected[0] = n;
    }
    chi_square_counts(name, &observed, &expected).map(|r| r.with_param("mean", mean))
}

pub fn pearson_correlation(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 3 {
        return Err(Error::InsufficientData("correlation needs at least 3 pairs".into()));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InsufficientData("a coordinate has zero variance".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Pass iff `|ρ| < bound`.
pub fn correlation_check(name: &str, pairs: &[(f64, f64)], bound: f64) -> Result<TestReport> {
    let rho = pearson_correlation(pairs)?;
    Ok(TestReport::new(name, pairs.len(), rho.abs(), Threshold::Below { bound }).with_param("rho", rho))
}

pub fn mean_and_se(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData("need at least two samples".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

pub fn sample_variance(samples: &[f64]) -> Result<f64> {
    let (_, se) = mean_and_se(samples)?;
    Ok(se * se * samples.len() as f64)
}

/// Pass iff the sample mean lies within `k` standard errors of `target`.
pub fn mean_within_se(name: &str, samples: &[f64], target: f64, k: f64) -> Result<TestReport> {
    let (mean, se) = mean_and_se(samples)?;
    Ok(TestReport::new(
        name,
        samples.len(),
        mean,
        Threshold::Within {
            lower: target - k * se,
            upper: target + k * se,
        },
    )
    .with_param("target", target)
    .with_param("standard_error", se))
}

/// Pass iff the sample mean lies in `[lower, upper]`.
pub fn mean_in_range(name: &str, samples: &[f64], lower: f64, upper: f64) -> Result<TestReport> {
    let (mean, se) = mean_and_se(samples)?;
    Ok(TestReport::new(name, samples.len(), mean, Threshold::Within { lower, upper })
        .with_param("standard_error", se))
}

/// Empirical CDF as `x,F(x)` rows, one per distinct value.
pub fn write_ecdf_csv<W: Write>(samples: &[f64], mut out: W) -> Result<()> {
    let v = sorted_finite(samples)?;
    let n = v.len() as f64;
    writeln!(out, "x,ecdf")?;
    for (i, x) in v.iter().enumerate() {
        if i + 1 < v.len() && v[i + 1] == *x {
            continue;
        }
        writeln!(out, "{x},{}", (i + 1) as f64 / n)?;
    }
    Ok(())
}

pub fn uniform_cdf(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

pub fn exponential_cdf(rate: f64) -> impl Fn(f64) -> f64 {
    move |x| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replicate_rng;
    use rand::Rng;
    use rand_distr::{Distribution, Poisson as PoissonDistr};

    #[test]
    fn kolmogorov_tail_values() {
        assert!((kolmogorov_survival(1.63) - 0.0098).abs() < 2e-4);
        assert!((kolmogorov_survival(1.36) - 0.0495).abs() < 5e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn ks_uniform_samples_pass() {
        let mut rng = replicate_rng(1, 0);
        let v: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let r = ks_one_sample("u", &v, uniform_cdf).unwrap();
        assert!(r.pass, "{}", r.summary_line());
        assert!((r.threshold_bound() - 0.0163).abs() < 1e-12);
    }

    #[test]
    fn ks_constant_samples_fail() {
        let v = vec![0.5; 1000];
        let r = ks_one_sample("c", &v, uniform_cdf).unwrap();
        assert!(r.statistic >= 0.5);
        assert!(!r.pass);
        assert!(ks_one_sample("e", &[], uniform_cdf).is_err());
    }

    #[test]
    fn ks_statistic_small_case() {
        // points 0.1, 0.2 vs U(0,1): ECDF jumps to 1 at 0.2, gap 0.8
        assert!((ks_statistic(&[0.1, 0.2], uniform_cdf).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn two_sample_identical_is_zero() {
        let mut rng = replicate_rng(2, 0);
        let v: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let r = ks_two_sample("same", &v, &v).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.pass);
        assert!((ks_two_sample_statistic(&[1.0, 2.0], &[3.0, 4.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn merging_keeps_totals() {
        let (o, e) = merge_bins(&[1.0, 2.0, 10.0, 1.0], &[1.0, 4.5, 8.0, 0.5], 5.0);
        assert_eq!(o, vec![3.0, 11.0]);
        assert_eq!(e, vec![5.5, 8.5]);
    }

    #[test]
    fn poisson_counts_pass() {
        let mut rng = replicate_rng(3, 0);
        let p = PoissonDistr::new(4.0).unwrap();
        let counts: Vec<u64> = (0..10_000).map(|_| p.sample(&mut rng) as u64).collect();
        let r = poisson_count_test("poisson", &counts, 4.0).unwrap();
        assert!(r.pass, "{}", r.summary_line());
        let shifted: Vec<u64> = counts.iter().map(|c| c + 1).collect();
        assert!(!poisson_count_test("shifted", &shifted, 4.0).unwrap().pass);
    }

    #[test]
    fn homogeneity_detects_shift() {
        let mut rng = replicate_rng(4, 0);
        let p = PoissonDistr::new(6.0).unwrap();
        let a: Vec<u64> = (0..5000).map(|_| p.sample(&mut rng) as u64).collect();
        let b: Vec<u64> = (0..5000).map(|_| p.sample(&mut rng) as u64).collect();
        assert!(chi_square_homogeneity("same", &a, &b).unwrap().pass);
        let c: Vec<u64> = b.iter().map(|x| x + 1).collect();
        assert!(!chi_square_homogeneity("shifted", &a, &c).unwrap().pass);
    }

    #[test]
    fn correlation_bounds() {
        let pairs: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 2.0 * i as f64)).collect();
        let r = correlation_check("perfect", &pairs, 0.05).unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-12);
        assert!(!r.pass);
        assert!(correlation_check("flat", &[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)], 0.05).is_err());
    }

    #[test]
    fn threshold_semantics_and_serialization() {
        assert!(Threshold::Below { bound: 1.0 }.accepts(0.5));
        assert!(!Threshold::Below { bound: 1.0 }.accepts(1.0));
        assert!(Threshold::Within { lower: 1.0, upper: 2.0 }.accepts(2.0));
        let r = TestReport::new("t", 10, 0.5, Threshold::Above { bound: 0.1 }).with_seed(3);
        let s = serde_json::to_string(&r).unwrap();
        let back: TestReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
        assert!(s.contains("\"kind\":\"above\""));
    }

    #[test]
    fn ecdf_csv_rows() {
        let mut buf = Vec::new();
        write_ecdf_csv(&[0.5, 0.25, 0.5, 1.0], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,ecdf\n0.25,0.25\n0.5,0.75\n1,1\n");
    }

    impl TestReport {
        fn threshold_bound(&self) -> f64 {
            match self.threshold {
                Threshold::Below { bound } | Threshold::Above { bound } => bound,
                Threshold::Within { upper, .. } => upper,
            }
        }
    }
}
