//! Test statistics used by the verification harness: Kolmogorov-Smirnov
//! distances with asymptotic p-values, correlation measures with Fisher
//! intervals, and small summary helpers.

use std::f64::consts::PI;

/// Two-sided 99% normal quantile.
pub const Z_TWO_SIDED_99: f64 = 2.575_829_303_548_900_4;

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and unbiased sample variance by Welford's online recurrence.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    assert!(xs.len() >= 2);
    let mut m = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let d = x - m;
        m += d / (i + 1) as f64;
        m2 += d * (x - m);
    }
    (m, m2 / (xs.len() - 1) as f64)
}

/// Sample median (average of the middle pair for even lengths).
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Survival function of the Kolmogorov distribution,
/// `P(sup |B(t)| > x)` for a Brownian bridge `B`.
///
/// Small arguments go through the theta-function form of the CDF; larger ones
/// through the alternating exponential series.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        let q = (-(PI * PI) / (8.0 * x * x)).exp();
        let cdf = (2.0 * PI).sqrt() / x * (q + q.powi(9) + q.powi(25) + q.powi(49));
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100u32 {
            let term = (-2.0 * (k * k) as f64 * x * x).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-16 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Outcome of a Kolmogorov-Smirnov comparison.
#[derive(Clone, Copy, Debug)]
pub struct KsOutcome {
    /// Sup distance between the compared distribution functions.
    pub statistic: f64,
    /// Asymptotic p-value `kolmogorov_sf(sqrt(n) * statistic)`.
    pub p_value: f64,
    /// Effective sample size entering the p-value.
    pub effective_n: f64,
}

/// One-sample KS test of `samples` against the continuous CDF `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsOutcome {
    let n = samples.len();
    assert!(n > 0);
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n as f64);
        d = d.max((i + 1) as f64 / n as f64 - f);
    }
    KsOutcome {
        statistic: d,
        p_value: kolmogorov_sf((n as f64).sqrt() * d),
        effective_n: n as f64,
    }
}

/// Two-sample KS test; ties are consumed jointly so equal values never
/// inflate the distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsOutcome {
    let (n, m) = (a.len(), b.len());
    assert!(n > 0 && m > 0);
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] == v {
            i += 1;
        }
        while j < m && y[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let eff = (n * m) as f64 / (n + m) as f64;
    KsOutcome {
        statistic: d,
        p_value: kolmogorov_sf(eff.sqrt() * d),
        effective_n: eff,
    }
}

/// CDF of the exponential distribution with the given mean.
pub fn exponential_cdf(mean: f64) -> impl Fn(f64) -> f64 {
    assert!(mean > 0.0);
    move |x: f64| {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - (-x / mean).exp()
        }
    }
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation with average ranks on ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Fisher-z confidence interval for a correlation estimated from `n` pairs.
pub fn fisher_interval(rho: f64, n: usize, z: f64) -> (f64, f64) {
    assert!(n > 3);
    let clamped = rho.clamp(-1.0 + 1e-15, 1.0 - 1e-15);
    let zbar = clamped.atanh();
    let se = 1.0 / ((n - 3) as f64).sqrt();
    ((zbar - z * se).tanh(), (zbar + z * se).tanh())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_matches_classical_critical_values() {
        // Critical points of the asymptotic distribution at 10%, 5%, 1%.
        assert!((kolmogorov_sf(1.224) - 0.10).abs() < 0.002);
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 0.002);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 0.001);
        // Continuity across the series switch point.
        let lo = kolmogorov_sf(1.18 - 1e-9);
        let hi = kolmogorov_sf(1.18 + 1e-9);
        assert!((lo - hi).abs() < 1e-6);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert!(kolmogorov_sf(4.0) < 1e-6);
    }

    #[test]
    fn ks_one_sample_detects_the_wrong_law() {
        // Uniform grid on (0, 1) against an exponential.
        let samples: Vec<f64> = (1..=500).map(|i| i as f64 / 501.0).collect();
        let against_exp = ks_one_sample(&samples, exponential_cdf(1.0));
        assert!(against_exp.p_value < 1e-6);
        let uniform_cdf = |x: f64| x.clamp(0.0, 1.0);
        let against_uniform = ks_one_sample(&samples, uniform_cdf);
        assert!(against_uniform.p_value > 0.5);
    }

    #[test]
    fn ks_two_sample_handles_ties() {
        let a = [1.0, 1.0, 2.0, 3.0];
        let b = [1.0, 1.0, 2.0, 3.0];
        let out = ks_two_sample(&a, &b);
        assert_eq!(out.statistic, 0.0);
        assert_eq!(out.p_value, 1.0);
        let c = [10.0, 11.0, 12.0, 13.0];
        let far = ks_two_sample(&a, &c);
        assert_eq!(far.statistic, 1.0);
    }

    #[test]
    fn correlation_measures() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 4.0, 6.0, 8.0, 10.0];
        assert!((pearson(&x, &y) - 1.0).abs() < 1e-12);
        let y_rev: Vec<f64> = y.iter().rev().copied().collect();
        assert!((pearson(&x, &y_rev) + 1.0).abs() < 1e-12);
        // Monotone but nonlinear: Spearman sees perfect order.
        let y_exp: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert!((spearman(&x, &y_exp) - 1.0).abs() < 1e-12);
        assert!(pearson(&x, &y_exp) < 1.0);
    }

    #[test]
    fn fisher_interval_brackets_the_estimate() {
        let (lo, hi) = fisher_interval(0.3, 100, Z_TWO_SIDED_99);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!(lo > 0.0, "clear correlation stays significant");
        let (lo0, hi0) = fisher_interval(0.01, 100, Z_TWO_SIDED_99);
        assert!(lo0 < 0.0 && hi0 > 0.0, "tiny correlation is not significant");
    }

    #[test]
    fn summaries() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert_eq!(median(&xs), 2.5);
        assert_eq!(median(&xs[..3]), 2.0);
        let (m, v) = mean_var(&xs);
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-12);
    }
}
