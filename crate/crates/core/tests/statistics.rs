//! Calibration of the statistical machinery: reference tail values, test
//! size and power, interval coverage, and the chain oracle on a hand-solved
//! routing matrix.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use gjnlab::limits::w_matrix;
use gjnlab::network::RoutingMatrix;
use gjnlab::stats::{
    exponential_cdf, fisher_interval, kolmogorov_sf, ks_one_sample, pearson, Z_TWO_SIDED_99,
};
use gjnlab::verify::{absorption_check, absorption_oracle};

#[test]
fn kolmogorov_tail_matches_independent_references() {
    // Reference values computed with an independent implementation of the
    // limiting sup-bridge distribution.
    let table = [
        (0.3, 9.999906941986655e-01),
        (0.5, 9.639452436648751e-01),
        (0.7, 7.112351950296893e-01),
        (0.8284, 4.987011812378588e-01),
        (1.0, 2.699996716773546e-01),
        (1.2, 1.122496666707250e-01),
        (1.3581, 4.999963043166740e-02),
        (1.5, 2.221796261652513e-02),
        (1.6276, 1.000153733306078e-02),
        (2.0, 6.709252557796953e-04),
        (2.5, 7.453306344157342e-06),
    ];
    for (x, reference) in table {
        let got = kolmogorov_sf(x);
        let gap = (got - reference).abs();
        assert!(
            gap <= 1e-9 * reference.max(1e-3),
            "sf({x}) = {got:e} vs reference {reference:e}"
        );
    }
}

#[test]
fn exponential_ks_keeps_its_size_under_the_null() {
    let runs = 300;
    let n = 300;
    let mut rejections = 0;
    let mut p_sum = 0.0;
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6E00 + run);
        let samples: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln() * 2.5).collect();
        let out = ks_one_sample(&samples, exponential_cdf(2.5));
        p_sum += out.p_value;
        if out.p_value < 0.01 {
            rejections += 1;
        }
    }
    // Expect about three rejections in three hundred; nine is three binomial
    // standard deviations above that.
    assert!(rejections <= 9, "{rejections} rejections in {runs} null runs");
    let mean_p = p_sum / runs as f64;
    assert!((0.40..=0.60).contains(&mean_p), "mean p-value {mean_p}");
}

#[test]
fn exponential_ks_flags_a_fifteen_percent_mean_error() {
    for run in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6E50 + run);
        let samples: Vec<f64> = (0..5000).map(|_| -(1.0 - rng.random::<f64>()).ln() * 1.15).collect();
        let out = ks_one_sample(&samples, exponential_cdf(1.0));
        assert!(out.p_value < 0.01, "run {run}: p {high}", high = out.p_value);
    }
}

#[test]
fn fisher_intervals_cover_the_true_correlation() {
    let rho_true = 0.6f64;
    let lift = (1.0 - rho_true * rho_true).sqrt();
    let runs = 300;
    let n = 500;
    let mut covered = 0;
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6F00 + run);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            xs.push(a);
            ys.push(rho_true * a + lift * b);
        }
        let rho = pearson(&xs, &ys);
        let (lo, hi) = fisher_interval(rho, n, Z_TWO_SIDED_99);
        if lo <= rho_true && rho_true <= hi {
            covered += 1;
        }
        // This effect size is far beyond the interval width, so a zero
        // correlation must always be excluded.
        assert!(lo > 0.0, "run {run}: interval [{lo}, {hi}] reaches zero");
    }
    // 99% nominal coverage; 291 is three binomial standard deviations low.
    assert!(covered >= 291, "only {covered} of {runs} intervals covered");
}

#[test]
fn absorption_oracle_and_solver_agree_on_a_hand_chain() {
    let routing =
        RoutingMatrix::from_rows(&[vec![0.2, 0.3], vec![0.4, 0.1]]).unwrap();
    // By hand: the first column allows no detours, so its entries are the
    // direct probabilities; reaching station 2 may loop at station 1 first,
    // giving 0.3 / (1 - 0.2) above the diagonal and 0.1 + 0.4 * 0.375 on it.
    let hand = DMatrix::from_row_slice(2, 2, &[0.2, 0.375, 0.4, 0.25]);
    let w = w_matrix(&routing).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!((w.get(i, j) - hand[(i, j)]).abs() <= 1e-15);
        }
    }

    let mc = absorption_oracle(&routing, 200_000, 0xD7C);
    for i in 0..2 {
        for j in 0..2 {
            let se = (hand[(i, j)] * (1.0 - hand[(i, j)]) / 200_000.0).sqrt();
            let z = (mc.estimate[(i, j)] - hand[(i, j)]).abs() / se;
            assert!(z <= 3.0, "entry ({i}, {j}) off by {z:.2} standard errors");
        }
    }

    let result = absorption_check("hand-chain", &routing, 200_000, 0xD7C).unwrap();
    assert!(result.passed());
}
