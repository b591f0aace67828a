//! Statistical verification layer: seeded hypothesis tests and trend checks
//! that confront simulated networks and diffusions with the computed limit
//! parameters.
//!
//! Every check derives all of its randomness from an explicit master seed, so
//! a report is a pure function of its configuration. Replications fan out
//! through [`runner::replications`] and are collected in index order; the
//! worker count can change wall time but never a single output byte.
//!
//! Two kinds of claims appear. Absolute claims (identities, distributional
//! fits at a fixed scale) yield `pass` or `fail` against a pinned threshold.
//! Convergence claims are judged along a decreasing scale grid and yield
//! `trend-pass` when the tracked metric shrinks as the asymptotics predict;
//! checks that need structure the input lacks (several scale blocks, say)
//! report `not-applicable` instead of vacuously passing.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::gjn::{self, GjnError, SimOptions};
use crate::limits::{
    covariance_gamma, eliminate, limit_descriptor_for_network, station_drift,
    station_variance_direct, station_variance_quadratic, w_from_reflection, w_matrix,
    LimitComponent, LimitError, RegimeKind,
};
use crate::linalg;
use crate::network::{
    solve_traffic, DistributionSpec, NetworkError, NetworkSpec, RoutingMatrix, ScaleRegime,
};
use crate::rng::{derive_seed, replication_seed, StreamFamily};
use crate::runner;
use crate::srbm::{self, PrelimitFamily, SrbmError};
use crate::stats::{self, Z_TWO_SIDED_99};

/// Smallest sample size the distributional tests accept.
pub const MIN_KS_SAMPLES: usize = 100;

/// Default significance level for distributional and interval tests.
pub const ALPHA: f64 = 0.01;

/// Safety cap on a single absorption chain; the restricted walks here exit
/// with probability bounded away from zero at every step.
const CHAIN_STEP_CAP: usize = 100_000;

// Seed salts and stream tags keep every check on its own disjoint part of
// the generator space, so adding or removing one check never shifts the
// randomness of another.
const SALT_NETWORKS: u64 = 0x11;
const SALT_MATRICES: u64 = 0x12;
const SALT_ABSORPTION: u64 = 0x13;
const SALT_SCAN: u64 = 0x14;
const SALT_STATIONARY: u64 = 0x15;
const SALT_LIMIT_DRAWS: u64 = 0x16;
const STREAM_PRELIMIT: u64 = 1;
const STREAM_LIMIT: u64 = 2;
const STREAM_SUP: u64 = 3;
const STREAM_REGULATOR: u64 = 4;
const STREAM_COVARIANCE: u64 = 5;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("{got} samples, but the test needs at least {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error("bad check configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error(transparent)]
    Gjn(#[from] GjnError),
    #[error(transparent)]
    Srbm(#[from] SrbmError),
}

/// Outcome of one named check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The tracked metric moved the way the asymptotics predict.
    TrendPass,
    /// The input lacks the structure the claim is about.
    NotApplicable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::TrendPass => "trend-pass",
            Verdict::NotApplicable => "not-applicable",
        })
    }
}

/// Whether a failed check should fail the whole run.
///
/// Trend checks judge finite-scale movement toward a limit; they are reported
/// but do not gate the process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Absolute,
    Trend,
}

/// One named scalar attached to a result, in report order.
#[derive(Clone, Debug, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
}

impl Metric {
    fn new(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
        }
    }
}

/// Self-contained record of one check: what was measured, against which
/// threshold, on how many replications, and under which seed.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci: Option<[f64; 2]>,
    pub threshold: f64,
    pub verdict: Verdict,
    pub category: Category,
    pub replications: u64,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub metrics: Vec<Metric>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TestResult {
    fn absolute(name: &str, statistic: f64, threshold: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            statistic,
            p_value: None,
            ci: None,
            threshold,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            category: Category::Absolute,
            replications: 0,
            seeds: Vec::new(),
            metrics: Vec::new(),
            note: None,
        }
    }

    /// A check skipped because the input lacks the needed structure.
    pub fn not_applicable(name: &str, reason: &str) -> Self {
        Self {
            name: name.into(),
            statistic: 0.0,
            p_value: None,
            ci: None,
            threshold: 0.0,
            verdict: Verdict::NotApplicable,
            category: Category::Absolute,
            replications: 0,
            seeds: Vec::new(),
            metrics: Vec::new(),
            note: Some(reason.into()),
        }
    }

    pub fn passed(&self) -> bool {
        !matches!(self.verdict, Verdict::Fail)
    }

    /// True when this result should make the whole run exit nonzero.
    pub fn gating_failure(&self) -> bool {
        self.category == Category::Absolute && self.verdict == Verdict::Fail
    }
}

/// Metric values tracked along a strictly decreasing scale grid.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergenceSweep {
    pub r_grid: Vec<f64>,
    pub metric_per_r: Vec<f64>,
    /// Whether the metric shrank monotonically along the grid.
    pub monotone_trend: bool,
}

impl ConvergenceSweep {
    fn new(r_grid: &[f64], metric_per_r: Vec<f64>) -> Self {
        assert_eq!(r_grid.len(), metric_per_r.len());
        let monotone_trend = metric_per_r.windows(2).all(|w| w[1] < w[0]);
        Self {
            r_grid: r_grid.to_vec(),
            metric_per_r,
            monotone_trend,
        }
    }
}

fn require_decreasing_grid(r_grid: &[f64]) -> Result<(), VerifyError> {
    if r_grid.is_empty() {
        return Err(VerifyError::BadConfig("empty scale grid".into()));
    }
    if r_grid.iter().any(|&r| !(0.0 < r && r < 1.0)) {
        return Err(VerifyError::BadConfig(
            "scale grid entries must lie in (0, 1)".into(),
        ));
    }
    if r_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(VerifyError::BadConfig(
            "scale grid must decrease strictly".into(),
        ));
    }
    Ok(())
}

/// One-sample Kolmogorov-Smirnov test against the exponential law with the
/// given mean, at significance `alpha`.
pub fn ks_exponential(
    name: &str,
    samples: &[f64],
    mean: f64,
    alpha: f64,
) -> Result<TestResult, VerifyError> {
    if samples.len() < MIN_KS_SAMPLES {
        return Err(VerifyError::TooFewSamples {
            got: samples.len(),
            need: MIN_KS_SAMPLES,
        });
    }
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(VerifyError::BadConfig(format!(
            "exponential mean {mean} must be positive"
        )));
    }
    let ks = stats::ks_one_sample(samples, stats::exponential_cdf(mean));
    let mut out = TestResult::absolute(name, ks.statistic, alpha, ks.p_value >= alpha);
    out.p_value = Some(ks.p_value);
    out.replications = samples.len() as u64;
    out.metrics.push(Metric::new("target-mean", mean));
    Ok(out)
}

/// Tests whether two paired samples are uncorrelated: Pearson correlation
/// with a 99% Fisher interval as the criterion, Spearman rank correlation
/// reported alongside to flag monotone non-linear dependence.
pub fn independence_test(name: &str, x: &[f64], y: &[f64]) -> Result<TestResult, VerifyError> {
    if x.len() != y.len() {
        return Err(VerifyError::BadConfig(format!(
            "paired samples of lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 8 {
        return Err(VerifyError::TooFewSamples {
            got: x.len(),
            need: 8,
        });
    }
    let rho = finite_or_zero(stats::pearson(x, y));
    let spear = finite_or_zero(stats::spearman(x, y));
    let (lo, hi) = stats::fisher_interval(rho, x.len(), Z_TWO_SIDED_99);
    let mut out = TestResult::absolute(name, rho.abs(), 1.0 - ALPHA, lo <= 0.0 && 0.0 <= hi);
    out.ci = Some([lo, hi]);
    out.replications = x.len() as u64;
    out.metrics.push(Metric::new("pearson", rho));
    out.metrics.push(Metric::new("spearman", spear));
    Ok(out)
}

/// Correlations degenerate to 0/0 on constant samples; an exactly flat sample
/// carries no evidence of dependence.
fn finite_or_zero(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        0.0
    }
}

/// Monte Carlo estimate of the visit probabilities `w[i][j]`: starting a
/// routing chain at station `i`, the probability of reaching `j` before
/// leaving the network or entering any station above `j`. The first step
/// always counts, so the diagonal estimates a return probability.
#[derive(Clone, Debug)]
pub struct AbsorptionEstimate {
    pub estimate: DMatrix<f64>,
    /// Binomial standard error per entry, from the estimate itself.
    pub std_error: DMatrix<f64>,
    pub chains: u64,
}

/// Simulates the defining chains of the visit probabilities, one independent
/// substream per matrix entry.
pub fn absorption_oracle(routing: &RoutingMatrix, chains: u64, seed: u64) -> AbsorptionEstimate {
    let n = routing.dim();
    let p = routing.p();
    let mut estimate = DMatrix::zeros(n, n);
    let mut std_error = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, (i * n + j) as u64));
            let mut hits = 0u64;
            for _ in 0..chains {
                let mut state = i;
                for _ in 0..CHAIN_STEP_CAP {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut next = None;
                    for k in 0..n {
                        acc += p[(state, k)];
                        if u < acc {
                            next = Some(k);
                            break;
                        }
                    }
                    match next {
                        None => break,
                        Some(k) if k == j => {
                            hits += 1;
                            break;
                        }
                        Some(k) if k > j => break,
                        Some(k) => state = k,
                    }
                }
            }
            let w = hits as f64 / chains as f64;
            estimate[(i, j)] = w;
            std_error[(i, j)] = (w * (1.0 - w) / chains as f64).sqrt();
        }
    }
    AbsorptionEstimate {
        estimate,
        std_error,
        chains,
    }
}

/// Compares the analytic visit probabilities of a routing matrix against the
/// chain oracle, entry by entry. Deviations are scored in binomial standard
/// errors computed from the analytic value, with an absolute floor so exact
/// zero-or-one entries must match to within `1e-9`.
pub fn absorption_check(
    name: &str,
    routing: &RoutingMatrix,
    chains: u64,
    seed: u64,
) -> Result<TestResult, VerifyError> {
    let w = w_matrix(routing)?;
    let mc = absorption_oracle(routing, chains, seed);
    let n = routing.dim();
    let floor = 1e-9 / 3.0;
    let mut worst = 0.0f64;
    let mut worst_entry = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            let truth = w.get(i, j);
            let se = (truth * (1.0 - truth) / chains as f64).sqrt().max(floor);
            let z = (mc.estimate[(i, j)] - truth).abs() / se;
            if z > worst {
                worst = z;
                worst_entry = (i, j);
            }
        }
    }
    let mut out = TestResult::absolute(name, worst, 3.0, worst <= 3.0);
    out.replications = chains;
    out.seeds = vec![seed];
    out.metrics
        .push(Metric::new("worst-entry-row", worst_entry.0 as f64));
    out.metrics
        .push(Metric::new("worst-entry-col", worst_entry.1 as f64));
    Ok(out)
}

/// Checks, for every station of every given network, that the two variance
/// routes agree: the three-part visit-probability sum against the quadratic
/// form in the flow covariance. The statistic is the worst relative gap.
pub fn variance_identity_audit(
    name: &str,
    specs: &[NetworkSpec],
) -> Result<TestResult, VerifyError> {
    if specs.is_empty() {
        return Err(VerifyError::BadConfig("no networks to audit".into()));
    }
    let mut worst = 0.0f64;
    for spec in specs {
        let lam = solve_traffic(spec)?;
        let w = w_matrix(&spec.routing)?;
        let gamma = covariance_gamma(spec)?;
        for j in 0..spec.stations() {
            let direct = station_variance_direct(spec, &lam, &w, j);
            let quadratic = station_variance_quadratic(&gamma, &w, j);
            let gap = (direct - quadratic).abs() / direct.abs().max(1e-30);
            worst = worst.max(gap);
        }
    }
    let mut out = TestResult::absolute(name, worst, 1e-10, worst <= 1e-10);
    out.replications = specs.len() as u64;
    Ok(out)
}

/// Checks the block-elimination identities on every given reflection matrix:
/// the recorded transform satisfies `E * R = G` to machine precision, and
/// each pivot diagonal of the eliminated matrix equals one minus the matching
/// return probability.
pub fn elimination_audit(name: &str, mats: &[DMatrix<f64>]) -> Result<TestResult, VerifyError> {
    if mats.is_empty() {
        return Err(VerifyError::BadConfig("no matrices to audit".into()));
    }
    let mut worst_product = 0.0f64;
    let mut worst_diagonal = 0.0f64;
    for r in mats {
        let n = r.nrows();
        let w = w_from_reflection(r)?;
        for k in 1..=n {
            let elim = eliminate(r, k)?;
            let residual = &elim.e * r - &elim.g;
            worst_product = worst_product.max(linalg::inf_norm(&residual));
            let pivot = elim.g[(k - 1, k - 1)];
            let gap = (pivot - (1.0 - w.return_probability(k - 1))).abs();
            worst_diagonal = worst_diagonal.max(gap);
        }
    }
    let worst = worst_product.max(worst_diagonal);
    let mut out = TestResult::absolute(name, worst, 1e-12, worst <= 1e-12);
    out.replications = mats.len() as u64;
    out.metrics
        .push(Metric::new("product-residual", worst_product));
    out.metrics
        .push(Metric::new("diagonal-residual", worst_diagonal));
    Ok(out)
}

/// Configuration of a functional convergence probe: compare one scaled
/// station of the pre-limit diffusion family, read at a fixed time on a block
/// clock, against the matching limit component across a decreasing scale
/// grid.
pub struct FunctionalLimitConfig<'a> {
    pub family: &'a PrelimitFamily,
    /// Block whose time scale drives the probe.
    pub clock: usize,
    /// Network station whose scaled coordinate is compared.
    pub station: usize,
    /// Limit law of that station.
    pub limit: &'a LimitComponent,
    /// Starting levels per station, each on its own block scale.
    pub xi: Vec<f64>,
    pub r_grid: Vec<f64>,
    /// Probe time on the chosen clock.
    pub horizon: f64,
    /// Euler steps, identical on both sides so discretization bias cancels.
    pub steps: usize,
    pub replications: usize,
    pub alpha: f64,
    pub master_seed: u64,
    pub workers: usize,
}

/// Two-sample Kolmogorov-Smirnov comparison of pre-limit members against
/// their limit law along the scale grid. Pre-limit replications reuse the
/// same seeds at every scale (common random numbers), which sharpens the
/// trend; the limit draws are fresh per scale.
pub fn functional_limit_check(
    cfg: &FunctionalLimitConfig,
) -> Result<(TestResult, ConvergenceSweep), VerifyError> {
    require_decreasing_grid(&cfg.r_grid)?;
    if cfg.replications < MIN_KS_SAMPLES {
        return Err(VerifyError::TooFewSamples {
            got: cfg.replications,
            need: MIN_KS_SAMPLES,
        });
    }
    if !(cfg.horizon > 0.0) || cfg.steps == 0 {
        return Err(VerifyError::BadConfig(
            "probe needs a positive horizon and at least one step".into(),
        ));
    }
    let limit_coord = cfg
        .limit
        .stations
        .iter()
        .position(|&s| s == cfg.station)
        .ok_or_else(|| {
            VerifyError::BadConfig(format!(
                "station {} is not carried by the limit component",
                cfg.station
            ))
        })?;
    let mut metric_per_r = Vec::with_capacity(cfg.r_grid.len());
    let mut p_per_r = Vec::with_capacity(cfg.r_grid.len());
    for (ri, &r) in cfg.r_grid.iter().enumerate() {
        let member = cfg.family.component(r, cfg.clock, &cfg.xi)?;
        let pre = runner::replications(cfg.replications, cfg.workers, |rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(cfg.master_seed, rep as u64));
            rng.set_stream(STREAM_PRELIMIT);
            let path = srbm::simulate(&member, cfg.horizon, cfg.steps, &mut rng)
                .expect("member validated at construction");
            path.z.value(cfg.station, path.z.len() - 1)
        });
        let limit_seed = derive_seed(cfg.master_seed, SALT_LIMIT_DRAWS + ri as u64);
        let lim = runner::replications(cfg.replications, cfg.workers, |rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(limit_seed, rep as u64));
            rng.set_stream(STREAM_LIMIT);
            let path = srbm::simulate_limit(cfg.limit, cfg.horizon, cfg.steps, &mut rng)
                .expect("limit component validated at construction");
            path.z.value(limit_coord, path.z.len() - 1)
        });
        let ks = stats::ks_two_sample(&pre, &lim);
        metric_per_r.push(ks.statistic);
        p_per_r.push(ks.p_value);
    }
    let sweep = ConvergenceSweep::new(&cfg.r_grid, metric_per_r);
    let last_pass = *p_per_r.last().unwrap() >= cfg.alpha;
    let mut out = TestResult::absolute(
        &format!("functional-limit-station-{}", cfg.station),
        *sweep.metric_per_r.last().unwrap(),
        cfg.alpha,
        sweep.monotone_trend && last_pass,
    );
    out.verdict = if sweep.monotone_trend && last_pass {
        Verdict::TrendPass
    } else {
        Verdict::Fail
    };
    out.category = Category::Trend;
    out.p_value = Some(*p_per_r.last().unwrap());
    out.replications = cfg.replications as u64;
    out.seeds = vec![cfg.master_seed];
    for (i, &r) in cfg.r_grid.iter().enumerate() {
        out.metrics
            .push(Metric::new(format!("ks-distance-r-{r}"), sweep.metric_per_r[i]));
        out.metrics
            .push(Metric::new(format!("ks-p-value-r-{r}"), p_per_r[i]));
    }
    Ok((out, sweep))
}

/// Configuration for the two scale-separation probes of a multi-block
/// family.
pub struct ScaleSeparationConfig<'a> {
    pub family: &'a PrelimitFamily,
    /// Starting levels per station on their own scales; the slow-station
    /// probe needs a positive entry for the last station, whose starting
    /// level then towers over the fast window.
    pub xi: Vec<f64>,
    pub r_grid: Vec<f64>,
    /// Window length on the observation clock.
    pub horizon: f64,
    pub steps: usize,
    pub replications: usize,
    pub master_seed: u64,
    pub workers: usize,
}

/// Checks the two degeneration mechanisms that decouple blocks as scales
/// separate. On the slowest clock, the first station's scaled path collapses:
/// its median sup must fall strictly along the grid. On the fastest clock,
/// the last station's regulator goes quiet: its median must not grow and must
/// end negligible. A single-block family gets a `not-applicable` verdict, as
/// there is no second scale to separate from.
pub fn scale_separation_check(
    name: &str,
    cfg: &ScaleSeparationConfig,
) -> Result<Vec<TestResult>, VerifyError> {
    let blocks = cfg.family.regime.count();
    let stations = cfg.family.regime.stations();
    if blocks == 1 {
        return Ok(vec![TestResult::not_applicable(
            name,
            "a single-block regime has no scales to separate",
        )]);
    }
    require_decreasing_grid(&cfg.r_grid)?;
    if cfg.xi.len() != stations {
        return Err(VerifyError::BadConfig(format!(
            "{} starting levels for {stations} stations",
            cfg.xi.len()
        )));
    }
    if !(cfg.horizon > 0.0) || cfg.steps == 0 {
        return Err(VerifyError::BadConfig(
            "probe needs a positive horizon and at least one step".into(),
        ));
    }

    // Fast station watched on the slowest clock: the sup shrinks like the
    // ratio of the block scale factors.
    let sup_medians = sweep_medians(cfg, blocks - 1, STREAM_SUP, |path| path.z.sup_abs(0))?;
    let sup_sweep = ConvergenceSweep::new(&cfg.r_grid, sup_medians);
    let mut fast = TestResult::absolute(
        &format!("{name}-fast-station-sup"),
        *sup_sweep.metric_per_r.last().unwrap(),
        0.0,
        sup_sweep.monotone_trend,
    );
    fast.verdict = if sup_sweep.monotone_trend {
        Verdict::TrendPass
    } else {
        Verdict::Fail
    };
    fast.category = Category::Trend;
    fast.replications = cfg.replications as u64;
    fast.seeds = vec![cfg.master_seed];
    for (i, &r) in cfg.r_grid.iter().enumerate() {
        fast.metrics
            .push(Metric::new(format!("median-sup-r-{r}"), sup_sweep.metric_per_r[i]));
    }

    // Slow station's regulator watched on the fastest clock: regulators are
    // nondecreasing, so the terminal value is the sup. It may sit at exactly
    // zero from some scale on, hence nonincreasing with a negligible tail
    // rather than a strict fall.
    let slow_station = stations - 1;
    let reg_medians = sweep_medians(cfg, 0, STREAM_REGULATOR, |path| {
        path.y.value(slow_station, path.y.len() - 1)
    })?;
    let first = reg_medians[0];
    let last = *reg_medians.last().unwrap();
    let nonincreasing = reg_medians.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let quiet_tail = last <= f64::max(1e-3, 0.2 * first);
    let mut slow = TestResult::absolute(
        &format!("{name}-slow-station-regulator"),
        last,
        f64::max(1e-3, 0.2 * first),
        nonincreasing && quiet_tail,
    );
    slow.verdict = if nonincreasing && quiet_tail {
        Verdict::TrendPass
    } else {
        Verdict::Fail
    };
    slow.category = Category::Trend;
    slow.replications = cfg.replications as u64;
    slow.seeds = vec![cfg.master_seed];
    for (i, &r) in cfg.r_grid.iter().enumerate() {
        slow.metrics
            .push(Metric::new(format!("median-regulator-r-{r}"), reg_medians[i]));
    }
    Ok(vec![fast, slow])
}

/// Median of a per-path summary across replications, at each grid scale.
/// Same replication seeds at every scale (common random numbers).
fn sweep_medians(
    cfg: &ScaleSeparationConfig,
    clock: usize,
    stream: u64,
    summary: impl Fn(&crate::skorokhod::Reflection) -> f64 + Sync,
) -> Result<Vec<f64>, VerifyError> {
    let mut medians = Vec::with_capacity(cfg.r_grid.len());
    for &r in &cfg.r_grid {
        let member = cfg.family.component(r, clock, &cfg.xi)?;
        let values = runner::replications(cfg.replications, cfg.workers, |rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(cfg.master_seed, rep as u64));
            rng.set_stream(stream);
            let path = srbm::simulate(&member, cfg.horizon, cfg.steps, &mut rng)
                .expect("member validated at construction");
            summary(&path)
        });
        medians.push(stats::median(&values));
    }
    Ok(medians)
}

/// Checks the covariance of one Brownian motion read on two clocks against
/// the closed form `g_a * g_b * variance * min(t_a / g_a^2, t_b / g_b^2)`,
/// scoring the deviation in standard errors of the product mean.
pub fn bm_covariance_check(
    name: &str,
    variance: f64,
    g_a: f64,
    g_b: f64,
    t_a: f64,
    t_b: f64,
    replications: usize,
    master_seed: u64,
    workers: usize,
) -> TestResult {
    assert!(replications >= 2);
    let pairs = runner::replications(replications, workers, |rep| {
        let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(master_seed, rep as u64));
        rng.set_stream(STREAM_COVARIANCE);
        srbm::scaled_bm_pair(variance, g_a, g_b, t_a, t_b, &mut rng)
    });
    let products: Vec<f64> = pairs.iter().map(|&(a, b)| a * b).collect();
    let mean_a = stats::mean(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let mean_b = stats::mean(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let (mean_ab, var_ab) = stats::mean_var(&products);
    // Both reads are centered, so the product mean estimates the covariance;
    // the mean correction is second-order and kept only for accuracy.
    let cov = mean_ab - mean_a * mean_b;
    let se = (var_ab / replications as f64).sqrt();
    let target = variance * g_a * g_b * f64::min(t_a / (g_a * g_a), t_b / (g_b * g_b));
    let z = (cov - target).abs() / se;
    let mut out = TestResult::absolute(name, z, 3.0, z <= 3.0);
    out.ci = Some([cov - 3.0 * se, cov + 3.0 * se]);
    out.replications = replications as u64;
    out.seeds = vec![master_seed];
    out.metrics.push(Metric::new("covariance", cov));
    out.metrics.push(Metric::new("target", target));
    out.metrics.push(Metric::new("std-error", se));
    out
}

/// Steady-state scan of the one-dimensional reflected Brownian motion:
/// checks the post-burn-in time average against the closed-form mean
/// `variance / (2 |drift|)` and the spaced state reads against the
/// exponential stationary law.
#[allow(clippy::too_many_arguments)]
pub fn rbm_scan_check(
    name: &str,
    drift: f64,
    variance: f64,
    step: f64,
    burn_in: f64,
    spacing: f64,
    samples: usize,
    mean_tol: f64,
    alpha: f64,
    master_seed: u64,
) -> Result<Vec<TestResult>, VerifyError> {
    if !(step > 0.0 && burn_in >= 0.0 && spacing > 0.0) {
        return Err(VerifyError::BadConfig(
            "scan needs positive step and spacing and nonnegative burn-in".into(),
        ));
    }
    let burn_steps = (burn_in / step).round() as usize;
    let spacing_steps = ((spacing / step).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, SALT_SCAN));
    let scan = srbm::stationary_scan_1d(
        drift,
        variance,
        step,
        burn_steps,
        spacing_steps,
        samples,
        &mut rng,
    )?;
    let target = variance / (2.0 * drift.abs());
    let gap = (scan.time_average - target).abs() / target;
    let mut mean_result = TestResult::absolute(
        &format!("{name}-time-average"),
        gap,
        mean_tol,
        gap <= mean_tol,
    );
    mean_result.replications = samples as u64;
    mean_result.seeds = vec![master_seed];
    mean_result
        .metrics
        .push(Metric::new("time-average", scan.time_average));
    mean_result.metrics.push(Metric::new("target-mean", target));
    let mut ks = ks_exponential(&format!("{name}-spaced-reads"), &scan.samples, target, alpha)?;
    ks.seeds = vec![master_seed];
    Ok(vec![mean_result, ks])
}

/// Long-run pre-limit check of one station of a network at a fixed scale:
/// batch-mean time average against the limit mean on the diffusion scale, and
/// spaced point reads against the exponential stationary law of the matching
/// one-dimensional limit.
#[allow(clippy::too_many_arguments)]
pub fn heavy_traffic_stationarity(
    name: &str,
    spec: &NetworkSpec,
    r: f64,
    station: usize,
    burn_in_scaled: f64,
    batch_scaled: f64,
    batches: usize,
    mean_tol: f64,
    alpha: f64,
    event_cap: u64,
    master_seed: u64,
) -> Result<Vec<TestResult>, VerifyError> {
    if station >= spec.stations() {
        return Err(VerifyError::BadConfig(format!(
            "station {station} out of range"
        )));
    }
    let gamma = spec.regime.gamma_station(station, r);
    let time_scale = gamma * gamma;
    let streams = StreamFamily::new(derive_seed(master_seed, SALT_STATIONARY), spec.stations());
    let sample = gjn::stationary_sample(
        spec,
        r,
        &vec![0; spec.stations()],
        burn_in_scaled / time_scale,
        batch_scaled / time_scale,
        batches,
        event_cap,
        &streams,
    )?;
    // Limit mean of the matching one-dimensional reflected Brownian motion.
    let w = w_matrix(&spec.routing)?;
    let gamma_mat = covariance_gamma(spec)?;
    let sigma2 = station_variance_quadratic(&gamma_mat, &w, station);
    let drift = station_drift(&w, spec.regime.slack(station), station);
    let target = sigma2 / (2.0 * drift.abs());

    let scaled_mean = gamma * stats::mean(&sample.batch_means[station]);
    let gap = (scaled_mean - target).abs() / target;
    let mut mean_result = TestResult::absolute(
        &format!("{name}-scaled-mean"),
        gap,
        mean_tol,
        gap <= mean_tol,
    );
    mean_result.replications = batches as u64;
    mean_result.seeds = vec![master_seed];
    mean_result.metrics.push(Metric::new("scaled-mean", scaled_mean));
    mean_result.metrics.push(Metric::new("target-mean", target));

    let points: Vec<f64> = sample.point_samples[station]
        .iter()
        .map(|&q| gamma * q as f64)
        .collect();
    let mut ks = ks_exponential(&format!("{name}-spaced-reads"), &points, target, alpha)?;
    ks.seeds = vec![master_seed];
    Ok(vec![mean_result, ks])
}

/// Configuration of the cross-scale independence sweep on a simulated
/// network.
pub struct IndependenceSweepConfig<'a> {
    pub spec: &'a NetworkSpec,
    /// Station pair whose scaled occupancies are correlated.
    pub stations: (usize, usize),
    pub r_grid: Vec<f64>,
    /// Strictly increasing probe times on the slowest block clock; paths
    /// start empty and every probe contributes a sample pair.
    pub probes: Vec<f64>,
    pub replications: usize,
    pub alpha: f64,
    pub event_cap: u64,
    pub master_seed: u64,
    pub workers: usize,
}

/// Measures the correlation between two scaled stations along the grid. The
/// trend metric pools all probes; the interval test at the smallest scale
/// uses only the final probe, whose pairs are independent across
/// replications. Asymptotically separated stations must decorrelate, so the
/// pooled absolute correlation has to fall strictly and the terminal 99%
/// Fisher interval has to cover zero at the smallest scale.
pub fn independence_sweep(
    cfg: &IndependenceSweepConfig,
) -> Result<(TestResult, ConvergenceSweep), VerifyError> {
    require_decreasing_grid(&cfg.r_grid)?;
    let n = cfg.spec.stations();
    let (sa, sb) = cfg.stations;
    if sa >= n || sb >= n || sa == sb {
        return Err(VerifyError::BadConfig(format!(
            "station pair ({sa}, {sb}) invalid for {n} stations"
        )));
    }
    if cfg.probes.is_empty() || cfg.probes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(VerifyError::BadConfig(
            "probe times must increase strictly".into(),
        ));
    }
    if cfg.replications < 8 {
        return Err(VerifyError::TooFewSamples {
            got: cfg.replications,
            need: 8,
        });
    }
    let slow_clock = cfg.spec.regime.count() - 1;
    let mut metric_per_r = Vec::with_capacity(cfg.r_grid.len());
    let mut interval_bounds = Vec::with_capacity(cfg.r_grid.len());
    let mut terminal_rho = 0.0;
    for &r in &cfg.r_grid {
        let g_slow = cfg.spec.regime.gamma(slow_clock, r);
        let g_a = cfg.spec.regime.gamma_station(sa, r);
        let g_b = cfg.spec.regime.gamma_station(sb, r);
        let time_scale = g_slow * g_slow;
        let obs_times: Vec<f64> = cfg.probes.iter().map(|t| t / time_scale).collect();
        let opts = SimOptions {
            horizon: *obs_times.last().unwrap(),
            obs_times,
            event_cap: cfg.event_cap,
            record_flow: false,
        };
        let runs = runner::replications(cfg.replications, cfg.workers, |rep| {
            let streams = StreamFamily::new(replication_seed(cfg.master_seed, rep as u64), n);
            let out = gjn::simulate(cfg.spec, r, &vec![0; n], &opts, &streams)?;
            let pairs: Vec<(f64, f64)> = (0..cfg.probes.len())
                .map(|k| {
                    (
                        g_a * out.queues[sa][k] as f64,
                        g_b * out.queues[sb][k] as f64,
                    )
                })
                .collect();
            Ok::<_, GjnError>(pairs)
        });
        let per_rep = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
        let mut pooled_a = Vec::with_capacity(cfg.replications * cfg.probes.len());
        let mut pooled_b = Vec::with_capacity(pooled_a.capacity());
        let mut term_a = Vec::with_capacity(cfg.replications);
        let mut term_b = Vec::with_capacity(cfg.replications);
        for pairs in &per_rep {
            for &(a, b) in pairs {
                pooled_a.push(a);
                pooled_b.push(b);
            }
            let &(a, b) = pairs.last().unwrap();
            term_a.push(a);
            term_b.push(b);
        }
        metric_per_r.push(finite_or_zero(stats::pearson(&pooled_a, &pooled_b)).abs());
        terminal_rho = finite_or_zero(stats::pearson(&term_a, &term_b));
        interval_bounds.push(stats::fisher_interval(
            terminal_rho,
            cfg.replications,
            Z_TWO_SIDED_99,
        ));
    }
    let sweep = ConvergenceSweep::new(&cfg.r_grid, metric_per_r);
    let (lo, hi) = *interval_bounds.last().unwrap();
    let covered = lo <= 0.0 && 0.0 <= hi;
    let pass = sweep.monotone_trend && covered;
    let mut out = TestResult::absolute(
        "independence-sweep",
        terminal_rho.abs(),
        1.0 - cfg.alpha,
        pass,
    );
    out.verdict = if pass { Verdict::TrendPass } else { Verdict::Fail };
    out.category = Category::Trend;
    out.ci = Some([lo, hi]);
    out.replications = cfg.replications as u64;
    out.seeds = vec![cfg.master_seed];
    for (i, &r) in cfg.r_grid.iter().enumerate() {
        out.metrics.push(Metric::new(
            format!("pooled-abs-corr-r-{r}"),
            sweep.metric_per_r[i],
        ));
        out.metrics.push(Metric::new(
            format!("terminal-ci-lo-r-{r}"),
            interval_bounds[i].0,
        ));
        out.metrics.push(Metric::new(
            format!("terminal-ci-hi-r-{r}"),
            interval_bounds[i].1,
        ));
    }
    Ok((out, sweep))
}

/// Draws an open network with everywhere-positive external arrivals, row
/// sums bounded away from one, mixed distribution families, and one scale
/// per station.
pub fn random_open_network<R: Rng + ?Sized>(rng: &mut R, max_stations: usize) -> NetworkSpec {
    assert!(max_stations >= 2);
    let n = rng.random_range(2..=max_stations);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let row_sum = rng.random_range(0.2..0.85);
        rows.push(raw.iter().map(|e| e / total * row_sum).collect::<Vec<_>>());
    }
    let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.2)).collect();
    let menu = [
        DistributionSpec::Exponential,
        DistributionSpec::Deterministic,
        DistributionSpec::Uniform { width: 1.0 },
        DistributionSpec::Erlang { phases: 3 },
        DistributionSpec::Hyperexponential {
            p: 0.3,
            m1: 4.0,
            m2: 0.5,
        },
        DistributionSpec::Lognormal { sigma: 0.5 },
    ];
    let arrival: Vec<_> = (0..n).map(|_| menu[rng.random_range(0..menu.len())]).collect();
    let service: Vec<_> = (0..n).map(|_| menu[rng.random_range(0..menu.len())]).collect();
    NetworkSpec::new(
        RoutingMatrix::from_rows(&rows).expect("substochastic by construction"),
        alpha,
        arrival,
        service,
        ScaleRegime::fully_separated(n),
    )
    .expect("generated network is well formed")
}

/// Draws a strictly diagonally dominant matrix with positive diagonal and
/// nonpositive off-diagonal entries, hence a nonsingular M-matrix. Diagonals
/// are deliberately not one, to exercise identities in full generality.
pub fn random_m_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    assert!(dim >= 1);
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let diag = 1.0 + rng.random_range(0.0..0.5);
        m[(i, i)] = diag;
        if dim > 1 {
            let raw: Vec<f64> = (0..dim - 1).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            let mass = rng.random_range(0.3..0.85) * diag;
            let mut it = raw.iter();
            for j in 0..dim {
                if j != i {
                    m[(i, j)] = -it.next().unwrap() / total * mass;
                }
            }
        }
    }
    m
}

/// Sizes and seeds of a standard verification battery over one network.
#[derive(Clone, Debug)]
pub struct BatteryConfig {
    pub spec: NetworkSpec,
    pub r_grid: Vec<f64>,
    /// Starting levels for the sweep checks, per station on its own scale.
    pub xi: Vec<f64>,
    pub master_seed: u64,
    pub workers: usize,
    pub event_cap: u64,
    /// Extra random networks for the variance identity audit.
    pub audit_networks: usize,
    /// Largest dimension of randomly drawn audit inputs.
    pub audit_dimension: usize,
    pub elimination_matrices: usize,
    pub absorption_chains: u64,
    /// Spaced reads of the one-dimensional steady-state scan.
    pub scan_samples: usize,
    pub euler_steps: usize,
    /// Replications for the sweep checks.
    pub sweep_replications: usize,
    /// Batches for the fixed-scale stationarity check on single-station
    /// networks.
    pub stationary_batches: usize,
    pub alpha: f64,
}

impl BatteryConfig {
    /// Moderate sizes suited to an interactive run.
    pub fn new(spec: NetworkSpec, master_seed: u64) -> Self {
        let stations = spec.stations();
        Self {
            spec,
            r_grid: vec![0.3, 0.1],
            xi: vec![0.5; stations],
            master_seed,
            workers: 1,
            event_cap: gjn::DEFAULT_EVENT_CAP,
            audit_networks: 20,
            audit_dimension: 6,
            elimination_matrices: 20,
            absorption_chains: 20_000,
            scan_samples: 200,
            euler_steps: 2_000,
            sweep_replications: 200,
            stationary_batches: 120,
            alpha: ALPHA,
        }
    }
}

/// Everything one battery run produced, serialized in a fixed field order so
/// equal seeds give equal bytes.
#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyReport {
    pub master_seed: u64,
    pub results: Vec<TestResult>,
    pub sweeps: Vec<SweepRecord>,
}

/// A named convergence sweep inside a report.
#[derive(Debug, Serialize)]
pub struct SweepRecord {
    pub name: String,
    pub sweep: ConvergenceSweep,
}

impl VerifyReport {
    /// Number of failures that should gate the process exit status.
    pub fn gating_failures(&self) -> usize {
        self.results.iter().filter(|t| t.gating_failure()).count()
    }

    pub fn all_passed(&self) -> bool {
        self.results.iter().all(TestResult::passed)
    }
}

/// Runs the standard battery on one network: exact identities on the network
/// and on random audit inputs, the chain oracle, diffusion steady-state
/// scans, and whichever sweep checks the network's structure supports.
pub fn run_battery(cfg: &BatteryConfig) -> Result<VerifyReport, VerifyError> {
    let spec = &cfg.spec;
    let stations = spec.stations();
    let blocks = spec.regime.count();
    let mut results = Vec::new();
    let mut sweeps = Vec::new();

    let mut net_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, SALT_NETWORKS));
    let mut nets = vec![spec.clone()];
    for _ in 0..cfg.audit_networks {
        nets.push(random_open_network(&mut net_rng, cfg.audit_dimension.max(2)));
    }
    results.push(variance_identity_audit("variance-identity", &nets)?);

    let mut mat_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, SALT_MATRICES));
    let mut mats = vec![spec.routing.reflection()];
    for _ in 0..cfg.elimination_matrices {
        let d = mat_rng.random_range(2..=cfg.audit_dimension.max(2));
        mats.push(random_m_matrix(&mut mat_rng, d));
    }
    results.push(elimination_audit("elimination-identities", &mats)?);

    results.push(absorption_check(
        "visit-probability-oracle",
        &spec.routing,
        cfg.absorption_chains,
        derive_seed(cfg.master_seed, SALT_ABSORPTION),
    )?);

    results.extend(rbm_scan_check(
        "rbm-steady-state",
        -1.0,
        2.0,
        1e-3,
        100.0,
        20.0,
        cfg.scan_samples.max(MIN_KS_SAMPLES),
        0.05,
        cfg.alpha,
        cfg.master_seed,
    )?);

    let r_small = *cfg.r_grid.last().ok_or_else(|| {
        VerifyError::BadConfig("battery needs a nonempty scale grid".into())
    })?;
    require_decreasing_grid(&cfg.r_grid)?;
    results.push(bm_covariance_check(
        "two-clock-covariance",
        1.0,
        spec.regime.gamma_station(0, r_small),
        spec.regime.gamma_station(stations - 1, r_small),
        1.0,
        1.0,
        cfg.sweep_replications.max(1_000),
        derive_seed(cfg.master_seed, 0x21),
        cfg.workers,
    ));

    if stations == 1 {
        results.extend(heavy_traffic_stationarity(
            "heavy-traffic",
            spec,
            r_small,
            0,
            40.0,
            20.0,
            cfg.stationary_batches.max(MIN_KS_SAMPLES),
            0.10,
            cfg.alpha,
            cfg.event_cap,
            derive_seed(cfg.master_seed, 0x22),
        )?);
    } else {
        results.push(TestResult::not_applicable(
            "heavy-traffic",
            "fixed-scale stationarity is checked on single-station networks",
        ));
    }

    // The functional probe compares a matching-regime station against its
    // one-dimensional limit; it needs one scale per station and at least two
    // blocks for the comparison to move with r.
    if blocks == stations && blocks >= 2 {
        let station = stations - 1;
        let descriptor = limit_descriptor_for_network(spec, RegimeKind::Matching, &cfg.xi)?;
        let family = PrelimitFamily::from_network(spec)?;
        let (result, sweep) = functional_limit_check(&FunctionalLimitConfig {
            family: &family,
            clock: spec.regime.block_of(station),
            station,
            limit: &descriptor.components[station],
            xi: cfg.xi.clone(),
            r_grid: cfg.r_grid.clone(),
            horizon: 1.0,
            steps: cfg.euler_steps,
            replications: cfg.sweep_replications.max(MIN_KS_SAMPLES),
            alpha: cfg.alpha,
            master_seed: derive_seed(cfg.master_seed, 0x23),
            workers: cfg.workers,
        })?;
        results.push(result);
        sweeps.push(SweepRecord {
            name: "functional-limit".into(),
            sweep,
        });
    } else {
        results.push(TestResult::not_applicable(
            "functional-limit",
            "needs one scale per station and at least two blocks",
        ));
    }

    let family = PrelimitFamily::from_network(spec)?;
    results.extend(scale_separation_check(
        "scale-separation",
        &ScaleSeparationConfig {
            family: &family,
            xi: cfg.xi.clone(),
            r_grid: cfg.r_grid.clone(),
            horizon: 1.0,
            steps: cfg.euler_steps,
            replications: cfg.sweep_replications,
            master_seed: derive_seed(cfg.master_seed, 0x24),
            workers: cfg.workers,
        },
    )?);

    if stations >= 2 && blocks >= 2 && cfg.r_grid.len() >= 2 {
        let (result, sweep) = independence_sweep(&IndependenceSweepConfig {
            spec,
            stations: (0, stations - 1),
            r_grid: cfg.r_grid.clone(),
            probes: vec![0.5, 1.0],
            replications: cfg.sweep_replications,
            alpha: cfg.alpha,
            event_cap: cfg.event_cap,
            master_seed: derive_seed(cfg.master_seed, 0x25),
            workers: cfg.workers,
        })?;
        results.push(result);
        sweeps.push(SweepRecord {
            name: "independence".into(),
            sweep,
        });
    } else {
        results.push(TestResult::not_applicable(
            "independence-sweep",
            "needs two stations on separated scales and a two-point grid",
        ));
    }

    Ok(VerifyReport {
        master_seed: cfg.master_seed,
        results,
        sweeps,
    })
}
