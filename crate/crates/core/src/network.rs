//! Model layer: open single-server FCFS networks with Markovian routing,
//! unit-mean renewal primitives, and a multi-scale capacity schedule.
//!
//! Stations are indexed `0..J`. External arrivals at station `j` form a
//! renewal process of rate `alpha[j]` driven by a unit-mean interarrival
//! distribution; services are unit-mean variates divided by the service rate.
//! Rates follow the schedule `mu = lambda + r^beta_k * b` blockwise: stations
//! are partitioned into contiguous blocks, block `k` carries an exponent
//! `beta_k` (strictly increasing in `k`) and a positive per-station slack
//! vector `b`, and `lambda` solves the traffic equations. Smaller `r` means
//! heavier traffic, and later blocks drain at ever slower relative rates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, LinalgError};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("routing matrix is invalid: {0}")]
    BadRouting(String),
    #[error("routing matrix traps flow: some station cannot reach the exit")]
    SingularRouting,
    #[error("station {station} is dead: no external flow ever reaches it")]
    DeadStation { station: usize },
    #[error("invalid specification: {0}")]
    BadSpec(String),
    #[error("scale parameter r = {0} must lie in (0, 1)")]
    BadScale(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Unit-mean distribution families for interarrival and service variates.
///
/// Raw parameters are normalized analytically so every family has mean one;
/// the squared coefficient of variation (equal to the variance here) is
/// available in closed form. All families have finite moments beyond the
/// second.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DistributionSpec {
    Exponential,
    Deterministic,
    /// Uniform on `[1 - width/2, 1 + width/2]`; requires `0 < width <= 2`.
    Uniform { width: f64 },
    /// Sum of `phases` exponential phases, scaled to mean one.
    Erlang { phases: u32 },
    /// Mixture of two exponentials with raw means `m1`, `m2` picked with
    /// probability `p` / `1 - p`; both means are rescaled to overall mean one.
    Hyperexponential { p: f64, m1: f64, m2: f64 },
    /// Lognormal with underlying normal `N(-sigma^2/2, sigma^2)`, mean one.
    Lognormal { sigma: f64 },
}

impl DistributionSpec {
    pub fn check(&self) -> Result<(), String> {
        match *self {
            DistributionSpec::Exponential | DistributionSpec::Deterministic => Ok(()),
            DistributionSpec::Uniform { width } => {
                if width > 0.0 && width <= 2.0 {
                    Ok(())
                } else {
                    Err(format!("uniform width {width} outside (0, 2]"))
                }
            }
            DistributionSpec::Erlang { phases } => {
                if phases >= 1 {
                    Ok(())
                } else {
                    Err("erlang needs at least one phase".into())
                }
            }
            DistributionSpec::Hyperexponential { p, m1, m2 } => {
                if !(0.0..=1.0).contains(&p) {
                    Err(format!("mixture probability {p} outside [0, 1]"))
                } else if m1 <= 0.0 || m2 <= 0.0 {
                    Err(format!("mixture means ({m1}, {m2}) must be positive"))
                } else {
                    Ok(())
                }
            }
            DistributionSpec::Lognormal { sigma } => {
                if sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(format!("lognormal sigma {sigma} must be positive"))
                }
            }
        }
    }

    /// Squared coefficient of variation of the unit-mean variate.
    pub fn scv(&self) -> f64 {
        match *self {
            DistributionSpec::Exponential => 1.0,
            DistributionSpec::Deterministic => 0.0,
            DistributionSpec::Uniform { width } => width * width / 12.0,
            DistributionSpec::Erlang { phases } => 1.0 / phases as f64,
            DistributionSpec::Hyperexponential { p, m1, m2 } => {
                let scale = p * m1 + (1.0 - p) * m2;
                let (a, b) = (m1 / scale, m2 / scale);
                2.0 * (p * a * a + (1.0 - p) * b * b) - 1.0
            }
            DistributionSpec::Lognormal { sigma } => (sigma * sigma).exp() - 1.0,
        }
    }

    /// Prebuilt sampler for the normalized variate.
    pub fn sampler(&self) -> UnitSampler {
        match *self {
            DistributionSpec::Exponential => UnitSampler::Exponential,
            DistributionSpec::Deterministic => UnitSampler::Deterministic,
            DistributionSpec::Uniform { width } => UnitSampler::Uniform {
                lo: 1.0 - width / 2.0,
                width,
            },
            DistributionSpec::Erlang { phases } => UnitSampler::Erlang {
                gamma: Gamma::new(phases as f64, 1.0 / phases as f64)
                    .expect("validated erlang parameters"),
            },
            DistributionSpec::Hyperexponential { p, m1, m2 } => {
                let scale = p * m1 + (1.0 - p) * m2;
                UnitSampler::Hyperexponential {
                    p,
                    m1: m1 / scale,
                    m2: m2 / scale,
                }
            }
            DistributionSpec::Lognormal { sigma } => UnitSampler::Lognormal {
                dist: LogNormal::new(-sigma * sigma / 2.0, sigma)
                    .expect("validated lognormal parameters"),
            },
        }
    }
}

/// Sampler for a unit-mean variate; built once, drawn many times.
#[derive(Clone, Debug)]
pub enum UnitSampler {
    Exponential,
    Deterministic,
    Uniform { lo: f64, width: f64 },
    Erlang { gamma: Gamma<f64> },
    Hyperexponential { p: f64, m1: f64, m2: f64 },
    Lognormal { dist: LogNormal<f64> },
}

impl UnitSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            UnitSampler::Exponential => rng.sample::<f64, _>(Exp1),
            UnitSampler::Deterministic => 1.0,
            UnitSampler::Uniform { lo, width } => lo + width * rng.random::<f64>(),
            UnitSampler::Erlang { gamma } => gamma.sample(rng),
            // The uniform is always drawn before the exponential so that the
            // stream layout does not depend on the branch taken.
            UnitSampler::Hyperexponential { p, m1, m2 } => {
                let u: f64 = rng.random();
                let e: f64 = rng.sample(Exp1);
                if u < *p {
                    m1 * e
                } else {
                    m2 * e
                }
            }
            UnitSampler::Lognormal { dist } => dist.sample(rng),
        }
    }
}

/// Substochastic routing matrix of an open network: entry `(i, j)` is the
/// probability that a job finishing at `i` moves to `j`; the row deficit is
/// the probability of leaving. Construction verifies that every station can
/// reach the exit, which is exactly spectral radius below one.
#[derive(Clone, Debug, PartialEq)]
pub struct RoutingMatrix {
    p: DMatrix<f64>,
}

impl RoutingMatrix {
    pub fn new(p: DMatrix<f64>) -> Result<Self, NetworkError> {
        let n = p.nrows();
        if n == 0 || n != p.ncols() {
            return Err(NetworkError::BadRouting(format!(
                "expected square nonempty matrix, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..n {
                let q = p[(i, j)];
                if !(0.0..=1.0).contains(&q) {
                    return Err(NetworkError::BadRouting(format!(
                        "entry ({i}, {j}) = {q} outside [0, 1]"
                    )));
                }
                row_sum += q;
            }
            if row_sum > 1.0 + 1e-12 {
                return Err(NetworkError::BadRouting(format!(
                    "row {i} sums to {row_sum} > 1"
                )));
            }
        }
        // Exit reachability by fixpoint: a station is open if it exits
        // directly or routes with positive probability to an open station.
        let mut open = vec![false; n];
        for i in 0..n {
            let row_sum: f64 = (0..n).map(|j| p[(i, j)]).sum();
            open[i] = row_sum < 1.0 - 1e-12;
        }
        loop {
            let mut changed = false;
            for i in 0..n {
                if !open[i] && (0..n).any(|j| p[(i, j)] > 0.0 && open[j]) {
                    open[i] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if open.iter().any(|&o| !o) {
            return Err(NetworkError::SingularRouting);
        }
        Ok(Self { p })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NetworkError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(NetworkError::BadRouting(
                "ragged rows in routing matrix".into(),
            ));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(n, n, &flat))
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// The reflection matrix `I - P'` of the network.
    pub fn reflection(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim()) - self.p.transpose()
    }

    /// Probability that a job finishing at `j` leaves the network.
    pub fn exit_probability(&self, j: usize) -> f64 {
        let row_sum: f64 = (0..self.dim()).map(|k| self.p[(j, k)]).sum();
        (1.0 - row_sum).max(0.0)
    }
}

/// One contiguous station block of the capacity schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    /// First station of the block (0-based).
    pub lo: usize,
    /// Last station of the block, inclusive.
    pub hi: usize,
    /// Scale exponent `beta_k`; the block's rate slack shrinks like `r^beta_k`.
    pub exponent: f64,
    /// Positive per-station slack multipliers, one per block station.
    pub b: Vec<f64>,
}

impl Block {
    /// Number of stations in the block; always at least one.
    pub fn size(&self) -> usize {
        self.hi - self.lo + 1
    }
}

/// Blockwise multi-scale capacity schedule over `0..J`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleRegime {
    blocks: Vec<Block>,
    block_of: Vec<usize>,
}

impl ScaleRegime {
    pub fn new(blocks: Vec<Block>, stations: usize) -> Result<Self, NetworkError> {
        if blocks.is_empty() {
            return Err(NetworkError::BadSpec("at least one block required".into()));
        }
        let mut block_of = vec![usize::MAX; stations];
        let mut next = 0usize;
        let mut prev_exponent = f64::NEG_INFINITY;
        for (k, blk) in blocks.iter().enumerate() {
            if blk.lo != next || blk.hi < blk.lo || blk.hi >= stations {
                return Err(NetworkError::BadSpec(format!(
                    "block {k} covers stations {}..={}, expected a contiguous \
                     partition of 0..{stations}",
                    blk.lo, blk.hi
                )));
            }
            if !(blk.exponent > 0.0 && blk.exponent.is_finite()) {
                return Err(NetworkError::BadSpec(format!(
                    "block {k} exponent {} must be positive",
                    blk.exponent
                )));
            }
            if blk.exponent <= prev_exponent {
                return Err(NetworkError::BadSpec(format!(
                    "block exponents must increase strictly; block {k} has {} after {}",
                    blk.exponent, prev_exponent
                )));
            }
            if blk.b.len() != blk.size() {
                return Err(NetworkError::BadSpec(format!(
                    "block {k} has {} slack entries for {} stations",
                    blk.b.len(),
                    blk.size()
                )));
            }
            if blk.b.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(NetworkError::BadSpec(format!(
                    "block {k} slack entries must be positive"
                )));
            }
            for j in blk.lo..=blk.hi {
                block_of[j] = k;
            }
            prev_exponent = blk.exponent;
            next = blk.hi + 1;
        }
        if next != stations {
            return Err(NetworkError::BadSpec(format!(
                "blocks cover stations 0..{next}, network has {stations}"
            )));
        }
        Ok(Self { blocks, block_of })
    }

    /// Singleton blocks with exponents `1, 2, ..., J` and unit slack: one
    /// distinct scale per station.
    pub fn fully_separated(stations: usize) -> Self {
        let blocks = (0..stations)
            .map(|j| Block {
                lo: j,
                hi: j,
                exponent: (j + 1) as f64,
                b: vec![1.0],
            })
            .collect();
        Self::new(blocks, stations).expect("valid by construction")
    }

    pub fn count(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn stations(&self) -> usize {
        self.block_of.len()
    }

    /// Block index of station `j`.
    pub fn block_of(&self, j: usize) -> usize {
        self.block_of[j]
    }

    /// Scale factor `gamma_k(r) = r^beta_k` of block `k`.
    pub fn gamma(&self, k: usize, r: f64) -> f64 {
        r.powf(self.blocks[k].exponent)
    }

    /// Scale factor of the block containing station `j`.
    pub fn gamma_station(&self, j: usize, r: f64) -> f64 {
        self.gamma(self.block_of[j], r)
    }

    /// Per-station slack multiplier `b_j`.
    pub fn slack(&self, j: usize) -> f64 {
        let k = self.block_of[j];
        self.blocks[k].b[j - self.blocks[k].lo]
    }

    /// Per-station rate slack `delta_j(r) = gamma_k(r) * b_j`.
    pub fn delta(&self, r: f64) -> DVector<f64> {
        DVector::from_fn(self.stations(), |j, _| {
            self.gamma_station(j, r) * self.slack(j)
        })
    }

    /// True when every block is a singleton with unit slack.
    pub fn is_fully_separated_unit(&self) -> bool {
        self.blocks.iter().all(|b| b.size() == 1 && b.b[0] == 1.0)
    }
}

/// Complete description of a network experiment.
#[derive(Clone, Debug)]
pub struct NetworkSpec {
    pub routing: RoutingMatrix,
    pub alpha: Vec<f64>,
    pub arrival: Vec<DistributionSpec>,
    pub service: Vec<DistributionSpec>,
    pub regime: ScaleRegime,
}

impl NetworkSpec {
    pub fn new(
        routing: RoutingMatrix,
        alpha: Vec<f64>,
        arrival: Vec<DistributionSpec>,
        service: Vec<DistributionSpec>,
        regime: ScaleRegime,
    ) -> Result<Self, NetworkError> {
        let n = routing.dim();
        if alpha.len() != n || arrival.len() != n || service.len() != n {
            return Err(NetworkError::BadSpec(format!(
                "routing is {n}x{n} but alpha/arrival/service have lengths \
                 {}/{}/{}",
                alpha.len(),
                arrival.len(),
                service.len()
            )));
        }
        if regime.stations() != n {
            return Err(NetworkError::BadSpec(format!(
                "blocks cover {} stations, routing has {n}",
                regime.stations()
            )));
        }
        if alpha.iter().any(|&a| a < 0.0 || !a.is_finite()) {
            return Err(NetworkError::BadSpec(
                "external arrival rates must be nonnegative and finite".into(),
            ));
        }
        if alpha.iter().all(|&a| a == 0.0) {
            return Err(NetworkError::BadSpec(
                "at least one station needs external arrivals".into(),
            ));
        }
        for (name, dists) in [("arrival", &arrival), ("service", &service)] {
            for (j, d) in dists.iter().enumerate() {
                d.check().map_err(|m| {
                    NetworkError::BadSpec(format!("{name} distribution {j}: {m}"))
                })?;
            }
        }
        let spec = Self {
            routing,
            alpha,
            arrival,
            service,
            regime,
        };
        // Fails on dead stations, which depend on alpha and routing jointly.
        solve_traffic(&spec)?;
        Ok(spec)
    }

    pub fn stations(&self) -> usize {
        self.routing.dim()
    }

    pub fn alpha_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.alpha)
    }

    pub fn arrival_scv(&self) -> Vec<f64> {
        self.arrival.iter().map(|d| d.scv()).collect()
    }

    pub fn service_scv(&self) -> Vec<f64> {
        self.service.iter().map(|d| d.scv()).collect()
    }

    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let file: NetworkFile = serde_json::from_str(text)
            .map_err(|e| NetworkError::BadSpec(format!("parse error: {e}")))?;
        file.build()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&NetworkFile::from(self)).expect("serializable")
    }
}

/// On-disk form of a network description. Stations are 1-based in the file
/// (`"stations": [lo, hi]` inclusive) and 0-based in memory.
#[derive(Debug, Serialize, Deserialize)]
struct NetworkFile {
    #[serde(rename = "J")]
    stations: usize,
    #[serde(rename = "P")]
    routing: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    arrival_dists: Vec<DistributionSpec>,
    service_dists: Vec<DistributionSpec>,
    blocks: Vec<BlockFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockFile {
    stations: [usize; 2],
    exponent: f64,
    b: Vec<f64>,
}

impl NetworkFile {
    fn build(self) -> Result<NetworkSpec, NetworkError> {
        if self.routing.len() != self.stations {
            return Err(NetworkError::BadSpec(format!(
                "J = {} but P has {} rows",
                self.stations,
                self.routing.len()
            )));
        }
        let routing = RoutingMatrix::from_rows(&self.routing)?;
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let [lo, hi] = b.stations;
                if lo == 0 || hi == 0 {
                    return Err(NetworkError::BadSpec(
                        "block station ranges are 1-based".into(),
                    ));
                }
                Ok(Block {
                    lo: lo - 1,
                    hi: hi - 1,
                    exponent: b.exponent,
                    b: b.b.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let regime = ScaleRegime::new(blocks, self.stations)?;
        NetworkSpec::new(
            routing,
            self.alpha,
            self.arrival_dists,
            self.service_dists,
            regime,
        )
    }
}

impl From<&NetworkSpec> for NetworkFile {
    fn from(spec: &NetworkSpec) -> Self {
        let n = spec.stations();
        NetworkFile {
            stations: n,
            routing: (0..n)
                .map(|i| (0..n).map(|j| spec.routing.p()[(i, j)]).collect())
                .collect(),
            alpha: spec.alpha.clone(),
            arrival_dists: spec.arrival.clone(),
            service_dists: spec.service.clone(),
            blocks: spec
                .regime
                .blocks()
                .iter()
                .map(|b| BlockFile {
                    stations: [b.lo + 1, b.hi + 1],
                    exponent: b.exponent,
                    b: b.b.clone(),
                })
                .collect(),
        }
    }
}

/// Throughput rates `lambda` solving `lambda = alpha + P' lambda`.
pub fn solve_traffic(spec: &NetworkSpec) -> Result<DVector<f64>, NetworkError> {
    let lam = linalg::solve(&spec.routing.reflection(), &spec.alpha_vector())
        .map_err(|_| NetworkError::SingularRouting)?;
    for j in 0..spec.stations() {
        if lam[j] <= 0.0 {
            return Err(NetworkError::DeadStation { station: j });
        }
    }
    Ok(lam)
}

/// Service rates and traffic intensities at scale `r`.
#[derive(Clone, Debug)]
pub struct ServiceRates {
    pub mu: DVector<f64>,
    pub rho: DVector<f64>,
}

/// Rates `mu = lambda + delta(r)` of the capacity schedule, with traffic
/// intensities `rho = lambda ./ mu` (all below one for `r` in `(0, 1)`).
pub fn service_rates(spec: &NetworkSpec, r: f64) -> Result<ServiceRates, NetworkError> {
    if !(0.0 < r && r < 1.0) {
        return Err(NetworkError::BadScale(r));
    }
    let lam = solve_traffic(spec)?;
    let mu = &lam + spec.regime.delta(r);
    let rho = lam.component_div(&mu);
    Ok(ServiceRates { mu, rho })
}

/// One named validation failure.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationFailure {
    pub location: String,
    pub message: String,
}

/// Aggregated validation outcome; empty means the description is usable.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub failures: Vec<ValidationFailure>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.failures.push(ValidationFailure {
            location: location.into(),
            message: message.into(),
        });
    }
}

/// Validates a JSON network description, collecting every failure rather than
/// stopping at the first.
pub fn validate_description(text: &str) -> ValidationReport {
    let mut report = ValidationReport::default();
    let file: NetworkFile = match serde_json::from_str(text) {
        Ok(f) => f,
        Err(e) => {
            report.push("document", format!("parse error: {e}"));
            return report;
        }
    };
    let n = file.stations;
    if n == 0 {
        report.push("J", "network needs at least one station");
        return report;
    }
    if file.routing.len() != n {
        report.push("P", format!("expected {n} rows, found {}", file.routing.len()));
    }
    for (i, row) in file.routing.iter().enumerate() {
        if row.len() != n {
            report.push(format!("P[{}]", i + 1), format!("expected {n} entries"));
            continue;
        }
        let mut sum = 0.0;
        for (j, &q) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&q) {
                report.push(
                    format!("P[{}][{}]", i + 1, j + 1),
                    format!("entry {q} outside [0, 1]"),
                );
            }
            sum += q;
        }
        if sum > 1.0 + 1e-12 {
            report.push(format!("P[{}]", i + 1), format!("row sums to {sum} > 1"));
        }
    }
    if file.alpha.len() != n {
        report.push("alpha", format!("expected {n} rates"));
    }
    for (j, &a) in file.alpha.iter().enumerate() {
        if a < 0.0 || !a.is_finite() {
            report.push(format!("alpha[{}]", j + 1), format!("rate {a} invalid"));
        }
    }
    for (name, dists) in [
        ("arrival_dists", &file.arrival_dists),
        ("service_dists", &file.service_dists),
    ] {
        if dists.len() != n {
            report.push(name, format!("expected {n} entries"));
        }
        for (j, d) in dists.iter().enumerate() {
            if let Err(m) = d.check() {
                report.push(format!("{name}[{}]", j + 1), m);
            }
        }
    }
    let mut next = 1usize;
    let mut prev_exponent = f64::NEG_INFINITY;
    for (k, b) in file.blocks.iter().enumerate() {
        let [lo, hi] = b.stations;
        if lo != next || hi < lo || hi > n {
            report.push(
                format!("blocks[{k}]"),
                format!("stations [{lo}, {hi}] break the contiguous 1..{n} partition"),
            );
        }
        if b.exponent <= prev_exponent || b.exponent <= 0.0 {
            report.push(
                format!("blocks[{k}]"),
                format!("exponent {} must be positive and strictly increasing", b.exponent),
            );
        }
        if hi >= lo && b.b.len() != hi - lo + 1 {
            report.push(
                format!("blocks[{k}]"),
                format!("{} slack entries for {} stations", b.b.len(), hi - lo + 1),
            );
        }
        if b.b.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
            report.push(format!("blocks[{k}]"), "slack entries must be positive");
        }
        prev_exponent = b.exponent;
        next = hi.max(lo) + 1;
    }
    if file.blocks.is_empty() {
        report.push("blocks", "at least one block required");
    } else if next != n + 1 {
        report.push("blocks", format!("blocks cover 1..{}, network has {n}", next - 1));
    }
    if !report.is_valid() {
        return report;
    }
    // Structure is sound; surface flow-level failures as well.
    match file.build() {
        Ok(_) => {}
        Err(NetworkError::SingularRouting) => {
            report.push("P", "some station cannot reach the exit")
        }
        Err(NetworkError::DeadStation { station }) => report.push(
            format!("alpha/P station {}", station + 1),
            "station receives no flow",
        ),
        Err(e) => report.push("document", e.to_string()),
    }
    report
}

/// Re-validates a built spec: routing openness holds by construction, so this
/// checks the flow side (traffic solvable, every station fed).
pub fn validate(spec: &NetworkSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    match solve_traffic(spec) {
        Ok(_) => {}
        Err(NetworkError::SingularRouting) => {
            report.push("P", "some station cannot reach the exit")
        }
        Err(NetworkError::DeadStation { station }) => report.push(
            format!("station {}", station + 1),
            "no external flow ever reaches it",
        ),
        Err(e) => report.push("document", e.to_string()),
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamFamily;

    fn exp_spec(n: usize) -> Vec<DistributionSpec> {
        vec![DistributionSpec::Exponential; n]
    }

    /// Two stations in series; all flow enters at the first.
    pub(crate) fn tandem() -> NetworkSpec {
        NetworkSpec::new(
            RoutingMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap(),
            vec![1.0, 0.0],
            exp_spec(2),
            exp_spec(2),
            ScaleRegime::fully_separated(2),
        )
        .unwrap()
    }

    #[test]
    fn unit_mean_and_scv_match_samples() {
        let specs = [
            DistributionSpec::Exponential,
            DistributionSpec::Deterministic,
            DistributionSpec::Uniform { width: 1.2 },
            DistributionSpec::Erlang { phases: 4 },
            DistributionSpec::Hyperexponential {
                p: 0.3,
                m1: 4.0,
                m2: 0.5,
            },
            DistributionSpec::Lognormal { sigma: 0.8 },
        ];
        let mut rng = StreamFamily::new(11, 1).experiment();
        for spec in specs {
            let sampler = spec.sampler();
            let n = 1_000_000;
            let (mut sum, mut sumsq) = (0.0, 0.0);
            for _ in 0..n {
                let x = sampler.sample(&mut rng);
                assert!(x >= 0.0);
                sum += x;
                sumsq += x * x;
            }
            let mean = sum / n as f64;
            let var = sumsq / n as f64 - mean * mean;
            assert!(
                (mean - 1.0).abs() < 0.005,
                "{spec:?}: empirical mean {mean}"
            );
            assert!(
                (var - spec.scv()).abs() < 0.05 * (1.0 + spec.scv()),
                "{spec:?}: empirical variance {var} vs scv {}",
                spec.scv()
            );
        }
    }

    #[test]
    fn routing_rejects_closed_loops() {
        // Stations 0 and 1 feed each other forever.
        let p = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(
            RoutingMatrix::from_rows(&p),
            Err(NetworkError::SingularRouting)
        ));
        // A trapped pair hanging off an open station.
        let p = vec![
            vec![0.0, 0.5, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ];
        assert!(matches!(
            RoutingMatrix::from_rows(&p),
            Err(NetworkError::SingularRouting)
        ));
    }

    #[test]
    fn traffic_on_cycle() {
        // Three stations in a cycle shedding half the flow each hop:
        // lambda_j = 1 + 0.5 lambda_{j-1} has the fixed point 2.
        let p = vec![
            vec![0.0, 0.5, 0.0],
            vec![0.0, 0.0, 0.5],
            vec![0.5, 0.0, 0.0],
        ];
        let spec = NetworkSpec::new(
            RoutingMatrix::from_rows(&p).unwrap(),
            vec![1.0, 1.0, 1.0],
            exp_spec(3),
            exp_spec(3),
            ScaleRegime::fully_separated(3),
        )
        .unwrap();
        let lam = solve_traffic(&spec).unwrap();
        for j in 0..3 {
            assert!((lam[j] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dead_station_detected() {
        // Station 2 receives nothing: alpha_2 = 0 and no routing into it.
        let p = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let err = NetworkSpec::new(
            RoutingMatrix::from_rows(&p).unwrap(),
            vec![1.0, 0.0],
            exp_spec(2),
            exp_spec(2),
            ScaleRegime::fully_separated(2),
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::DeadStation { station: 1 }));
    }

    #[test]
    fn rates_follow_schedule() {
        let spec = tandem();
        let rates = service_rates(&spec, 0.1).unwrap();
        assert!((rates.mu[0] - 1.1).abs() < 1e-12);
        assert!((rates.mu[1] - 1.01).abs() < 1e-12);
        assert!(rates.rho.iter().all(|&x| x < 1.0));
        assert!(service_rates(&spec, 1.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{
            "J": 2,
            "P": [[0.0, 1.0], [0.0, 0.0]],
            "alpha": [1.0, 0.0],
            "arrival_dists": [{"family": "exponential"}, {"family": "exponential"}],
            "service_dists": [{"family": "erlang", "phases": 3},
                              {"family": "lognormal", "sigma": 0.5}],
            "blocks": [
                {"stations": [1, 1], "exponent": 1.0, "b": [1.0]},
                {"stations": [2, 2], "exponent": 2.0, "b": [1.0]}
            ]
        }"#;
        let spec = NetworkSpec::from_json(text).unwrap();
        assert_eq!(spec.stations(), 2);
        assert_eq!(spec.service[0], DistributionSpec::Erlang { phases: 3 });
        let round = NetworkSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(round.routing, spec.routing);
        assert_eq!(round.service, spec.service);
        assert_eq!(round.regime, spec.regime);
    }

    #[test]
    fn validation_collects_all_failures() {
        let text = r#"{
            "J": 2,
            "P": [[0.0, 1.5], [0.0, 0.0]],
            "alpha": [-1.0, 0.0],
            "arrival_dists": [{"family": "exponential"}, {"family": "exponential"}],
            "service_dists": [{"family": "uniform", "width": 3.0},
                              {"family": "exponential"}],
            "blocks": [{"stations": [1, 2], "exponent": -1.0, "b": [1.0, 1.0]}]
        }"#;
        let report = validate_description(text);
        assert!(!report.is_valid());
        assert!(report.failures.len() >= 4);
        let locations: Vec<&str> =
            report.failures.iter().map(|f| f.location.as_str()).collect();
        assert!(locations.iter().any(|l| l.contains("P[1]")));
        assert!(locations.iter().any(|l| l.contains("alpha")));
        assert!(locations.iter().any(|l| l.contains("service_dists")));
        assert!(locations.iter().any(|l| l.contains("blocks")));
    }

    #[test]
    fn block_partition_must_be_contiguous() {
        let blocks = vec![
            Block { lo: 0, hi: 0, exponent: 1.0, b: vec![1.0] },
            // Gap: station 1 uncovered.
            Block { lo: 2, hi: 2, exponent: 2.0, b: vec![1.0] },
        ];
        assert!(ScaleRegime::new(blocks, 3).is_err());
        let blocks = vec![
            Block { lo: 0, hi: 1, exponent: 2.0, b: vec![1.0, 2.0] },
            // Exponent fails to increase.
            Block { lo: 2, hi: 2, exponent: 2.0, b: vec![1.0] },
        ];
        assert!(ScaleRegime::new(blocks, 3).is_err());
    }
}
