//! Experiment configuration: file schema, per-subcommand defaults, and the
//! resolved echo embedded in every report.
//!
//! Configs are JSON with camelCase keys. `network` is either an inline
//! network document or a string path resolved relative to the config file.
//! `masterSeed` must come from the config or `--seed`; there is no
//! wall-clock fallback. All other fields are optional and resolve to
//! subcommand-specific defaults. The report's `config` object echoes the
//! fully resolved form, which is itself a runnable config; worker count and
//! output directory are deliberately left out of the echo because results
//! never depend on them.

use std::path::{Path, PathBuf};

use gjnlab::gjn;
use gjnlab::limits::RegimeKind;
use gjnlab::network::NetworkSpec;
use gjnlab::srbm;
use gjnlab::verify::BatteryConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Which subcommand a config is resolved for; defaults differ per pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pipeline {
    Limits,
    SimulateGjn,
    SimulateSrbm,
    Verify,
    Sweep,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Limits => "limits",
            Pipeline::SimulateGjn => "simulate-gjn",
            Pipeline::SimulateSrbm => "simulate-srbm",
            Pipeline::Verify => "verify",
            Pipeline::Sweep => "sweep",
        }
    }
}

/// Raw on-disk form. Unknown keys are rejected so typos surface as config
/// errors with a key path instead of silently taking defaults.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct FileConfig {
    network: Value,
    master_seed: Option<u64>,
    r_grid: Option<Vec<f64>>,
    regime: Option<RegimeKind>,
    xi: Option<Vec<f64>>,
    scale: Option<f64>,
    horizon: Option<f64>,
    steps: Option<usize>,
    probe_times: Option<Vec<f64>>,
    replications: Option<usize>,
    path_replications: Option<usize>,
    event_cap: Option<u64>,
    alpha: Option<f64>,
    worker_count: Option<usize>,
    output_dir: Option<PathBuf>,
    srbm: Option<DiffusionParams>,
    verify: Option<BatteryTuning>,
}

/// Raw diffusion parameters for `simulate-srbm`, bypassing the network
/// descriptor. Matrices are row-major arrays of rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DiffusionParams {
    pub drift: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub reflection: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
}

/// Size knobs of the `verify` battery; missing entries take the battery
/// defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct BatteryTuning {
    audit_networks: Option<usize>,
    audit_dimension: Option<usize>,
    elimination_matrices: Option<usize>,
    absorption_chains: Option<u64>,
    scan_samples: Option<usize>,
    euler_steps: Option<usize>,
    sweep_replications: Option<usize>,
    stationary_batches: Option<usize>,
}

/// Battery sizes after resolution, echoed in reports.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ResolvedBattery {
    pub audit_networks: usize,
    pub audit_dimension: usize,
    pub elimination_matrices: usize,
    pub absorption_chains: u64,
    pub scan_samples: usize,
    pub euler_steps: usize,
    pub sweep_replications: usize,
    pub stationary_batches: usize,
}

/// Fully resolved configuration. Serializing it yields a valid config that
/// reproduces the run exactly (the network is always inlined).
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ResolvedConfig {
    pub network: Value,
    pub master_seed: u64,
    pub r_grid: Vec<f64>,
    pub regime: RegimeKind,
    pub xi: Vec<f64>,
    pub scale: f64,
    pub horizon: f64,
    pub steps: usize,
    pub probe_times: Vec<f64>,
    pub replications: usize,
    pub path_replications: usize,
    pub event_cap: u64,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub srbm: Option<DiffusionParams>,
    pub verify: ResolvedBattery,
}

/// A resolved config plus the execution placement taken from flags.
pub struct RunContext {
    pub resolved: ResolvedConfig,
    pub spec: NetworkSpec,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub emit_plot_data: bool,
}

impl RunContext {
    /// Battery configuration reconstructed from the echoed values.
    pub fn battery(&self) -> BatteryConfig {
        let r = &self.resolved;
        let mut bc = BatteryConfig::new(self.spec.clone(), r.master_seed);
        bc.r_grid = r.r_grid.clone();
        bc.xi = r.xi.clone();
        bc.workers = self.workers;
        bc.event_cap = r.event_cap;
        bc.alpha = r.alpha;
        bc.audit_networks = r.verify.audit_networks;
        bc.audit_dimension = r.verify.audit_dimension;
        bc.elimination_matrices = r.verify.elimination_matrices;
        bc.absorption_chains = r.verify.absorption_chains;
        bc.scan_samples = r.verify.scan_samples;
        bc.euler_steps = r.verify.euler_steps;
        bc.sweep_replications = r.verify.sweep_replications;
        bc.stationary_batches = r.verify.stationary_batches;
        bc
    }
}

pub fn load(
    path: &Path,
    pipeline: Pipeline,
    seed_flag: Option<u64>,
    workers_flag: Option<usize>,
    out_flag: Option<PathBuf>,
    emit_plot_data: bool,
) -> Result<RunContext, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let file: FileConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let spec = resolve_network(&file.network, base)?;
    // Echo the canonical serialization so path and inline inputs are
    // indistinguishable downstream.
    let network_echo: Value =
        serde_json::from_str(&spec.to_json()).expect("round-trips by construction");
    let stations = spec.stations();

    let master_seed = seed_flag.or(file.master_seed).ok_or_else(|| {
        CliError::Config("masterSeed is required (set it in the config or pass --seed)".into())
    })?;

    let r_grid = file.r_grid.unwrap_or_else(|| vec![0.3, 0.1]);
    check_grid(&r_grid)?;
    let scale = file.scale.unwrap_or(*r_grid.last().expect("nonempty"));
    if !(0.0 < scale && scale < 1.0) {
        return Err(CliError::Config(format!("scale {scale} outside (0, 1)")));
    }

    let xi_default = match pipeline {
        Pipeline::Verify | Pipeline::Sweep => 0.5,
        _ => 0.0,
    };
    let xi = file.xi.unwrap_or_else(|| vec![xi_default; stations]);
    if xi.len() != stations {
        return Err(CliError::Config(format!(
            "xi has {} entries for {stations} stations",
            xi.len()
        )));
    }
    if xi.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(CliError::Config(
            "xi entries must be nonnegative and finite".into(),
        ));
    }

    let horizon = file.horizon.unwrap_or(match pipeline {
        Pipeline::SimulateGjn => 1000.0,
        Pipeline::SimulateSrbm => 10.0,
        _ => 1.0,
    });
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(CliError::Config(format!("horizon {horizon} must be positive")));
    }

    let steps = file.steps.unwrap_or(match pipeline {
        Pipeline::SimulateGjn => 100,
        Pipeline::SimulateSrbm => 4096,
        _ => 2000,
    });
    if steps == 0 || steps > srbm::GRID_CAP {
        return Err(CliError::Config(format!(
            "steps {steps} outside 1..={}",
            srbm::GRID_CAP
        )));
    }

    let probe_times = file.probe_times.unwrap_or_else(|| match pipeline {
        Pipeline::Sweep => vec![0.5, 1.0],
        _ => Vec::new(),
    });
    if probe_times.windows(2).any(|w| w[1] <= w[0])
        || probe_times.first().is_some_and(|&t| t <= 0.0)
    {
        return Err(CliError::Config(
            "probeTimes must be positive and strictly increasing".into(),
        ));
    }
    if pipeline == Pipeline::SimulateGjn
        && probe_times.last().is_some_and(|&t| t > horizon)
    {
        return Err(CliError::Config(
            "probeTimes must not pass the horizon".into(),
        ));
    }

    let replications = file.replications.unwrap_or(200);
    if replications == 0 {
        return Err(CliError::Config("replications must be positive".into()));
    }
    let path_replications = file.path_replications.unwrap_or(5);

    let event_cap = file.event_cap.unwrap_or(gjn::DEFAULT_EVENT_CAP);
    if event_cap == 0 {
        return Err(CliError::Config("eventCap must be positive".into()));
    }

    let alpha = file.alpha.unwrap_or(0.01);
    if !(0.0 < alpha && alpha <= 0.5) {
        return Err(CliError::Config(format!(
            "significance level {alpha} outside (0, 0.5]"
        )));
    }

    if let Some(p) = &file.srbm {
        check_diffusion(p)?;
    }

    let tuning = file.verify.unwrap_or_default();
    let defaults = BatteryConfig::new(spec.clone(), master_seed);
    let verify = ResolvedBattery {
        audit_networks: tuning.audit_networks.unwrap_or(defaults.audit_networks),
        audit_dimension: tuning.audit_dimension.unwrap_or(defaults.audit_dimension),
        elimination_matrices: tuning
            .elimination_matrices
            .unwrap_or(defaults.elimination_matrices),
        absorption_chains: tuning
            .absorption_chains
            .unwrap_or(defaults.absorption_chains),
        scan_samples: tuning.scan_samples.unwrap_or(defaults.scan_samples),
        euler_steps: tuning.euler_steps.unwrap_or(defaults.euler_steps),
        sweep_replications: tuning
            .sweep_replications
            .unwrap_or(defaults.sweep_replications),
        stationary_batches: tuning
            .stationary_batches
            .unwrap_or(defaults.stationary_batches),
    };

    let workers = workers_flag.or(file.worker_count).unwrap_or(1);
    let out_dir = out_flag
        .or(file.output_dir)
        .unwrap_or_else(|| PathBuf::from("."));

    Ok(RunContext {
        resolved: ResolvedConfig {
            network: network_echo,
            master_seed,
            r_grid,
            regime: file.regime.unwrap_or(RegimeKind::BlockMatching),
            xi,
            scale,
            horizon,
            steps,
            probe_times,
            replications,
            path_replications,
            event_cap,
            alpha,
            srbm: file.srbm,
            verify,
        },
        spec,
        workers,
        out_dir,
        emit_plot_data,
    })
}

fn resolve_network(value: &Value, base: &Path) -> Result<NetworkSpec, CliError> {
    let text = match value {
        Value::String(rel) => {
            let path = base.join(rel);
            std::fs::read_to_string(&path).map_err(|e| {
                CliError::Config(format!("cannot read network {}: {e}", path.display()))
            })?
        }
        Value::Object(_) => value.to_string(),
        other => {
            return Err(CliError::Config(format!(
                "network must be an inline document or a file path, got {other}"
            )))
        }
    };
    NetworkSpec::from_json(&text).map_err(CliError::config)
}

fn check_grid(r_grid: &[f64]) -> Result<(), CliError> {
    if r_grid.is_empty() {
        return Err(CliError::Config("rGrid must be nonempty".into()));
    }
    if r_grid.iter().any(|&r| !(0.0 < r && r < 1.0)) {
        return Err(CliError::Config("rGrid entries must lie in (0, 1)".into()));
    }
    if r_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CliError::Config("rGrid must decrease strictly".into()));
    }
    Ok(())
}

fn check_diffusion(p: &DiffusionParams) -> Result<(), CliError> {
    let d = p.drift.len();
    if d == 0 {
        return Err(CliError::Config("srbm.drift must be nonempty".into()));
    }
    if p.initial.len() != d {
        return Err(CliError::Config(format!(
            "srbm.initial has {} entries for dimension {d}",
            p.initial.len()
        )));
    }
    for (name, m) in [("covariance", &p.covariance), ("reflection", &p.reflection)] {
        if m.len() != d || m.iter().any(|row| row.len() != d) {
            return Err(CliError::Config(format!(
                "srbm.{name} must be a {d}x{d} matrix"
            )));
        }
    }
    Ok(())
}
