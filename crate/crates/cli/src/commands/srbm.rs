//! `simulate-srbm`: reflected-diffusion paths and empirical moments.
//!
//! Components come from the network's limit descriptor under the configured
//! regime, or from the raw `srbm` parameter block when present. Every
//! component is simulated on its own ChaCha stream of each replication
//! seed, so component ensembles never share randomness. The first
//! `pathReplications` paths of each component are dumped as CSV; moments
//! use the whole ensemble.

use gjnlab::limits::limit_descriptor_for_network;
use gjnlab::rng::replication_seed;
use gjnlab::runner;
use gjnlab::skorokhod::Reflection;
use gjnlab::srbm::{self, SrbmSpec};
use gjnlab::stats;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{DiffusionParams, RunContext};
use crate::report::{self, Artifacts, ExperimentReport};
use crate::CliError;

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Body {
    components: Vec<ComponentMoments>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ComponentMoments {
    label: String,
    dimension: usize,
    terminal_mean: Vec<f64>,
    terminal_variance: Vec<f64>,
    terminal_regulator_mean: Vec<f64>,
    /// Worst discrete complementarity residual across the ensemble.
    max_complementarity: f64,
}

fn build_raw(p: &DiffusionParams) -> Result<SrbmSpec, CliError> {
    let d = p.drift.len();
    SrbmSpec::new(
        DVector::from_column_slice(&p.drift),
        DMatrix::from_fn(d, d, |i, j| p.covariance[i][j]),
        DMatrix::from_fn(d, d, |i, j| p.reflection[i][j]),
        DVector::from_column_slice(&p.initial),
    )
    .map_err(CliError::config)
}

pub fn run(ctx: &RunContext) -> Result<u8, CliError> {
    let resolved = &ctx.resolved;
    if resolved.replications < 2 {
        return Err(CliError::Config(
            "simulate-srbm needs at least two replications for moment estimates".into(),
        ));
    }
    let components: Vec<(String, SrbmSpec)> = match &resolved.srbm {
        Some(p) => vec![("diffusion".to_string(), build_raw(p)?)],
        None => {
            let descriptor =
                limit_descriptor_for_network(&ctx.spec, resolved.regime, &resolved.xi)
                    .map_err(super::limit_error)?;
            descriptor
                .components
                .iter()
                .map(|c| {
                    SrbmSpec::from_component(c)
                        .map(|s| (c.label.clone(), s))
                        .map_err(CliError::runtime)
                })
                .collect::<Result<_, _>>()?
        }
    };

    let mut arts = Artifacts::new(&ctx.out_dir)?;
    let mut bodies = Vec::new();
    let mut long_rows: Vec<[String; 6]> = Vec::new();
    let dumped = resolved.path_replications.min(resolved.replications);
    for (k, (label, cspec)) in components.iter().enumerate() {
        let paths = runner::replications(resolved.replications, ctx.workers, |rep| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(replication_seed(resolved.master_seed, rep as u64));
            rng.set_stream(k as u64);
            srbm::simulate(cspec, resolved.horizon, resolved.steps, &mut rng)
        });
        let paths: Vec<Reflection> = paths
            .into_iter()
            .collect::<Result<_, _>>()
            .map_err(CliError::runtime)?;
        let d = cspec.dim();
        let last = resolved.steps;

        let mut terminal_mean = Vec::with_capacity(d);
        let mut terminal_variance = Vec::with_capacity(d);
        let mut terminal_regulator_mean = Vec::with_capacity(d);
        for j in 0..d {
            let z: Vec<f64> = paths.iter().map(|p| p.z.value(j, last)).collect();
            let (m, v) = stats::mean_var(&z);
            terminal_mean.push(m);
            terminal_variance.push(v);
            let y: Vec<f64> = paths.iter().map(|p| p.y.value(j, last)).collect();
            terminal_regulator_mean.push(stats::mean(&y));
        }
        let max_complementarity = paths
            .iter()
            .map(|p| p.complementarity)
            .fold(0.0f64, f64::max);

        let mut wtr = arts.csv(&format!("srbm_paths_{}.csv", k + 1))?;
        let mut header = vec!["replication".to_string(), "t".to_string()];
        for prefix in ["z", "y"] {
            for j in 1..=d {
                header.push(format!("{prefix}{j}"));
            }
        }
        wtr.write_record(&header).map_err(CliError::runtime)?;
        for (rep, path) in paths.iter().take(dumped).enumerate() {
            for (i, &t) in path.z.times().iter().enumerate() {
                let mut record = vec![rep.to_string(), report::num(t)];
                for j in 0..d {
                    record.push(report::num(path.z.value(j, i)));
                }
                for j in 0..d {
                    record.push(report::num(path.y.value(j, i)));
                }
                wtr.write_record(&record).map_err(CliError::runtime)?;
            }
        }
        wtr.flush().map_err(CliError::runtime)?;

        if ctx.emit_plot_data {
            for (rep, path) in paths.iter().take(dumped).enumerate() {
                for (i, &t) in path.z.times().iter().enumerate() {
                    for j in 0..d {
                        for (series, value) in
                            [("state", path.z.value(j, i)), ("regulator", path.y.value(j, i))]
                        {
                            long_rows.push([
                                (k + 1).to_string(),
                                rep.to_string(),
                                report::num(t),
                                series.to_string(),
                                (j + 1).to_string(),
                                report::num(value),
                            ]);
                        }
                    }
                }
            }
        }

        bodies.push(ComponentMoments {
            label: label.clone(),
            dimension: d,
            terminal_mean,
            terminal_variance,
            terminal_regulator_mean,
            max_complementarity,
        });
    }

    if ctx.emit_plot_data {
        let mut long = arts.csv("srbm_paths_long.csv")?;
        long.write_record(["component", "replication", "t", "series", "coordinate", "value"])
            .map_err(CliError::runtime)?;
        for row in &long_rows {
            long.write_record(row).map_err(CliError::runtime)?;
        }
        long.flush().map_err(CliError::runtime)?;
    }

    let body = Body { components: bodies };
    let path = arts.write_json(
        "report.json",
        &ExperimentReport {
            config: &ctx.resolved,
            csv_manifest: arts.manifest(),
            body: &body,
        },
    )?;
    println!(
        "simulate-srbm: {} components, {} replications, {} steps",
        body.components.len(),
        resolved.replications,
        resolved.steps
    );
    println!("report: {}", path.display());
    Ok(0)
}
