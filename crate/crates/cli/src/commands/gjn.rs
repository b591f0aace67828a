//! `simulate-gjn`: pre-limit network sample paths dumped as CSV.
//!
//! Columns of `gjn_paths.csv`: replication index, observation time, queue
//! lengths `z1..zJ`, cumulative busy times `b1..bJ`, and the idleness
//! regulators `y1..yJ` (forgone completions). One row per observation per
//! replication, replications in order.

use gjnlab::gjn::{self, SimOptions, SimOutput};
use gjnlab::rng::{replication_seed, StreamFamily};
use gjnlab::runner;
use gjnlab::stats;
use serde::Serialize;

use crate::config::RunContext;
use crate::report::{self, Artifacts, ExperimentReport};
use crate::CliError;

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Body {
    scale: f64,
    /// Starting queue vector derived from `xi` at this scale.
    initial_queue: Vec<u64>,
    total_events: u64,
    events_per_replication: Vec<u64>,
    mean_final_queue: Vec<f64>,
}

pub fn run(ctx: &RunContext) -> Result<u8, CliError> {
    let resolved = &ctx.resolved;
    let spec = &ctx.spec;
    let n = spec.stations();
    let r = resolved.scale;
    let z0 = gjn::warm_start(spec, r, &resolved.xi);
    let obs_times: Vec<f64> = if resolved.probe_times.is_empty() {
        (1..=resolved.steps)
            .map(|i| resolved.horizon * i as f64 / resolved.steps as f64)
            .collect()
    } else {
        resolved.probe_times.clone()
    };
    let opts = SimOptions {
        horizon: resolved.horizon,
        obs_times,
        event_cap: resolved.event_cap,
        record_flow: false,
    };
    let runs = runner::replications(resolved.replications, ctx.workers, |rep| {
        let streams = StreamFamily::new(replication_seed(resolved.master_seed, rep as u64), n);
        gjn::simulate(spec, r, &z0, &opts, &streams)
    });
    let runs: Vec<SimOutput> = runs
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(CliError::runtime)?;

    let mut arts = Artifacts::new(&ctx.out_dir)?;
    let mut header = vec!["replication".to_string(), "t".to_string()];
    for prefix in ["z", "b", "y"] {
        for j in 1..=n {
            header.push(format!("{prefix}{j}"));
        }
    }
    let mut wtr = arts.csv("gjn_paths.csv")?;
    wtr.write_record(&header).map_err(CliError::runtime)?;
    for (rep, out) in runs.iter().enumerate() {
        let y = out.idle_regulator();
        for (i, &t) in out.obs_times.iter().enumerate() {
            let mut record = vec![rep.to_string(), report::num(t)];
            for j in 0..n {
                record.push(out.queues[j][i].to_string());
            }
            for j in 0..n {
                record.push(report::num(out.busy_at_obs[j][i]));
            }
            for j in 0..n {
                record.push(report::num(y[j][i]));
            }
            wtr.write_record(&record).map_err(CliError::runtime)?;
        }
    }
    wtr.flush().map_err(CliError::runtime)?;

    if ctx.emit_plot_data {
        let mut long = arts.csv("gjn_paths_long.csv")?;
        long.write_record(["replication", "t", "series", "station", "value"])
            .map_err(CliError::runtime)?;
        for (rep, out) in runs.iter().enumerate() {
            let y = out.idle_regulator();
            for (i, &t) in out.obs_times.iter().enumerate() {
                for j in 0..n {
                    for (series, value) in [
                        ("queue", out.queues[j][i] as f64),
                        ("busy", out.busy_at_obs[j][i]),
                        ("regulator", y[j][i]),
                    ] {
                        long.write_record([
                            rep.to_string(),
                            report::num(t),
                            series.to_string(),
                            (j + 1).to_string(),
                            report::num(value),
                        ])
                        .map_err(CliError::runtime)?;
                    }
                }
            }
        }
        long.flush().map_err(CliError::runtime)?;
    }

    let events_per_replication: Vec<u64> = runs.iter().map(|o| o.events).collect();
    let mean_final_queue: Vec<f64> = (0..n)
        .map(|j| {
            stats::mean(
                &runs
                    .iter()
                    .map(|o| o.final_queue[j] as f64)
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let body = Body {
        scale: r,
        initial_queue: z0,
        total_events: events_per_replication.iter().sum(),
        events_per_replication,
        mean_final_queue,
    };
    let path = arts.write_json(
        "report.json",
        &ExperimentReport {
            config: &ctx.resolved,
            csv_manifest: arts.manifest(),
            body: &body,
        },
    )?;
    println!(
        "simulate-gjn: {} replications at r = {}, {} events",
        resolved.replications, r, body.total_events
    );
    println!("report: {}", path.display());
    Ok(0)
}
