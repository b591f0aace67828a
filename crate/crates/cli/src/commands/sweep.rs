//! `sweep`: the scale-grid trend experiments on their own, with
//! config-controlled sizes and probe times.
//!
//! Runs the functional-limit probe, the scale-separation medians, and the
//! independence sweep where the network's structure supports them, mirroring
//! the trend slice of `verify` under a different seed derivation.

use gjnlab::limits::{limit_descriptor_for_network, RegimeKind};
use gjnlab::rng::derive_seed;
use gjnlab::srbm::PrelimitFamily;
use gjnlab::verify::{
    functional_limit_check, independence_sweep, scale_separation_check, FunctionalLimitConfig,
    IndependenceSweepConfig, ScaleSeparationConfig, SweepRecord, TestResult, VerifyReport,
};

use crate::config::RunContext;
use crate::report::{self, Artifacts, ExperimentReport};
use crate::CliError;

pub fn run(ctx: &RunContext) -> Result<u8, CliError> {
    let resolved = &ctx.resolved;
    let spec = &ctx.spec;
    let stations = spec.stations();
    let blocks = spec.regime.count();
    let mut results: Vec<TestResult> = Vec::new();
    let mut sweeps: Vec<SweepRecord> = Vec::new();

    if blocks == stations && blocks >= 2 {
        let station = stations - 1;
        let descriptor =
            limit_descriptor_for_network(spec, RegimeKind::Matching, &resolved.xi)
                .map_err(super::limit_error)?;
        let family = PrelimitFamily::from_network(spec).map_err(super::limit_error)?;
        let (result, sweep) = functional_limit_check(&FunctionalLimitConfig {
            family: &family,
            clock: spec.regime.block_of(station),
            station,
            limit: &descriptor.components[station],
            xi: resolved.xi.clone(),
            r_grid: resolved.r_grid.clone(),
            horizon: resolved.horizon,
            steps: resolved.steps,
            replications: resolved.replications,
            alpha: resolved.alpha,
            master_seed: derive_seed(resolved.master_seed, 1),
            workers: ctx.workers,
        })
        .map_err(super::verify_error)?;
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

    let family = PrelimitFamily::from_network(spec).map_err(super::limit_error)?;
    results.extend(
        scale_separation_check(
            "scale-separation",
            &ScaleSeparationConfig {
                family: &family,
                xi: resolved.xi.clone(),
                r_grid: resolved.r_grid.clone(),
                horizon: resolved.horizon,
                steps: resolved.steps,
                replications: resolved.replications,
                master_seed: derive_seed(resolved.master_seed, 2),
                workers: ctx.workers,
            },
        )
        .map_err(super::verify_error)?,
    );

    if stations >= 2 && blocks >= 2 && resolved.r_grid.len() >= 2 {
        let (result, sweep) = independence_sweep(&IndependenceSweepConfig {
            spec,
            stations: (0, stations - 1),
            r_grid: resolved.r_grid.clone(),
            probes: resolved.probe_times.clone(),
            replications: resolved.replications,
            alpha: resolved.alpha,
            event_cap: resolved.event_cap,
            master_seed: derive_seed(resolved.master_seed, 3),
            workers: ctx.workers,
        })
        .map_err(super::verify_error)?;
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

    let outcome = VerifyReport {
        master_seed: resolved.master_seed,
        results,
        sweeps,
    };

    let mut arts = Artifacts::new(&ctx.out_dir)?;
    if ctx.emit_plot_data {
        let mut wtr = arts.csv("sweep_metrics.csv")?;
        wtr.write_record(["sweep", "r", "metric"])
            .map_err(CliError::runtime)?;
        for rec in &outcome.sweeps {
            for (&r, &m) in rec.sweep.r_grid.iter().zip(&rec.sweep.metric_per_r) {
                wtr.write_record([rec.name.clone(), report::num(r), report::num(m)])
                    .map_err(CliError::runtime)?;
            }
        }
        wtr.flush().map_err(CliError::runtime)?;
    }

    super::print_results(&outcome.results);
    let gating = outcome.gating_failures();
    println!(
        "sweep: {} checks, {} gating failures",
        outcome.results.len(),
        gating
    );
    let path = arts.write_json(
        "report.json",
        &ExperimentReport {
            config: &ctx.resolved,
            csv_manifest: arts.manifest(),
            body: &outcome,
        },
    )?;
    println!("report: {}", path.display());
    Ok(if gating > 0 { 1 } else { 0 })
}
