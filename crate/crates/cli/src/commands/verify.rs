//! `verify`: the standard check battery over one network.
//!
//! The report's bytes are a pure function of the resolved config; the exit
//! status is 1 exactly when an absolute (non-trend) check fails.

use gjnlab::verify::run_battery;

use crate::config::RunContext;
use crate::report::{self, Artifacts, ExperimentReport};
use crate::CliError;

pub fn run(ctx: &RunContext) -> Result<u8, CliError> {
    let battery = ctx.battery();
    let outcome = run_battery(&battery).map_err(super::verify_error)?;

    let mut arts = Artifacts::new(&ctx.out_dir)?;
    if ctx.emit_plot_data {
        let mut wtr = arts.csv("verify_sweeps.csv")?;
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
        "verify: {} checks, {} gating failures",
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
