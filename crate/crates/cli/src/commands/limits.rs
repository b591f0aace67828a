//! `limits`: closed-form limit parameters and identity residuals.

use gjnlab::limits::{
    covariance_gamma, eliminate, limit_descriptor_for_network, station_variance_direct,
    station_variance_quadratic, w_matrix, RegimeKind,
};
use gjnlab::linalg;
use gjnlab::network::solve_traffic;
use serde::Serialize;

use crate::config::RunContext;
use crate::report::{self, Artifacts, ExperimentReport};
use crate::CliError;

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Body {
    /// Solution of the traffic equations.
    throughput: Vec<f64>,
    /// Full visit-probability matrix, row-major.
    visit_probabilities: Vec<Vec<f64>>,
    /// Covariance of the limit driving Brownian motion.
    noise_covariance: Vec<Vec<f64>>,
    /// Per-station limit variances (accumulation route).
    station_variances: Vec<f64>,
    /// Largest relative disagreement between the two variance routes.
    variance_identity_gap: f64,
    /// Largest `|E R - G|` entry over all pivots.
    elimination_product_gap: f64,
    /// Largest pivot-diagonal disagreement with the visit probabilities.
    elimination_pivot_gap: f64,
    descriptor: Descriptor,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Descriptor {
    regime: RegimeKind,
    components: Vec<Component>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Component {
    label: String,
    /// 1-based network stations this component reports.
    stations: Vec<usize>,
    /// Component coordinates carrying those stations.
    observed: Vec<usize>,
    initial: Vec<f64>,
    drift: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    reflection: Vec<Vec<f64>>,
}

pub fn run(ctx: &RunContext) -> Result<u8, CliError> {
    let spec = &ctx.spec;
    let n = spec.stations();
    let lam = solve_traffic(spec).map_err(CliError::runtime)?;
    let w = w_matrix(&spec.routing).map_err(CliError::runtime)?;
    let gamma = covariance_gamma(spec).map_err(CliError::runtime)?;

    let mut station_variances = Vec::with_capacity(n);
    let mut variance_gap: f64 = 0.0;
    for j in 0..n {
        let direct = station_variance_direct(spec, &lam, &w, j);
        let quad = station_variance_quadratic(&gamma, &w, j);
        station_variances.push(direct);
        variance_gap = variance_gap.max((direct - quad).abs() / direct.abs().max(1e-12));
    }

    let refl = spec.routing.reflection();
    let mut product_gap: f64 = 0.0;
    let mut pivot_gap: f64 = 0.0;
    for k in 1..=n {
        let elim = eliminate(&refl, k).map_err(CliError::runtime)?;
        product_gap = product_gap.max(linalg::inf_norm(&(&elim.e * &refl - &elim.g)));
        pivot_gap = pivot_gap
            .max((elim.g[(k - 1, k - 1)] - (1.0 - w.get(k - 1, k - 1))).abs());
    }

    let descriptor =
        limit_descriptor_for_network(spec, ctx.resolved.regime, &ctx.resolved.xi)
            .map_err(super::limit_error)?;

    let visit: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| w.get(i, j)).collect())
        .collect();
    let body = Body {
        throughput: report::vector_entries(&lam),
        visit_probabilities: visit.clone(),
        noise_covariance: report::matrix_rows(&gamma),
        station_variances,
        variance_identity_gap: variance_gap,
        elimination_product_gap: product_gap,
        elimination_pivot_gap: pivot_gap,
        descriptor: Descriptor {
            regime: descriptor.kind,
            components: descriptor
                .components
                .iter()
                .map(|c| Component {
                    label: c.label.clone(),
                    stations: c.stations.iter().map(|&s| s + 1).collect(),
                    observed: c.observed.clone(),
                    initial: report::vector_entries(&c.initial),
                    drift: report::vector_entries(&c.drift),
                    covariance: report::matrix_rows(&c.covariance),
                    reflection: report::matrix_rows(&c.reflection),
                })
                .collect(),
        },
    };

    let mut arts = Artifacts::new(&ctx.out_dir)?;
    if ctx.emit_plot_data {
        let mut wtr = arts.csv("limits_matrices.csv")?;
        wtr.write_record(["matrix", "row", "col", "value"])
            .map_err(CliError::runtime)?;
        for (name, m) in [("visit", &visit), ("noiseCovariance", &body.noise_covariance)] {
            for (i, row) in m.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    wtr.write_record([
                        name.to_string(),
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        report::num(v),
                    ])
                    .map_err(CliError::runtime)?;
                }
            }
        }
        wtr.flush().map_err(CliError::runtime)?;
    }
    let path = arts.write_json(
        "report.json",
        &ExperimentReport {
            config: &ctx.resolved,
            csv_manifest: arts.manifest(),
            body: &body,
        },
    )?;
    println!(
        "limits: {n} stations, variance gap {:.3e}, elimination gap {:.3e}",
        body.variance_identity_gap, body.elimination_product_gap
    );
    println!("report: {}", path.display());
    Ok(0)
}
