//! Subcommand implementations over the shared run context.

pub mod gjn;
pub mod limits;
pub mod srbm;
pub mod sweep;
pub mod verify;

use gjnlab::limits::LimitError;
use gjnlab::verify::{TestResult, VerifyError};

use crate::CliError;

/// Descriptor construction fails on config-selected regimes that do not fit
/// the network; other limit-calculus failures are numerical.
pub(crate) fn limit_error(e: LimitError) -> CliError {
    match e {
        LimitError::Unsupported(_) => CliError::Config(e.to_string()),
        _ => CliError::Runtime(e.to_string()),
    }
}

/// Rejected check parameters (including sample sizes below the statistical
/// minimum) are config errors; failures inside a check are runtime errors.
pub(crate) fn verify_error(e: VerifyError) -> CliError {
    match e {
        VerifyError::BadConfig(_) | VerifyError::TooFewSamples { .. } => {
            CliError::Config(e.to_string())
        }
        _ => CliError::Runtime(e.to_string()),
    }
}

/// One stdout line per check, in report order.
pub(crate) fn print_results(results: &[TestResult]) {
    for t in results {
        println!(
            "{:<15} {:<36} statistic {:.6e} threshold {:.6e}",
            t.verdict.to_string(),
            t.name,
            t.statistic,
            t.threshold
        );
    }
}
