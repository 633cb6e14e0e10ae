//! `csgraph` command-line driver.
//!
//! Exit codes: 0 converged, 1 error, 2 diverged, 3 stalled. Errors are
//! reported on stderr as a single JSON object.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use csgraph::Error;

fn error_kind(e: &anyhow::Error) -> (&'static str, serde_json::Value) {
    let Some(err) = e.downcast_ref::<Error>() else {
        return ("io_or_usage", serde_json::Value::Null);
    };
    let log = |log: &Vec<(f64, &'static str)>| {
        json!(log.iter().map(|(l, s)| json!({ "lambda": l, "status": s })).collect::<Vec<_>>())
    };
    match err {
        Error::Misaligned { .. } => ("misaligned", serde_json::Value::Null),
        Error::NonFinite { .. } => ("non_finite", serde_json::Value::Null),
        Error::InvalidGraph(_) => ("invalid_graph", serde_json::Value::Null),
        Error::Disconnected => ("disconnected", serde_json::Value::Null),
        Error::VertexOutOfRange { .. } => ("vertex_out_of_range", serde_json::Value::Null),
        Error::InvalidParameter(_) => ("invalid_parameter", serde_json::Value::Null),
        Error::Incompatible { .. } => ("incompatible", serde_json::Value::Null),
        Error::NoConvergence { .. } => ("no_convergence", serde_json::Value::Null),
        Error::EnergyOverflow => ("energy_overflow", serde_json::Value::Null),
        Error::DescentBudget { .. } => ("descent_budget", serde_json::Value::Null),
        Error::NotCritical { .. } => ("not_critical", serde_json::Value::Null),
        Error::ProbeCap { log: l, .. } => ("probe_cap", log(l)),
        Error::InconclusiveProbe { log: l, .. } => ("inconclusive_probe", log(l)),
        Error::Json(_) => ("json", serde_json::Value::Null),
    }
}

fn report(kind: &str, message: String, probes: serde_json::Value) -> ExitCode {
    let mut body = json!({ "error": { "kind": kind, "message": message, "exit_code": commands::EXIT_ERROR } });
    if !probes.is_null() {
        body["error"]["probes"] = probes;
    }
    eprintln!("{body}");
    ExitCode::from(commands::EXIT_ERROR as u8)
}

fn main() -> ExitCode {
    let cli = match args::Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report("usage", e.render().to_string().trim_end().to_string(), serde_json::Value::Null),
    };
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let (kind, probes) = error_kind(&e);
            report(kind, format!("{e:#}"), probes)
        }
    }
}
