//! Manifest assembly: after a run has completed, `bundle` checks that the
//! output directory holds everything a plotting pipeline needs and writes
//! `manifest.json` listing one `(file, x column, y column, reference line)`
//! tuple per figure.
//!
//! Reference lines come from the run itself (a summary metric) or from the
//! config (the density threshold `1 - rho`), so a manifest is meaningful
//! only for the directory the run produced.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

use super::config::{ExperimentKind, ResolvedConfig, SCHEMA_VERSION};
use super::run::{expected_csvs, write_atomic};

/// One figure: plot `y_column` against `x_column` from `file`, with an
/// optional horizontal reference line at the theoretical target.
#[derive(Debug, Clone, Serialize)]
pub struct PlotEntry {
    pub file: String,
    pub x_column: String,
    pub y_column: String,
    pub reference_line: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub experiment: &'static str,
    pub config: String,
    pub summary: String,
    pub plots: Vec<PlotEntry>,
}

/// Either the written manifest path or the list of missing inputs.
#[derive(Debug)]
pub enum BundleOutcome {
    Written(PathBuf),
    Missing(Vec<String>),
}

fn plot(file: &str, x: &str, y: &str, reference: Option<f64>) -> PlotEntry {
    PlotEntry {
        file: file.to_string(),
        x_column: x.to_string(),
        y_column: y.to_string(),
        reference_line: reference,
    }
}

fn metric(summary: &serde_json::Value, key: &str) -> Option<f64> {
    summary["metrics"][key].as_f64()
}

/// Verify the run outputs exist and write `manifest.json` next to them.
pub fn emit_bundle(r: &ResolvedConfig) -> Result<BundleOutcome> {
    let dir = Path::new(&r.config.output_dir);
    let kind = r.config.experiment;

    let mut required: Vec<&str> = vec!["config.json", "summary.json"];
    required.extend(expected_csvs(kind));
    let missing: Vec<String> = required
        .iter()
        .filter(|name| !dir.join(name).is_file())
        .map(|name| dir.join(name).display().to_string())
        .collect();
    if !missing.is_empty() {
        return Ok(BundleOutcome::Missing(missing));
    }

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json"))?)?;
    if summary["schema_version"].as_u64() != Some(SCHEMA_VERSION as u64) {
        return Ok(BundleOutcome::Missing(vec![format!(
            "{}: schema_version {} (expected {SCHEMA_VERSION})",
            dir.join("summary.json").display(),
            summary["schema_version"]
        )]));
    }

    let plots = match kind {
        ExperimentKind::Drift => vec![plot(
            "drift_grid.csv",
            "n",
            "rate",
            metric(&summary, "a_hat_as"),
        )],
        ExperimentKind::Goodtimes => vec![plot(
            "density_prefix.csv",
            "n",
            "density",
            Some(1.0 - r.config.rho),
        )],
        ExperimentKind::Functional | ExperimentKind::Banach => {
            let target = metric(&summary, "a_hat");
            vec![
                plot("convergence.csv", "n", "functional_rate", target),
                plot("convergence.csv", "n", "distance_rate", target),
            ]
        }
        ExperimentKind::Meanergodic => {
            let target = r.config.expected_drift.or(metric(&summary, "estimate_mean"));
            vec![
                plot("convergence.csv", "n", "functional_rate", target),
                plot("convergence.csv", "n", "distance_rate", target),
            ]
        }
        ExperimentKind::Wolffdenjoy => vec![plot("orbit.csv", "n", "radius", Some(1.0))],
        ExperimentKind::Oseledets => {
            let target = metric(&summary, "reference_top");
            vec![
                plot("spectrum.csv", "n", "a_rate", target),
                plot("spectrum.csv", "n", "functional_rate", target),
            ]
        }
        ExperimentKind::Decompose => vec![plot("intervals.csv", "start", "width", None)],
    };

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        experiment: kind.name(),
        config: "config.json".to_string(),
        summary: "summary.json".to_string(),
        plots,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    let path = write_atomic(dir, "manifest.json", &text)?;
    Ok(BundleOutcome::Written(path))
}
