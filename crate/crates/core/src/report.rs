//! Report files: per-run and summary tables plus a structured summary.
//!
//! - `runs.csv`: one row per run × metric
//! - `summary.csv`: one row per protocol × density × sweep value × ring × metric
//! - `series.csv`: seed-averaged duplicates and coverage over time
//! - `summary.json`: config echo, seeds and every summary row with its CI

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::experiment::{Experiment, GroupKey};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One summary row, shared by the csv and json outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub protocol: String,
    pub density: f64,
    pub sweep_param: Option<String>,
    pub sweep_value: Option<f64>,
    pub ring: Option<f64>,
    pub metric: String,
    pub mean: f64,
    pub ci_half_width: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct RunRow {
    protocol: String,
    density: f64,
    sweep_param: Option<String>,
    sweep_value: Option<f64>,
    seed: u64,
    ring: Option<f64>,
    metric: String,
    value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SeriesRow {
    protocol: String,
    density: f64,
    sweep_value: Option<f64>,
    t: f64,
    duplicates: f64,
    coverage: f64,
}

#[derive(Serialize)]
struct JsonSummary<'a> {
    name: &'a str,
    config: &'a ScenarioConfig,
    seeds: &'a [u64],
    ci_level: f64,
    runs: usize,
    flagged_runs: usize,
    rows: Vec<SummaryRow>,
}

/// Split `fdr_600` into (`fdr`, 600) when the suffix is a configured ring.
pub fn split_ring(name: &str, rings: &[f64]) -> (String, Option<f64>) {
    if let Some((base, suffix)) = name.rsplit_once('_') {
        if let Ok(r) = suffix.parse::<f64>() {
            if rings.contains(&r) {
                return (base.to_string(), Some(r));
            }
        }
    }
    (name.to_string(), None)
}

fn sweep_param(cfg: &ScenarioConfig) -> Option<String> {
    cfg.sweep.as_ref().map(|s| s.param.name().to_string())
}

pub fn summary_rows(exp: &Experiment) -> Vec<SummaryRow> {
    let param = sweep_param(&exp.config);
    let mut rows = Vec::new();
    for g in &exp.groups {
        let GroupKey { protocol, density, sweep_value } = g.key;
        for m in &g.metrics {
            let (metric, ring) = split_ring(&m.metric, &exp.config.rings);
            rows.push(SummaryRow {
                protocol: protocol.name().to_string(),
                density,
                sweep_param: param.clone(),
                sweep_value,
                ring,
                metric,
                mean: m.mean,
                ci_half_width: m.half_width,
                n: m.n,
            });
        }
    }
    rows
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, ReportError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn runs_csv(exp: &Experiment) -> Result<String, ReportError> {
    let param = sweep_param(&exp.config);
    let mut rows = Vec::new();
    for r in &exp.runs {
        for (name, value) in r.ledger.scalars() {
            let (metric, ring) = split_ring(&name, &exp.config.rings);
            rows.push(RunRow {
                protocol: r.key.protocol.name().to_string(),
                density: r.key.density,
                sweep_param: param.clone(),
                sweep_value: r.key.sweep_value,
                seed: r.key.seed,
                ring,
                metric,
                value,
            });
        }
    }
    to_csv(&rows)
}

pub fn summary_csv(exp: &Experiment) -> Result<String, ReportError> {
    to_csv(&summary_rows(exp))
}

pub fn series_csv(exp: &Experiment) -> Result<String, ReportError> {
    let mut rows = Vec::new();
    for g in &exp.groups {
        for &(t, duplicates, coverage) in &g.series {
            rows.push(SeriesRow {
                protocol: g.key.protocol.name().to_string(),
                density: g.key.density,
                sweep_value: g.key.sweep_value,
                t,
                duplicates,
                coverage,
            });
        }
    }
    to_csv(&rows)
}

pub fn summary_json(exp: &Experiment) -> Result<String, ReportError> {
    let s = JsonSummary {
        name: &exp.config.name,
        config: &exp.config,
        seeds: &exp.seeds,
        ci_level: exp.config.ci_level,
        runs: exp.runs.len(),
        flagged_runs: exp.flagged_runs(),
        rows: summary_rows(exp),
    };
    let mut text = serde_json::to_string_pretty(&s)?;
    text.push('\n');
    Ok(text)
}

/// Write all report files into `dir`, creating it if needed. Returns the paths written.
pub fn write_reports(exp: &Experiment, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let files = [
        ("runs.csv", runs_csv(exp)?),
        ("summary.csv", summary_csv(exp)?),
        ("series.csv", series_csv(exp)?),
        ("summary.json", summary_json(exp)?),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{run_experiment, ExperimentOptions};
    use crate::scenario::preset;

    #[test]
    fn ring_suffix_split() {
        let rings = [300.0, 600.0];
        assert_eq!(split_ring("fdr_600", &rings), ("fdr".into(), Some(600.0)));
        assert_eq!(split_ring("fdr_I_300", &rings), ("fdr_I".into(), Some(300.0)));
        assert_eq!(split_ring("fdr_700", &rings), ("fdr_700".into(), None));
        assert_eq!(split_ring("e2e_loss", &rings), ("e2e_loss".into(), None));
    }

    #[test]
    fn reports_are_written_and_reproducible() {
        let mut cfg = preset("ctd-1000").unwrap();
        cfg.seeds = vec![1, 2];
        cfg.pedestrian_count = 100;
        cfg.duration = 4.0;
        cfg.sweep = None;
        let exp = run_experiment(&cfg, &ExperimentOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_reports(&exp, dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary.starts_with("protocol,density,sweep_param,sweep_value,ring,metric,mean,ci_half_width,n\n"));
        assert!(summary.contains("ctd-query,0.0,,,,messages_total,"));
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(json["seeds"], serde_json::json!([1, 2]));
        assert_eq!(json["config"]["pedestrian_count"], 100);

        let again = run_experiment(&cfg, &ExperimentOptions::default()).unwrap();
        assert_eq!(summary_json(&exp).unwrap(), summary_json(&again).unwrap());
        assert_eq!(runs_csv(&exp).unwrap(), runs_csv(&again).unwrap());
    }
}
