//! Multi-seed experiment runner: expands a scenario into independent runs,
//! executes them (optionally in parallel) and aggregates confidence intervals.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{ci, MetricsLedger};
use crate::netsim::{simulate, NetsimError, RunOptions};
use crate::scenario::{ConfigError, Protocol, ProtocolFamily, ScenarioConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run {protocol} density={density} seed={seed}: {source}")]
    Run {
        protocol: Protocol,
        density: f64,
        seed: u64,
        #[source]
        source: NetsimError,
    },
    #[error("{0} run(s) had non-converged equilibria (strict mode)")]
    NonConverged(usize),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExperimentOptions {
    /// Replace the configured seed list.
    pub seeds: Option<Vec<u64>>,
    /// Worker threads; 0 or 1 runs sequentially.
    pub jobs: usize,
    /// Fail when any equilibrium computation did not converge.
    pub strict: bool,
}

/// Identity of one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunKey {
    pub protocol: Protocol,
    /// Vehicles per km²; zero for pedestrian-only runs.
    pub density: f64,
    pub sweep_value: Option<f64>,
    pub seed: u64,
}

impl RunKey {
    pub fn group(&self) -> GroupKey {
        GroupKey { protocol: self.protocol, density: self.density, sweep_value: self.sweep_value }
    }
}

/// Runs that differ only by seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupKey {
    pub protocol: Protocol,
    pub density: f64,
    pub sweep_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub key: RunKey,
    pub ledger: MetricsLedger,
    pub flagged: bool,
    pub events: u64,
}

/// Cross-seed aggregate of one scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    /// Absent with fewer than two samples.
    pub half_width: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub key: GroupKey,
    pub metrics: Vec<MetricSummary>,
    /// Mean over seeds of (t, cumulative duplicates, coverage) snapshots.
    pub series: Vec<(f64, f64, f64)>,
}

impl GroupSummary {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub config: ScenarioConfig,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunResult>,
    pub groups: Vec<GroupSummary>,
}

impl Experiment {
    pub fn group(&self, protocol: Protocol, density: f64, sweep_value: Option<f64>) -> Option<&GroupSummary> {
        self.groups
            .iter()
            .find(|g| g.key.protocol == protocol && g.key.density == density && g.key.sweep_value == sweep_value)
    }

    pub fn flagged_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.flagged).count()
    }
}

/// All runs of a scenario in a fixed order: sweep value, protocol, density, seed.
pub fn plan(cfg: &ScenarioConfig, seeds: &[u64]) -> Vec<RunKey> {
    let sweep: Vec<Option<f64>> = match &cfg.sweep {
        Some(s) => s.values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let mut keys = Vec::new();
    for &sweep_value in &sweep {
        for &protocol in &cfg.protocols {
            let densities = if protocol.family() == ProtocolFamily::Ctd { vec![0.0] } else { cfg.densities.clone() };
            for &density in &densities {
                for &seed in seeds {
                    keys.push(RunKey { protocol, density, sweep_value, seed });
                }
            }
        }
    }
    keys
}

/// Execute one planned run.
pub fn run_one(cfg: &ScenarioConfig, key: &RunKey) -> Result<RunResult, ExperimentError> {
    let cfg = match (&cfg.sweep, key.sweep_value) {
        (Some(s), Some(v)) => cfg.with_sweep_value(s.param, v),
        _ => cfg.clone(),
    };
    let out = simulate(&cfg, key.protocol, key.density, key.seed, &RunOptions::default()).map_err(|source| {
        ExperimentError::Run { protocol: key.protocol, density: key.density, seed: key.seed, source }
    })?;
    Ok(RunResult { key: *key, ledger: out.ledger, flagged: out.flagged, events: out.events })
}

/// Validate, run every planned simulation and aggregate.
///
/// Results do not depend on `jobs`: runs are independent and collected in
/// plan order.
pub fn run_experiment(cfg: &ScenarioConfig, opts: &ExperimentOptions) -> Result<Experiment, ExperimentError> {
    let mut cfg = cfg.clone();
    if let Some(seeds) = &opts.seeds {
        cfg.seeds = seeds.clone();
    }
    cfg.check()?;
    let seeds = cfg.seeds.clone();
    let keys = plan(&cfg, &seeds);
    let runs: Vec<RunResult> = if opts.jobs <= 1 {
        keys.iter().map(|k| run_one(&cfg, k)).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| ExperimentError::Pool(e.to_string()))?;
        pool.install(|| keys.par_iter().map(|k| run_one(&cfg, k)).collect::<Result<_, _>>())?
    };
    let flagged = runs.iter().filter(|r| r.flagged).count();
    if opts.strict && flagged > 0 {
        return Err(ExperimentError::NonConverged(flagged));
    }
    let groups = aggregate(&runs, cfg.ci_level);
    Ok(Experiment { config: cfg, seeds, runs, groups })
}

/// Group runs by everything but the seed and summarize each scalar.
pub fn aggregate(runs: &[RunResult], level: f64) -> Vec<GroupSummary> {
    let mut order: Vec<GroupKey> = Vec::new();
    let mut members: Vec<Vec<&RunResult>> = Vec::new();
    for r in runs {
        let g = r.key.group();
        match order.iter().position(|k| *k == g) {
            Some(i) => members[i].push(r),
            None => {
                order.push(g);
                members.push(vec![r]);
            }
        }
    }
    order
        .into_iter()
        .zip(members)
        .map(|(key, rs)| {
            let mut values: BTreeMap<usize, (String, Vec<f64>)> = BTreeMap::new();
            for r in &rs {
                for (i, (name, v)) in r.ledger.scalars().into_iter().enumerate() {
                    let entry = values.entry(i).or_insert_with(|| (name, Vec::new()));
                    if let Some(v) = v {
                        entry.1.push(v);
                    }
                }
            }
            let metrics = values
                .into_values()
                .filter(|(_, vs)| !vs.is_empty())
                .map(|(metric, vs)| {
                    let n = vs.len();
                    match ci(&vs, level) {
                        Ok(c) => MetricSummary { metric, mean: c.mean, half_width: Some(c.half_width), n },
                        Err(_) => MetricSummary { metric, mean: vs.iter().sum::<f64>() / n as f64, half_width: None, n },
                    }
                })
                .collect();
            GroupSummary { key, metrics, series: mean_series(&rs) }
        })
        .collect()
}

fn mean_series(runs: &[&RunResult]) -> Vec<(f64, f64, f64)> {
    let len = runs.iter().map(|r| r.ledger.duplicates.len()).min().unwrap_or(0);
    let n = runs.len() as f64;
    (0..len)
        .map(|i| {
            let t = runs[0].ledger.duplicates[i].0;
            let dup = runs.iter().map(|r| r.ledger.duplicates[i].1 as f64).sum::<f64>() / n;
            let cov = runs.iter().map(|r| r.ledger.coverage[i].1).sum::<f64>() / n;
            (t, dup, cov)
        })
        .collect()
}
