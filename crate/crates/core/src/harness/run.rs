//! Monte Carlo execution of an [`ExperimentConfig`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist_zoo::sample_keyed;
use crate::error::Result;
use crate::harness::config::{Cell, ExperimentConfig, Method};
use crate::harness::estimate::Prepared;
use crate::metrics::MiseGrid;
use crate::rng::SeedKey;

/// Outcome of one method on one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub cell: usize,
    pub rep: usize,
    pub method: Method,
    /// Unscaled MISE.
    pub mise: Option<f64>,
    pub mix: Option<f64>,
    pub error: Option<String>,
}

/// Aggregate over the replications of one cell and method. MISE values are
/// unscaled here; tables multiply by 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub family: String,
    pub params: String,
    pub n: usize,
    pub m: usize,
    pub method: Method,
    pub mise_mean: Option<f64>,
    pub mise_sd: Option<f64>,
    pub mix_mean: Option<f64>,
    pub mix_sd: Option<f64>,
    pub reps: usize,
    pub failures: usize,
}

impl ResultRow {
    /// More than 10% of the replications failed.
    pub fn flagged(&self) -> bool {
        self.failures * 10 > self.reps
    }
}

/// Mean and `n - 1` standard deviation; the deviation is 0 for one value.
pub fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Some((mean, (ss / (n - 1.0)).sqrt()))
}

fn run_rep(
    config: &ExperimentConfig,
    cell_index: usize,
    cell: &Cell,
    grid: &Result<MiseGrid>,
    rep: usize,
) -> Vec<RepRecord> {
    let record = |method, outcome: Result<(f64, Option<f64>)>| match outcome {
        Ok((v, mix)) => RepRecord {
            cell: cell_index,
            rep,
            method,
            mise: Some(v),
            mix,
            error: None,
        },
        Err(e) => RepRecord {
            cell: cell_index,
            rep,
            method,
            mise: None,
            mix: None,
            error: Some(e.to_string()),
        },
    };
    let key = SeedKey::new(config.master_seed, cell_index as u64, rep as u64);
    let sample = match sample_keyed(&cell.spec, cell.n, key) {
        Ok(s) => s,
        Err(e) => {
            return config
                .methods
                .iter()
                .map(|&m| record(m, Err(e.clone())))
                .collect()
        }
    };
    let knobs = &config.knobs;
    let kernel = knobs.kernel.resolve(Some(&cell.spec));
    let prep = Prepared::new(&sample, cell.m, kernel, knobs);
    config
        .methods
        .iter()
        .map(|&method| {
            let outcome = prep.as_ref().map_err(Clone::clone).and_then(|prep| {
                let (model, _) = prep.fit(method)?;
                let ev = model.evaluator(&sample)?;
                let r = grid.as_ref().map_err(Clone::clone)?.evaluate(|x| ev.cdf(x));
                Ok((r.value, model.mixing_ratio()))
            });
            record(method, outcome)
        })
        .collect()
}

fn aggregate(config: &ExperimentConfig, records: &[RepRecord]) -> Vec<ResultRow> {
    let mut rows = Vec::with_capacity(config.cells.len() * config.methods.len());
    for (ci, cell) in config.cells.iter().enumerate() {
        for &method in &config.methods {
            let mine = records
                .iter()
                .filter(|r| r.cell == ci && r.method == method);
            let mut mises = Vec::new();
            let mut mixes = Vec::new();
            let mut failures = 0;
            for r in mine {
                match r.mise {
                    Some(v) => {
                        mises.push(v);
                        if let Some(p) = r.mix {
                            mixes.push(p);
                        }
                    }
                    None => failures += 1,
                }
            }
            let mise_stats = mean_sd(&mises);
            let mix_stats = mean_sd(&mixes);
            rows.push(ResultRow {
                family: cell.spec.family().to_string(),
                params: cell.spec.params(),
                n: cell.n,
                m: cell.m,
                method,
                mise_mean: mise_stats.map(|s| s.0),
                mise_sd: mise_stats.map(|s| s.1),
                mix_mean: mix_stats.map(|s| s.0),
                mix_sd: mix_stats.map(|s| s.1),
                reps: config.reps,
                failures,
            });
        }
    }
    rows
}

/// Runs every cell and method and returns the per-replication records in
/// (cell, rep, method) order along with the aggregated rows.
///
/// Replications run on the current rayon pool; the output does not depend
/// on the number of threads.
pub fn run_experiment_detailed(
    config: &ExperimentConfig,
) -> Result<(Vec<ResultRow>, Vec<RepRecord>)> {
    config.validate()?;
    let grids: Vec<Result<MiseGrid>> = config
        .cells
        .par_iter()
        .map(|c| MiseGrid::new(&c.spec, c.m, config.knobs.mise_nodes))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..config.cells.len())
        .flat_map(|c| (0..config.reps).map(move |r| (c, r)))
        .collect();
    let records: Vec<RepRecord> = jobs
        .par_iter()
        .map(|&(c, r)| run_rep(config, c, &config.cells[c], &grids[c], r))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let rows = aggregate(config, &records);
    Ok((rows, records))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    Ok(run_experiment_detailed(config)?.0)
}
