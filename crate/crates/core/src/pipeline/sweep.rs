//! Cross product of C values and seeds over one data source.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::{run_experiment_on, DataSource};
use super::{io, RunConfig, RunReport};
use crate::error::{Error, Result};

/// One (c, seed) run. Failed cells keep their key, NaN metrics and the
/// error message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub dataset: String,
    pub seed: u64,
    pub c: f64,
    pub distance: String,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub si: f64,
    pub kdn: f64,
    pub final_carol: f64,
    pub final_recon: f64,
    pub final_total: f64,
    pub error: String,
}

impl SweepCell {
    fn from_report(r: &RunReport) -> Self {
        let e = &r.evaluation;
        SweepCell {
            dataset: r.dataset.name.clone(),
            seed: r.config.seed,
            c: r.config.c,
            distance: r.config.distance.to_string(),
            f1: e.test.f1,
            precision: e.test.precision,
            recall: e.test.recall,
            si: e.overlap.si,
            kdn: e.overlap.kdn,
            final_carol: r.final_loss.carol,
            final_recon: r.final_loss.recon,
            final_total: r.final_loss.total,
            error: String::new(),
        }
    }

    fn failed(dataset: &str, cfg: &RunConfig, err: &Error) -> Self {
        SweepCell {
            dataset: dataset.into(),
            seed: cfg.seed,
            c: cfg.c,
            distance: cfg.distance.to_string(),
            f1: f64::NAN,
            precision: f64::NAN,
            recall: f64::NAN,
            si: f64::NAN,
            kdn: f64::NAN,
            final_carol: f64::NAN,
            final_recon: f64::NAN,
            final_total: f64::NAN,
            error: err.to_string(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_empty()
    }
}

/// Means over the successful seeds of one c value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMean {
    pub c: f64,
    pub runs: usize,
    pub failed: usize,
    pub f1: f64,
    pub si: f64,
    pub kdn: f64,
    pub final_carol: f64,
    pub final_recon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub cells: Vec<SweepCell>,
    pub means: Vec<SweepMean>,
    /// c with the highest mean test F1. Chosen on the test split itself,
    /// so it is an oracle selection, not a tuned hyperparameter.
    pub best_c: Option<f64>,
    pub selection: String,
}

impl SweepTable {
    pub fn mean_for(&self, c: f64) -> Option<&SweepMean> {
        self.means.iter().find(|m| m.c == c)
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

pub fn sweep_c(template: &RunConfig, c_values: &[f64], seeds: &[u64], jobs: usize) -> Result<SweepTable> {
    template.validate()?;
    let source = DataSource::from_config(template).map_err(|e| e.at_stage("load_data"))?;
    sweep_c_on(template, c_values, seeds, jobs, &source)
}

/// Runs every (c, seed) cell, up to `jobs` at a time. Cell failures are
/// recorded and do not stop the sweep; rows come back in (c, seed) input
/// order regardless of scheduling.
pub fn sweep_c_on(
    template: &RunConfig,
    c_values: &[f64],
    seeds: &[u64],
    jobs: usize,
    source: &DataSource,
) -> Result<SweepTable> {
    if c_values.is_empty() || seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one c value and one seed".into()));
    }
    if let Some(c) = c_values.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::Config(format!("c values must lie in [0, 1], got {c}")));
    }
    let configs: Vec<RunConfig> = c_values
        .iter()
        .flat_map(|&c| {
            seeds.iter().map(move |&seed| RunConfig {
                c,
                seed,
                ..template.clone()
            })
        })
        .collect();
    for cfg in &configs {
        cfg.validate()?;
    }
    let dataset_name = match source {
        DataSource::Split(ds) => ds.name.clone(),
        DataSource::Fixed { train, .. } => train.name.clone(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let cells: Vec<SweepCell> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                let run = source
                    .for_seed(cfg.seed, cfg.test_frac)
                    .and_then(|(train, test)| run_experiment_on(cfg, &train, &test));
                match run {
                    Ok(outcome) => SweepCell::from_report(&outcome.report),
                    Err(e) => SweepCell::failed(&dataset_name, cfg, &e),
                }
            })
            .collect()
    });

    let means: Vec<SweepMean> = c_values
        .iter()
        .map(|&c| {
            let ok: Vec<&SweepCell> = cells.iter().filter(|r| r.c == c && r.is_ok()).collect();
            SweepMean {
                c,
                runs: ok.len(),
                failed: cells.iter().filter(|r| r.c == c && !r.is_ok()).count(),
                f1: mean(ok.iter().map(|r| r.f1)),
                si: mean(ok.iter().map(|r| r.si)),
                kdn: mean(ok.iter().map(|r| r.kdn)),
                final_carol: mean(ok.iter().map(|r| r.final_carol)),
                final_recon: mean(ok.iter().map(|r| r.final_recon)),
            }
        })
        .collect();
    let best_c = means
        .iter()
        .filter(|m| m.runs > 0)
        .fold(None::<&SweepMean>, |best, m| match best {
            Some(b) if b.f1 >= m.f1 => Some(b),
            _ => Some(m),
        })
        .map(|m| m.c);
    Ok(SweepTable {
        cells,
        means,
        best_c,
        selection: "oracle: highest mean test F1".into(),
    })
}

/// Writes sweep_table.csv (one row per cell), sweep_means.csv and
/// sweep_summary.json into `dir`.
pub fn write_sweep_outputs(table: &SweepTable, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::write_rows(&dir.join("sweep_table.csv"), &table.cells)?;
    io::write_rows(&dir.join("sweep_means.csv"), &table.means)?;
    io::write_json(&dir.join("sweep_summary.json"), table)
}
