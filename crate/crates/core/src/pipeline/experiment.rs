use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::classifier::{train_classifier, ClassifierConfig, CvRecord};
use super::encoder::{embed_dataset, train_encoder, EpochLoss, StepLog};
use super::{io, RunConfig};
use crate::data::{read_corpus, stratified_split, Dataset, Label};
use crate::error::{Error, Result};
use crate::losses::LossBreakdown;
use crate::metrics::{overlap_report, pca_project, prf, ConfusionCounts, OverlapReport};
use crate::net::{write_checkpoint, EncoderState};

/// Where train/test documents come from: one corpus split per seed, or a
/// fixed pair of corpora.
#[derive(Debug, Clone)]
pub enum DataSource {
    Split(Dataset),
    Fixed { train: Dataset, test: Dataset },
}

impl DataSource {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let corpus = cfg
            .corpus
            .as_deref()
            .ok_or_else(|| Error::Config("no corpus given".into()))?;
        let train = read_corpus(corpus, cfg.feat_dim)?;
        match cfg.test_corpus.as_deref() {
            Some(test) => Ok(DataSource::Fixed {
                train,
                test: read_corpus(test, cfg.feat_dim)?,
            }),
            None => Ok(DataSource::Split(train)),
        }
    }

    pub fn for_seed(&self, seed: u64, test_frac: f64) -> Result<(Dataset, Dataset)> {
        match self {
            DataSource::Split(ds) => stratified_split(ds, test_frac, seed),
            DataSource::Fixed { train, test } => Ok((train.clone(), test.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub train_size: usize,
    pub test_size: usize,
    pub minority_label: Label,
    pub train_imbalance_ratio: f64,
    pub test_imbalance_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Classifier and overlap results for one pair of embedding sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub test: TestMetrics,
    pub overlap: OverlapReport,
    pub classifier: CvRecord,
}

/// Everything `run_experiment` reports. Wall-clock time is kept out of the
/// serialised form so reports are byte-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub dataset: DatasetSummary,
    pub epochs: Vec<EpochLoss>,
    pub final_loss: LossBreakdown,
    #[serde(flatten)]
    pub evaluation: Evaluation,
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub steps: Vec<StepLog>,
    pub encoder: EncoderState,
    pub train_embeddings: Vec<Vec<f64>>,
    pub test_embeddings: Vec<Vec<f64>>,
    pub train_labels: Vec<Label>,
    pub test_labels: Vec<Label>,
}

fn classifier_config(cfg: &RunConfig) -> ClassifierConfig {
    ClassifierConfig {
        folds: cfg.cv_folds,
        epochs: cfg.clf_epochs,
        lr: cfg.clf_lr,
        batch: cfg.clf_batch,
    }
}

/// Trains the downstream classifier on frozen training embeddings and
/// scores minority-class PRF and class overlap on the test embeddings.
pub fn evaluate_embeddings(
    cfg: &RunConfig,
    train: (&[Vec<f64>], &[Label]),
    test: (&[Vec<f64>], &[Label]),
) -> Result<Evaluation> {
    let (clf, cv) = train_classifier(train.0, train.1, cfg.seed, &classifier_config(cfg))
        .map_err(|e| e.at_stage("train_classifier"))?;
    let pred = clf.predict_all(test.0).map_err(|e| e.at_stage("evaluate"))?;
    let counts = ConfusionCounts::from_predictions(&pred, test.1, cv.positive_label)?;
    let p = prf(&counts);
    let overlap = overlap_report(test.0, test.1, cfg.k, cfg.overlap_distance)
        .map_err(|e| e.at_stage("overlap"))?;
    Ok(Evaluation {
        test: TestMetrics {
            counts,
            precision: p.precision,
            recall: p.recall,
            f1: p.f1,
        },
        overlap,
        classifier: cv,
    })
}

pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let source = DataSource::from_config(cfg).map_err(|e| e.at_stage("load_data"))?;
    let (train, test) = source
        .for_seed(cfg.seed, cfg.test_frac)
        .map_err(|e| e.at_stage("split"))?;
    run_experiment_on(cfg, &train, &test)
}

pub fn run_experiment_on(cfg: &RunConfig, train: &Dataset, test: &Dataset) -> Result<RunOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let trained = train_encoder(train, cfg).map_err(|e| e.at_stage("train_encoder"))?;
    let train_embeddings =
        embed_dataset(&trained.state, train).map_err(|e| e.at_stage("embed_train"))?;
    let test_embeddings =
        embed_dataset(&trained.state, test).map_err(|e| e.at_stage("embed_test"))?;
    let (train_labels, test_labels) = (train.labels(), test.labels());
    let evaluation = evaluate_embeddings(
        cfg,
        (&train_embeddings, &train_labels),
        (&test_embeddings, &test_labels),
    )?;
    let final_loss = trained
        .epochs
        .last()
        .map(|e| e.loss)
        .ok_or_else(|| Error::Config("no epochs were run".into()))?;
    let report = RunReport {
        config: cfg.clone(),
        dataset: DatasetSummary {
            name: train.name.clone(),
            train_size: train.len(),
            test_size: test.len(),
            minority_label: train.minority_label(),
            train_imbalance_ratio: train.imbalance_ratio(),
            test_imbalance_ratio: test.imbalance_ratio(),
        },
        epochs: trained.epochs,
        final_loss,
        evaluation,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(RunOutcome {
        report,
        steps: trained.steps,
        encoder: trained.state,
        train_embeddings,
        test_embeddings,
        train_labels,
        test_labels,
    })
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    dataset: &'a str,
    seed: u64,
    c: f64,
    distance: String,
    precision: f64,
    recall: f64,
    f1: f64,
    si: f64,
    kdn: f64,
    k: usize,
}

/// Writes run_report.json, training_log.csv, metrics.csv,
/// embeddings_{train,test}.csv, projection.csv and encoder.json into `dir`.
pub fn write_run_outputs(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let r = &outcome.report;
    io::write_json(&dir.join("run_report.json"), r)?;
    io::write_training_log(&dir.join("training_log.csv"), &outcome.steps)?;
    io::write_rows(
        &dir.join("metrics.csv"),
        &[MetricsRow {
            dataset: &r.dataset.name,
            seed: r.config.seed,
            c: r.config.c,
            distance: r.evaluation.overlap.distance.to_string(),
            precision: r.evaluation.test.precision,
            recall: r.evaluation.test.recall,
            f1: r.evaluation.test.f1,
            si: r.evaluation.overlap.si,
            kdn: r.evaluation.overlap.kdn,
            k: r.evaluation.overlap.k,
        }],
    )?;
    io::write_embeddings(
        &dir.join("embeddings_train.csv"),
        &outcome.train_embeddings,
        &outcome.train_labels,
    )?;
    io::write_embeddings(
        &dir.join("embeddings_test.csv"),
        &outcome.test_embeddings,
        &outcome.test_labels,
    )?;
    let projection = pca_project(&outcome.test_embeddings, 2)?;
    io::write_projection(&dir.join("projection.csv"), &projection, &outcome.test_labels)?;
    write_checkpoint(&outcome.encoder, &dir.join("encoder.json"))
}
