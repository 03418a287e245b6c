//! Command-line front end. Every command prints its resolved configuration
//! as `key=value` lines before doing any work and finishes with grep-able
//! summary lines.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::data::{write_synthetic, SynthSpec};
use crate::distances::DistanceKind;
use crate::error::{Error, Result};
use crate::metrics::{overlap_report, pca_project};
use crate::net::read_checkpoint;
use crate::pipeline::{
    embed_dataset, evaluate_embeddings, io, run_experiment, sweep_c, write_run_outputs,
    write_sweep_outputs, DataSource, RunConfig,
};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "CAROL_OUTPUT_ROOT";

#[derive(Debug, Parser)]
#[command(name = "carol", version, about = "Class-aware contrastive autoencoder experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic imbalanced corpus.
    GenSynth(GenSynthArgs),
    /// Train an encoder, classify its embeddings and write a run report.
    Train(TrainArgs),
    /// Evaluate a saved encoder checkpoint.
    Evaluate(EvaluateArgs),
    /// Sweep the contrastive weight c over several seeds.
    SweepC(SweepArgs),
    /// Separability index and kDN of an embeddings CSV.
    Overlap(OverlapArgs),
    /// 2D PCA projection of an embeddings CSV.
    Project(ProjectArgs),
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    #[arg(long, default_value_t = SynthSpec::default().n_minority)]
    pub n_minority: usize,
    #[arg(long, default_value_t = SynthSpec::default().imbalance_ratio)]
    pub imbalance_ratio: f64,
    #[arg(long, default_value_t = SynthSpec::default().overlap)]
    pub overlap: f64,
    #[arg(long, default_value_t = SynthSpec::default().vocab_size)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = SynthSpec::default().doc_len)]
    pub doc_len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
}

/// Experiment settings shared by train, evaluate and sweep-c. Flag names
/// match the config-file keys.
#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// Flat TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub distance: Option<DistanceKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub recon_batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub deletion_ratio: Option<f64>,
    #[arg(long)]
    pub feat_dim: Option<usize>,
    #[arg(long)]
    pub emb_dim: Option<usize>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub test_corpus: Option<PathBuf>,
    #[arg(long)]
    pub test_frac: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub overlap_distance: Option<DistanceKind>,
    #[arg(long)]
    pub cv_folds: Option<usize>,
    #[arg(long)]
    pub clf_epochs: Option<usize>,
    #[arg(long)]
    pub clf_lr: Option<f64>,
    #[arg(long)]
    pub clf_batch: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long = "c", value_delimiter = ',', required = true)]
    pub c_values: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<u64>,
    /// Sweep cells run concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = DistanceKind::Euclidean)]
    pub distance: DistanceKind,
    /// Key columns for the emitted row.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(short = 'o', long)]
    pub out: Option<PathBuf>,
}

impl clap::builder::ValueParserFactory for DistanceKind {
    type Parser = clap::builder::ValueParser;

    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<DistanceKind>().map_err(|e| e.to_string()))
    }
}

impl RunArgs {
    /// Defaults, then the config file, then explicit flags.
    pub fn resolve(&self, c: Option<f64>, seed: Option<u64>) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$field = v; })*
            };
        }
        apply!(
            distance, n, recon_batch, epochs, lr, deletion_ratio, feat_dim, emb_dim, test_frac, k,
            overlap_distance, cv_folds, clf_epochs, clf_lr, clf_batch
        );
        if let Some(p) = &self.corpus {
            cfg.corpus = Some(p.clone());
        }
        if let Some(p) = &self.test_corpus {
            cfg.test_corpus = Some(p.clone());
        }
        if let Some(c) = c {
            cfg.c = c;
        }
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output_dir(explicit: &Option<PathBuf>, command: &str) -> PathBuf {
    explicit.clone().unwrap_or_else(|| {
        std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("carol_out"))
            .join(command)
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn say(out: &mut dyn Write, text: impl AsRef<str>) -> Result<()> {
    out.write_all(text.as_ref().as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn write_config(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let path = dir.join("config.toml");
    std::fs::write(&path, cfg.to_toml()).map_err(|e| Error::io(&path, e))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::GenSynth(a) => gen_synth(a, out),
        Command::Train(a) => train(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::SweepC(a) => sweep(a, out),
        Command::Overlap(a) => overlap(a, out),
        Command::Project(a) => project(a, out),
    }
}

fn gen_synth(a: GenSynthArgs, out: &mut dyn Write) -> Result<()> {
    let spec = SynthSpec {
        n_minority: a.n_minority,
        imbalance_ratio: a.imbalance_ratio,
        overlap: a.overlap,
        vocab_size: a.vocab_size,
        doc_len: a.doc_len,
        seed: a.seed,
    };
    let dir = output_dir(&a.out, "gen-synth");
    say(out, "command=gen-synth\n")?;
    for (k, v) in [
        ("n_minority", spec.n_minority.to_string()),
        ("imbalance_ratio", spec.imbalance_ratio.to_string()),
        ("overlap", spec.overlap.to_string()),
        ("vocab_size", spec.vocab_size.to_string()),
        ("doc_len", spec.doc_len.to_string()),
        ("seed", spec.seed.to_string()),
        ("out", dir.display().to_string()),
    ] {
        say(out, format!("config.{k}={v}\n"))?;
    }
    spec.validate()?;
    let (corpus, _) = write_synthetic(&spec, &dir)?;
    let n_major = spec.n_majority();
    say(
        out,
        format!(
            "corpus={}\ndocuments={}\nminority={}\nmajority={}\nimbalance_ratio={}\n",
            corpus.display(),
            spec.n_minority + n_major,
            spec.n_minority,
            n_major,
            n_major as f64 / spec.n_minority as f64
        ),
    )
}

fn train(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.run.resolve(a.c, a.seed)?;
    let dir = output_dir(&a.out, "train");
    say(out, format!("command=train\nout={}\n", dir.display()))?;
    say(out, cfg.summary_lines())?;
    let outcome = run_experiment(&cfg)?;
    create_dir(&dir)?;
    write_config(&cfg, &dir)?;
    write_run_outputs(&outcome, &dir)?;
    let r = &outcome.report;
    let e = &r.evaluation;
    say(
        out,
        format!(
            "f1={}\nprecision={}\nrecall={}\nsi={}\nkdn={}\nfinal_carol={}\nfinal_recon={}\nfinal_total={}\nhidden={}\nwall_clock_s={:.3}\n",
            e.test.f1,
            e.test.precision,
            e.test.recall,
            e.overlap.si,
            e.overlap.kdn,
            r.final_loss.carol,
            r.final_loss.recon,
            r.final_loss.total,
            e.classifier.chosen_hidden,
            r.wall_clock_seconds
        ),
    )
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.run.resolve(a.c, a.seed)?;
    let dir = output_dir(&a.out, "evaluate");
    say(
        out,
        format!("command=evaluate\ncheckpoint={}\nout={}\n", a.checkpoint.display(), dir.display()),
    )?;
    say(out, cfg.summary_lines())?;
    let state = read_checkpoint(&a.checkpoint).map_err(|e| e.at_stage("load_checkpoint"))?;
    if state.feat_dim() != cfg.feat_dim {
        return Err(Error::Config(format!(
            "checkpoint expects feat_dim {} but the config says {}",
            state.feat_dim(),
            cfg.feat_dim
        )));
    }
    let source = DataSource::from_config(&cfg).map_err(|e| e.at_stage("load_data"))?;
    let (train, test) = source.for_seed(cfg.seed, cfg.test_frac).map_err(|e| e.at_stage("split"))?;
    let train_emb = embed_dataset(&state, &train).map_err(|e| e.at_stage("embed_train"))?;
    let test_emb = embed_dataset(&state, &test).map_err(|e| e.at_stage("embed_test"))?;
    let (train_labels, test_labels) = (train.labels(), test.labels());
    let eval = evaluate_embeddings(&cfg, (&train_emb, &train_labels), (&test_emb, &test_labels))?;

    create_dir(&dir)?;
    write_config(&cfg, &dir)?;
    #[derive(Serialize)]
    struct EvalReport<'a> {
        config: &'a RunConfig,
        checkpoint: String,
        #[serde(flatten)]
        evaluation: &'a crate::pipeline::Evaluation,
    }
    io::write_json(
        &dir.join("eval_report.json"),
        &EvalReport {
            config: &cfg,
            checkpoint: a.checkpoint.display().to_string(),
            evaluation: &eval,
        },
    )?;
    io::write_embeddings(&dir.join("embeddings_train.csv"), &train_emb, &train_labels)?;
    io::write_embeddings(&dir.join("embeddings_test.csv"), &test_emb, &test_labels)?;
    let projection = pca_project(&test_emb, 2)?;
    io::write_projection(&dir.join("projection.csv"), &projection, &test_labels)?;
    say(
        out,
        format!(
            "f1={}\nprecision={}\nrecall={}\nsi={}\nkdn={}\nhidden={}\n",
            eval.test.f1,
            eval.test.precision,
            eval.test.recall,
            eval.overlap.si,
            eval.overlap.kdn,
            eval.classifier.chosen_hidden
        ),
    )
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn sweep(a: SweepArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.run.resolve(None, None)?;
    if let Some(c) = a.c_values.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::Config(format!("c values must lie in [0, 1], got {c}")));
    }
    if a.jobs == 0 {
        return Err(Error::Config("--jobs must be positive".into()));
    }
    let dir = output_dir(&a.out, "sweep-c");
    say(
        out,
        format!(
            "command=sweep-c\nout={}\nsweep.c={}\nsweep.seeds={}\nsweep.jobs={}\n",
            dir.display(),
            join(&a.c_values),
            join(&a.seeds),
            a.jobs
        ),
    )?;
    say(out, cfg.summary_lines())?;
    let started = Instant::now();
    let table = sweep_c(&cfg, &a.c_values, &a.seeds, a.jobs)?;
    create_dir(&dir)?;
    write_config(&cfg, &dir)?;
    write_sweep_outputs(&table, &dir)?;
    for m in &table.means {
        say(
            out,
            format!(
                "mean c={} runs={} failed={} f1={} si={} kdn={} final_carol={} final_recon={}\n",
                m.c, m.runs, m.failed, m.f1, m.si, m.kdn, m.final_carol, m.final_recon
            ),
        )?;
    }
    let best = table.best_c.map_or("none".to_string(), |c| c.to_string());
    say(
        out,
        format!(
            "cells={}\nbest_c={best}\nselection=oracle\nwall_clock_s={:.3}\n",
            table.cells.len(),
            started.elapsed().as_secs_f64()
        ),
    )
}

#[derive(Serialize)]
struct OverlapRow {
    dataset: String,
    seed: String,
    c: String,
    distance: String,
    si: f64,
    kdn: f64,
    k: usize,
}

fn overlap(a: OverlapArgs, out: &mut dyn Write) -> Result<()> {
    let dir = output_dir(&a.out, "overlap");
    say(
        out,
        format!(
            "command=overlap\nconfig.embeddings={}\nconfig.k={}\nconfig.distance={}\nout={}\n",
            a.embeddings.display(),
            a.k,
            a.distance,
            dir.display()
        ),
    )?;
    let (emb, labels) = io::read_embeddings(&a.embeddings)?;
    let report = overlap_report(&emb, &labels, a.k, a.distance)?;
    create_dir(&dir)?;
    let dataset = a.dataset.clone().unwrap_or_else(|| {
        a.embeddings
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    io::write_rows(
        &dir.join("overlap.csv"),
        &[OverlapRow {
            dataset,
            seed: a.seed.map(|s| s.to_string()).unwrap_or_default(),
            c: a.c.map(|c| c.to_string()).unwrap_or_default(),
            distance: a.distance.to_string(),
            si: report.si,
            kdn: report.kdn,
            k: report.k,
        }],
    )?;
    say(out, format!("points={}\nsi={}\nkdn={}\n", emb.len(), report.si, report.kdn))
}

fn project(a: ProjectArgs, out: &mut dyn Write) -> Result<()> {
    let dir = output_dir(&a.out, "project");
    say(
        out,
        format!(
            "command=project\nconfig.embeddings={}\nout={}\n",
            a.embeddings.display(),
            dir.display()
        ),
    )?;
    let (emb, labels) = io::read_embeddings(&a.embeddings)?;
    let projection = pca_project(&emb, 2)?;
    create_dir(&dir)?;
    io::write_projection(&dir.join("projection.csv"), &projection, &labels)?;
    say(
        out,
        format!(
            "points={}\ncomponents={}\neigenvalues={}\n",
            emb.len(),
            projection.components.len(),
            join(&projection.eigenvalues)
        ),
    )?;
    if projection.is_degenerate() {
        say(out, "warning=degenerate data: fewer than 2 principal components\n")?;
    }
    Ok(())
}
