mod common;

use std::time::Instant;

use carol::data::{gen_synthetic, stratified_split, SynthSpec};
use carol::metrics::{prf, ConfusionCounts};
use carol::pipeline::{
    embed_dataset, run_experiment_on, sweep_c_on, train_classifier, train_encoder, ClassifierConfig, DataSource,
    RunConfig, HIDDEN_WIDTHS,
};
use common::*;
use rand::Rng;

#[test]
fn zero_c_total_is_the_recon_column() {
    let ds = small_dataset(0.5, 1);
    let trained = train_encoder(&ds, &small_config(0.0, 3)).unwrap();
    assert!(!trained.steps.is_empty());
    for s in &trained.steps {
        assert_eq!(s.loss.total.to_bits(), s.loss.recon.to_bits(), "step {}", s.step);
    }
}

#[test]
fn total_is_affine_in_c_at_every_step() {
    let ds = small_dataset(0.5, 1);
    for c in [0.25, 0.5, 0.9] {
        let trained = train_encoder(&ds, &small_config(c, 4)).unwrap();
        for s in &trained.steps {
            let expected = c * s.loss.carol + (1.0 - c) * s.loss.recon;
            assert!((s.loss.total - expected).abs() <= 1e-12 * expected.abs().max(1.0));
            assert_eq!(s.loss.c, c);
        }
    }
}

#[test]
fn full_contrastive_weight_ignores_deletion_noise() {
    let ds = small_dataset(0.5, 2);
    let a = train_encoder(&ds, &RunConfig { deletion_ratio: 0.1, ..small_config(1.0, 5) }).unwrap();
    let b = train_encoder(&ds, &RunConfig { deletion_ratio: 0.9, ..small_config(1.0, 5) }).unwrap();
    assert_eq!(embed_dataset(&a.state, &ds).unwrap(), embed_dataset(&b.state, &ds).unwrap());
    let carol_a: Vec<f64> = a.steps.iter().map(|s| s.loss.carol).collect();
    let carol_b: Vec<f64> = b.steps.iter().map(|s| s.loss.carol).collect();
    assert_eq!(carol_a, carol_b);
}

#[test]
fn training_is_deterministic_and_seed_sensitive() {
    let ds = small_dataset(0.5, 3);
    let a = train_encoder(&ds, &small_config(0.5, 6)).unwrap();
    let b = train_encoder(&ds, &small_config(0.5, 6)).unwrap();
    let c = train_encoder(&ds, &small_config(0.5, 7)).unwrap();
    assert_eq!(a.steps, b.steps);
    assert_eq!(embed_dataset(&a.state, &ds).unwrap(), embed_dataset(&b.state, &ds).unwrap());
    assert_ne!(a.steps, c.steps);
}

#[test]
fn step_log_covers_every_batch() {
    let ds = small_dataset(0.5, 3);
    let cfg = small_config(0.5, 1);
    let trained = train_encoder(&ds, &cfg).unwrap();
    let per_epoch = ds.len().div_ceil(cfg.recon_batch);
    assert_eq!(trained.steps.len(), cfg.epochs * per_epoch);
    assert_eq!(trained.epochs.len(), cfg.epochs);
    assert_eq!(trained.state.step_count(), trained.steps.len() as u64);
}

#[test]
fn embeddings_have_one_bounded_row_per_document() {
    let ds = small_dataset(0.5, 4);
    let cfg = small_config(0.5, 2);
    let trained = train_encoder(&ds, &cfg).unwrap();
    let emb = embed_dataset(&trained.state, &ds).unwrap();
    assert_eq!(emb.len(), ds.len());
    for row in &emb {
        assert_eq!(row.len(), cfg.emb_dim);
        assert!(row.iter().all(|v| v.is_finite() && v.abs() < 1.0));
    }
    let (first, _) = trained.state.encode(&ds.docs()[0].features).unwrap();
    assert_eq!(first, emb[0]);
}

fn classifier_cfg() -> ClassifierConfig {
    ClassifierConfig { folds: 3, epochs: 30, lr: 3e-3, batch: 16 }
}

#[test]
fn classifier_separates_separable_points() {
    let mut r = rng(11);
    let make = |r: &mut rand_chacha::ChaCha8Rng, count: usize| {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..count {
            let label = u8::from(i % 4 == 0);
            let centre = if label == 1 { 2.0 } else { -2.0 };
            x.push((0..6).map(|_| centre + r.gen_range(-0.5..0.5)).collect::<Vec<f64>>());
            y.push(label);
        }
        (x, y)
    };
    let (xtr, ytr) = make(&mut r, 120);
    let (xte, yte) = make(&mut r, 80);
    let (clf, cv) = train_classifier(&xtr, &ytr, 1, &classifier_cfg()).unwrap();
    assert!(HIDDEN_WIDTHS.contains(&cv.chosen_hidden));
    assert_eq!(cv.rows.len(), HIDDEN_WIDTHS.len());
    let pred = clf.predict_all(&xte).unwrap();
    let p = prf(&ConfusionCounts::from_predictions(&pred, &yte, 1).unwrap());
    assert_eq!(p.f1, 1.0);
}

#[test]
fn classifier_on_random_labels_stays_near_chance() {
    let mut r = rng(12);
    let xtr = random_points(&mut r, 200, 8);
    let ytr = random_labels(&mut r, 200);
    let xte = random_points(&mut r, 400, 8);
    let yte = random_labels(&mut r, 400);
    let (clf, _) = train_classifier(&xtr, &ytr, 2, &classifier_cfg()).unwrap();
    let pred = clf.predict_all(&xte).unwrap();
    let correct = pred.iter().zip(&yte).filter(|(a, b)| a == b).count();
    let accuracy = correct as f64 / yte.len() as f64;
    assert!((0.4..=0.6).contains(&accuracy), "accuracy {accuracy}");
}

#[test]
fn classifier_reduces_folds_when_minority_is_tiny() {
    let mut r = rng(13);
    let x = random_points(&mut r, 40, 4);
    let mut y = vec![0u8; 40];
    y[3] = 1;
    y[17] = 1;
    y[29] = 1;
    let (_, cv) = train_classifier(&x, &y, 3, &ClassifierConfig { folds: 5, ..classifier_cfg() }).unwrap();
    assert_eq!(cv.folds, 3);
    assert!(cv.warning.is_some());
}

#[test]
fn singleton_sweep_matches_run_experiment() {
    let ds = small_dataset(0.5, 5);
    let cfg = small_config(0.5, 9);
    let table = sweep_c_on(&cfg, &[0.5], &[9], 1, &DataSource::Split(ds.clone())).unwrap();
    let (train, test) = stratified_split(&ds, cfg.test_frac, 9).unwrap();
    let report = run_experiment_on(&cfg, &train, &test).unwrap().report;
    let cell = &table.cells[0];
    assert!(cell.is_ok(), "{}", cell.error);
    assert_eq!(cell.f1, report.evaluation.test.f1);
    assert_eq!(cell.si, report.evaluation.overlap.si);
    assert_eq!(cell.kdn, report.evaluation.overlap.kdn);
    assert_eq!(cell.final_carol, report.final_loss.carol);
    assert_eq!(cell.final_recon, report.final_loss.recon);
    assert_eq!(table.best_c, Some(0.5));
}

#[test]
fn sweep_records_failed_cells_and_continues() {
    let ds = small_dataset(0.5, 5);
    let mut cfg = small_config(0.5, 1);
    cfg.epochs = 1;
    let ok = sweep_c_on(&cfg, &[0.0, 0.5], &[1, 2], 2, &DataSource::Split(ds.clone())).unwrap();
    assert_eq!(ok.cells.len(), 4);
    assert!(ok.cells.iter().all(|c| c.is_ok()));
    let keys: Vec<(f64, u64)> = ok.cells.iter().map(|c| (c.c, c.seed)).collect();
    assert_eq!(keys, vec![(0.0, 1), (0.0, 2), (0.5, 1), (0.5, 2)]);

    // A three-document test split cannot host k = 5 neighbours.
    let tiny = gen_synthetic(&SynthSpec { n_minority: 4, ..small_spec(0.5, 1) }, SMALL_FEAT_DIM).unwrap();
    let table = sweep_c_on(&cfg, &[0.0, 1.0], &[1], 1, &DataSource::Split(tiny)).unwrap();
    assert_eq!(table.cells.len(), 2);
    for cell in &table.cells {
        assert!(!cell.is_ok());
        assert!(cell.f1.is_nan());
        assert!(cell.error.starts_with("overlap"), "{}", cell.error);
    }
    assert_eq!(table.best_c, None);
}

#[test]
fn default_desk_scale_run_fits_the_time_budget() {
    let cfg = RunConfig::default();
    let ds = gen_synthetic(&SynthSpec::default(), cfg.feat_dim).unwrap();
    let (train, test) = stratified_split(&ds, cfg.test_frac, cfg.seed).unwrap();
    assert!(train.len() <= 2000);
    let started = Instant::now();
    let outcome = run_experiment_on(&cfg, &train, &test).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "{elapsed:.1}s");
    assert!(outcome.encoder.net.is_finite());
}
