use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distances::DistanceKind;
use crate::error::{Error, Result};

/// Every knob of one experiment. Serialised flat, so a config file is a list
/// of `key = value` lines (TOML) with the same names as the CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Weight of the contrastive loss; `1 - c` weights reconstruction.
    pub c: f64,
    pub distance: DistanceKind,
    /// Documents sampled per class for each contrastive step.
    pub n: usize,
    /// Noisy documents per reconstruction step.
    pub recon_batch: usize,
    pub epochs: usize,
    pub lr: f64,
    pub deletion_ratio: f64,
    pub feat_dim: usize,
    pub emb_dim: usize,
    pub seed: u64,
    /// Training corpus, or the whole corpus when `test_corpus` is absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_corpus: Option<PathBuf>,
    /// Held-out fraction when splitting a single corpus.
    pub test_frac: f64,
    /// Neighbourhood size for kDN.
    pub k: usize,
    /// Distance used by the overlap metrics.
    pub overlap_distance: DistanceKind,
    pub cv_folds: usize,
    pub clf_epochs: usize,
    pub clf_lr: f64,
    pub clf_batch: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            c: 0.5,
            distance: DistanceKind::Euclidean,
            n: 3,
            recon_batch: 3,
            epochs: 5,
            lr: 1e-3,
            deletion_ratio: 0.6,
            feat_dim: 1024,
            emb_dim: 64,
            seed: 0,
            corpus: None,
            test_corpus: None,
            test_frac: 0.2,
            k: 5,
            overlap_distance: DistanceKind::Euclidean,
            cv_folds: 5,
            clf_epochs: 60,
            clf_lr: 3e-3,
            clf_batch: 32,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.c) {
            return fail(format!("c must lie in [0, 1], got {}", self.c));
        }
        if self.n == 0 || self.recon_batch == 0 || self.epochs == 0 {
            return fail("n, recon_batch and epochs must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.clf_lr > 0.0 && self.clf_lr.is_finite()) {
            return fail("learning rates must be positive".into());
        }
        if !(0.0..1.0).contains(&self.deletion_ratio) {
            return fail(format!("deletion_ratio must lie in [0, 1), got {}", self.deletion_ratio));
        }
        if self.feat_dim == 0 || self.emb_dim == 0 {
            return fail("feat_dim and emb_dim must be positive".into());
        }
        if !(self.test_frac > 0.0 && self.test_frac < 1.0) {
            return fail(format!("test_frac must lie in (0, 1), got {}", self.test_frac));
        }
        if self.k == 0 {
            return fail("k must be positive".into());
        }
        if self.cv_folds < 2 || self.clf_epochs == 0 || self.clf_batch == 0 {
            return fail("cv_folds must be >= 2; clf_epochs and clf_batch positive".into());
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig always serialises")
    }

    /// `key=value` lines, one per field, in declaration order.
    pub fn summary_lines(&self) -> String {
        let value = serde_json::to_value(self).expect("RunConfig always serialises");
        let mut out = String::new();
        if let serde_json::Value::Object(map) = value {
            for (k, v) in map {
                let v = match v {
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                };
                writeln!(out, "config.{k}={v}").unwrap();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n, 3);
        assert_eq!(cfg.recon_batch, 3);
        assert_eq!(cfg.epochs, 5);
        let back = RunConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        let with_paths = RunConfig {
            corpus: Some("a/b.jsonl".into()),
            c: 0.3,
            distance: DistanceKind::Cosine,
            ..cfg
        };
        assert_eq!(RunConfig::from_toml_str(&with_paths.to_toml()).unwrap(), with_paths);
    }

    #[test]
    fn partial_files_fill_defaults_and_unknown_keys_fail() {
        let cfg = RunConfig::from_toml_str("c = 0.25\ndistance = \"chebyshev\"\n").unwrap();
        assert_eq!(cfg.c, 0.25);
        assert_eq!(cfg.distance, DistanceKind::Chebyshev);
        assert_eq!(cfg.emb_dim, 64);
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
        assert!(RunConfig::from_toml_str("distance = \"manhattan\"").is_err());
    }

    #[test]
    fn validation_rejects_out_of_range_values() {
        for bad in [
            RunConfig { c: 1.5, ..Default::default() },
            RunConfig { n: 0, ..Default::default() },
            RunConfig { deletion_ratio: 1.0, ..Default::default() },
            RunConfig { lr: 0.0, ..Default::default() },
            RunConfig { test_frac: 0.0, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn summary_has_one_line_per_field() {
        let s = RunConfig::default().summary_lines();
        assert!(s.contains("config.c=0.5\n"));
        assert!(s.contains("config.distance=euclidean\n"));
        assert_eq!(s.lines().count(), 17);
    }
}
