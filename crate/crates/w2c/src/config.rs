//! Run configuration: JSON file, then command-line overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use w2c_core::akn::DEFAULT_SHRINK_RATE;
use w2c_core::contextspace::DEFAULT_RESTARTS;
use w2c_core::corpus::{TaskKind, TokenizeMode};

use crate::error::{Result, W2cError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Sentiment,
    Correction,
}

impl From<Task> for TaskKind {
    fn from(t: Task) -> Self {
        match t {
            Task::Sentiment => TaskKind::Sentiment,
            Task::Correction => TaskKind::Correction,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Tokenizer {
    #[default]
    Cjk,
    Whitespace,
}

impl From<Tokenizer> for TokenizeMode {
    fn from(t: Tokenizer) -> Self {
        match t {
            Tokenizer::Cjk => TokenizeMode::Cjk,
            Tokenizer::Whitespace => TokenizeMode::Whitespace,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EncoderSource {
    /// Built-in toy encoder, fine-tuned and checkpointed by `train-mapper`.
    #[default]
    Toy,
    /// Precomputed W2CE feature files.
    File,
}

/// Every hyperparameter of a run. Unset `k` and `downstream_epochs` take
/// task-specific defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub task: Task,
    pub tokenizer: Tokenizer,
    pub min_count: usize,
    pub shrink_rate: f64,
    pub encoder: EncoderSource,
    /// Toy encoder hidden size.
    pub hidden: usize,
    pub n: usize,
    pub k: Option<usize>,
    pub encoder_epochs: usize,
    pub encoder_lr: f64,
    pub mapper_epochs: usize,
    pub mapper_lr: f64,
    pub downstream_epochs: Option<usize>,
    pub downstream_lr: f64,
    pub kmeans_max_iter: usize,
    pub kmeans_restarts: usize,
    /// Cap on word elements fed to k-means, taken in corpus order.
    pub kmeans_max_elements: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            task: Task::Sentiment,
            tokenizer: Tokenizer::Cjk,
            min_count: 1,
            shrink_rate: DEFAULT_SHRINK_RATE,
            encoder: EncoderSource::Toy,
            hidden: 32,
            n: 50,
            k: None,
            encoder_epochs: 1,
            encoder_lr: 1e-2,
            mapper_epochs: 3,
            mapper_lr: 1e-2,
            downstream_epochs: None,
            downstream_lr: 1e-5,
            kmeans_max_iter: 100,
            kmeans_restarts: DEFAULT_RESTARTS,
            kmeans_max_elements: 200_000,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| W2cError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| W2cError::Json { path: path.to_path_buf(), source })
    }

    /// Fills task-dependent defaults and checks ranges.
    pub fn resolved(mut self) -> Result<Self> {
        let (k, epochs) = match self.task {
            Task::Sentiment => (800, 3),
            Task::Correction => (1000, 10),
        };
        self.k.get_or_insert(k);
        self.downstream_epochs.get_or_insert(epochs);
        self.validate()?;
        Ok(self)
    }

    pub fn contexts(&self) -> usize {
        self.k.unwrap_or(2)
    }

    pub fn epochs(&self) -> usize {
        self.downstream_epochs.unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(W2cError::Config(m));
        if self.n < 2 {
            return fail(format!("n must be at least 2, got {}", self.n));
        }
        if self.contexts() < 2 {
            return fail(format!("k must be at least 2, got {}", self.contexts()));
        }
        if !(self.shrink_rate > 0.0 && self.shrink_rate <= 1.0) {
            return fail(format!("shrink rate must lie in (0, 1], got {}", self.shrink_rate));
        }
        if self.hidden == 0 {
            return fail("hidden size must be positive".into());
        }
        for (name, lr) in [("encoder", self.encoder_lr), ("mapper", self.mapper_lr), ("downstream", self.downstream_lr)] {
            if !(lr.is_finite() && lr >= 0.0) {
                return fail(format!("{name} learning rate must be finite and nonnegative, got {lr}"));
            }
        }
        if self.kmeans_restarts == 0 || self.kmeans_max_iter == 0 || self.kmeans_max_elements == 0 {
            return fail("k-means restarts, iterations and element cap must be positive".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain struct")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_by_task() {
        let c = RunConfig::default().resolved().unwrap();
        assert_eq!((c.contexts(), c.epochs(), c.n), (800, 3, 50));
        let c = RunConfig { task: Task::Correction, ..Default::default() }.resolved().unwrap();
        assert_eq!((c.contexts(), c.epochs()), (1000, 10));
        assert_eq!(c.shrink_rate, 0.95);
        assert_eq!(c.downstream_lr, 1e-5);
    }

    #[test]
    fn json_round_trip_and_partial_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 4, "n": 8, "k": 4, "tokenizer": "whitespace"}"#).unwrap();
        let c = RunConfig::load(&p).unwrap().resolved().unwrap();
        assert_eq!((c.seed, c.n, c.contexts(), c.tokenizer), (4, 8, 4, Tokenizer::Whitespace));
        let back: RunConfig = serde_json::from_value(c.to_json()).unwrap();
        assert_eq!(back, c);
        std::fs::write(&p, r#"{"sede": 4}"#).unwrap();
        assert!(matches!(RunConfig::load(&p), Err(W2cError::Json { .. })));
    }

    #[test]
    fn range_checks() {
        for bad in [
            RunConfig { n: 1, ..Default::default() },
            RunConfig { k: Some(1), ..Default::default() },
            RunConfig { shrink_rate: 0.0, ..Default::default() },
            RunConfig { shrink_rate: 1.5, ..Default::default() },
            RunConfig { mapper_lr: f64::NAN, ..Default::default() },
        ] {
            assert!(matches!(bad.resolved(), Err(W2cError::Config(_))));
        }
    }
}
