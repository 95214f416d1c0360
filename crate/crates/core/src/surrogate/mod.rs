//! Gradient-boosted regression-tree surrogates.
//!
//! Squared-error boosting: every round fits a [`RegressionTree`] to the
//! current residuals and the ensemble predicts
//! `base_score + learning_rate * sum(tree outputs)`.

mod io;
mod tree;
mod tune;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{self, MetricError};
use crate::seeded_rng;

pub use io::FORMAT_VERSION;
pub use tree::{Node, RegressionTree};
pub use tune::{tune, TuneGrid, TuneResult, TuneTrial};

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("invalid fit config: {0}")]
    Config(String),
    #[error("training data: {0}")]
    Data(String),
    #[error("feature vector has length {got}, model expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("model file i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file is truncated: {0}")]
    Truncated(String),
    #[error("model format version {found} is not supported (expected {expected})")]
    Version { found: String, expected: u32 },
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("tree {tree}, node {node}: {reason}")]
    InvalidTree {
        tree: usize,
        node: usize,
        reason: String,
    },
}

type Result<T> = std::result::Result<T, SurrogateError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub subsample_rows: f64,
    pub subsample_features: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_trees: 300,
            max_depth: 5,
            learning_rate: 0.1,
            min_samples_leaf: 5,
            subsample_rows: 1.0,
            subsample_features: 1.0,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SurrogateError::Config(m.into()));
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be at least 1");
        }
        for (name, v) in [
            ("subsample_rows", self.subsample_rows),
            ("subsample_features", self.subsample_features),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(SurrogateError::Config(format!("{name} must be in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Fitted additive tree ensemble. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Gbdt {
    pub metric_name: String,
    pub feature_dim: usize,
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

/// Test-split fit quality. `r2` and `tau` are undefined for a single record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub r2: Option<f64>,
    pub tau: Option<f64>,
    pub mae: f64,
}

impl Gbdt {
    /// Least-squares boosting on `rows` (equal-length feature vectors).
    pub fn fit(
        rows: &[Vec<f64>],
        targets: &[f64],
        config: &FitConfig,
        metric_name: impl Into<String>,
    ) -> Result<Self> {
        config.validate()?;
        let n = rows.len();
        if n != targets.len() {
            return Err(SurrogateError::Data(format!(
                "{n} feature rows but {} targets",
                targets.len()
            )));
        }
        if n == 0 || n < 2 * config.min_samples_leaf {
            return Err(SurrogateError::Data(format!(
                "{n} records; need at least {} (2 x min_samples_leaf) and at least one",
                2 * config.min_samples_leaf
            )));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(SurrogateError::Data("feature vectors are empty".into()));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(SurrogateError::Data(format!(
                "row {i} has {} features, row 0 has {dim}",
                rows[i].len()
            )));
        }
        if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
            return Err(SurrogateError::Data(format!("target {i} is not finite")));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SurrogateError::Data("non-finite feature value".into()));
        }

        let base_score = if targets.iter().all(|&t| t == targets[0]) {
            targets[0]
        } else {
            targets.iter().sum::<f64>() / n as f64
        };
        let cols = tree::Columns::new(rows, dim);
        let mut rng = seeded_rng(config.seed);
        let mut pred = vec![base_score; n];
        let mut residual = vec![0.0; n];
        let mut in_sample = vec![true; n];
        let all_features: Vec<usize> = (0..dim).collect();
        let mut trees = Vec::with_capacity(config.n_trees);

        for _ in 0..config.n_trees {
            if config.subsample_rows < 1.0 {
                let k = ((config.subsample_rows * n as f64).round() as usize).clamp(1, n);
                in_sample.iter_mut().for_each(|s| *s = false);
                for r in index::sample(&mut rng, n, k) {
                    in_sample[r] = true;
                }
            }
            let features = if config.subsample_features < 1.0 {
                let k = ((config.subsample_features * dim as f64).round() as usize).clamp(1, dim);
                let mut f = index::sample(&mut rng, dim, k).into_vec();
                f.sort_unstable();
                f
            } else {
                all_features.clone()
            };
            for r in 0..n {
                residual[r] = targets[r] - pred[r];
            }
            let t = tree::grow(
                &cols,
                &residual,
                &in_sample,
                &tree::GrowParams {
                    max_depth: config.max_depth,
                    min_samples_leaf: config.min_samples_leaf,
                    features: &features,
                },
            );
            for (r, p) in pred.iter_mut().enumerate() {
                *p += config.learning_rate * t.predict(&rows[r]);
            }
            trees.push(t);
        }

        Ok(Gbdt {
            metric_name: metric_name.into(),
            feature_dim: dim,
            base_score,
            learning_rate: config.learning_rate,
            trees,
        })
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_dim {
            return Err(SurrogateError::Dimension {
                expected: self.feature_dim,
                got: features.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(features)).sum();
        Ok(self.base_score + self.learning_rate * sum)
    }

    /// Order-preserving batch prediction.
    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.par_iter().map(|r| self.predict(r)).collect()
    }

    /// The ensemble restricted to its first `k` trees.
    pub fn truncated(&self, k: usize) -> Gbdt {
        Gbdt {
            trees: self.trees[..k.min(self.trees.len())].to_vec(),
            ..self.clone()
        }
    }

    pub fn evaluate(&self, rows: &[Vec<f64>], truth: &[f64]) -> Result<EvalReport> {
        if rows.is_empty() {
            return Err(SurrogateError::Data("evaluation split is empty".into()));
        }
        let pred = self.predict_batch(rows)?;
        evaluate_predictions(truth, &pred)
    }
}

/// R², Kendall tau and MAE of `pred` against `truth`.
pub fn evaluate_predictions(truth: &[f64], pred: &[f64]) -> Result<EvalReport> {
    let mae = metrics::mean_abs_error(truth, pred)?;
    if truth.len() == 1 {
        return Ok(EvalReport {
            r2: None,
            tau: None,
            mae,
        });
    }
    Ok(EvalReport {
        r2: Some(metrics::r_squared(truth, pred)?),
        tau: Some(metrics::kendall_tau(truth, pred)?),
        mae,
    })
}
