//! Seeded random search over a fixed hyperparameter grid, scored on a
//! validation split.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FitConfig, Gbdt, Result, SurrogateError};
use crate::metrics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneGrid {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub min_samples_leaf: Vec<usize>,
    pub subsample_rows: Vec<f64>,
    pub subsample_features: Vec<f64>,
}

impl Default for TuneGrid {
    fn default() -> Self {
        Self {
            n_trees: vec![100, 300, 1000],
            max_depth: vec![3, 5, 7, 9],
            learning_rate: vec![0.03, 0.1, 0.3],
            min_samples_leaf: vec![1, 5, 20],
            subsample_rows: vec![0.7, 1.0],
            subsample_features: vec![0.7, 1.0],
        }
    }
}

impl TuneGrid {
    pub fn len(&self) -> usize {
        self.n_trees.len()
            * self.max_depth.len()
            * self.learning_rate.len()
            * self.min_samples_leaf.len()
            * self.subsample_rows.len()
            * self.subsample_features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `i`-th grid point in row-major order (last list fastest).
    pub fn config(&self, mut i: usize, seed: u64) -> FitConfig {
        let mut pick = |len: usize| {
            let v = i % len;
            i /= len;
            v
        };
        let sf = pick(self.subsample_features.len());
        let sr = pick(self.subsample_rows.len());
        let leaf = pick(self.min_samples_leaf.len());
        let lr = pick(self.learning_rate.len());
        let depth = pick(self.max_depth.len());
        let trees = pick(self.n_trees.len());
        FitConfig {
            n_trees: self.n_trees[trees],
            max_depth: self.max_depth[depth],
            learning_rate: self.learning_rate[lr],
            min_samples_leaf: self.min_samples_leaf[leaf],
            subsample_rows: self.subsample_rows[sr],
            subsample_features: self.subsample_features[sf],
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneTrial {
    pub draw: usize,
    pub config: FitConfig,
    /// `None` when the configuration could not be fitted or scored.
    pub val_tau: Option<f64>,
    pub val_mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: FitConfig,
    pub val_tau: f64,
    pub val_mae: f64,
    pub trials: Vec<TuneTrial>,
}

/// Draws `budget` distinct grid points (capped at the grid size), fits each
/// on the training split and keeps the one with the highest validation tau;
/// ties go to lower validation MAE, then to the earlier draw.
pub fn tune<R: Rng + ?Sized>(
    train: (&[Vec<f64>], &[f64]),
    val: (&[Vec<f64>], &[f64]),
    grid: &TuneGrid,
    budget: usize,
    metric_name: &str,
    rng: &mut R,
) -> Result<TuneResult> {
    if budget == 0 {
        return Err(SurrogateError::Config(
            "tuning budget must be at least 1".into(),
        ));
    }
    if grid.is_empty() {
        return Err(SurrogateError::Config("tuning grid is empty".into()));
    }
    let draws = index::sample(rng, grid.len(), budget.min(grid.len())).into_vec();
    let configs: Vec<FitConfig> = draws
        .iter()
        .map(|&g| grid.config(g, rng.random()))
        .collect();
    let trials: Vec<TuneTrial> = configs
        .par_iter()
        .enumerate()
        .map(|(draw, config)| {
            let scored = Gbdt::fit(train.0, train.1, config, metric_name)
                .and_then(|m| m.predict_batch(val.0))
                .and_then(|pred| {
                    Ok((
                        metrics::kendall_tau(val.1, &pred)?,
                        metrics::mean_abs_error(val.1, &pred)?,
                    ))
                });
            match scored {
                Ok((tau, mae)) => TuneTrial {
                    draw,
                    config: *config,
                    val_tau: Some(tau),
                    val_mae: Some(mae),
                },
                Err(e) => {
                    log::warn!("tuning draw {draw} failed: {e}");
                    TuneTrial {
                        draw,
                        config: *config,
                        val_tau: None,
                        val_mae: None,
                    }
                }
            }
        })
        .collect();

    let mut best: Option<(&TuneTrial, f64, f64)> = None;
    for t in &trials {
        let (Some(tau), Some(mae)) = (t.val_tau, t.val_mae) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((_, bt, bm)) => tau > bt || (tau == bt && mae < bm),
        };
        if better {
            best = Some((t, tau, mae));
        }
    }
    let (b, val_tau, val_mae) =
        best.ok_or_else(|| SurrogateError::Data("no tuning draw could be scored".into()))?;
    Ok(TuneResult {
        best: b.config,
        val_tau,
        val_mae,
        trials: trials.clone(),
    })
}
