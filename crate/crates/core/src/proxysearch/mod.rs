//! Search for a cheap training scheme that preserves architecture rankings.
//!
//! Every candidate scheme trains the same `n` grid architectures; its score
//! is Kendall's tau between the resulting accuracies and the reference
//! scheme's, and it is admissible only if the mean training time stays within
//! the budget `t_spec`. The search returns the admissible scheme with the
//! highest tau.

pub mod oracle;
mod report;

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archspace::SpaceDef;
use crate::metrics::{self, MetricError};
use crate::Architecture;

pub use oracle::{SyntheticOracle, SyntheticOracleParams};
pub use report::{write_table_csv, SearchSummary, TABLE_HEADER};

/// Default training-time budget in GPU-hours.
pub const DEFAULT_T_SPEC: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("trainer oracle failed: {0}")]
pub struct OracleError(pub String);

impl OracleError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

#[derive(Debug, Error)]
pub enum ProxyError {
    #[error("invalid training scheme: {0}")]
    Scheme(String),
    #[error("scheme grid has no valid scheme")]
    EmptyGrid,
    #[error("{models} models but {accs} reference accuracies")]
    LengthMismatch { models: usize, accs: usize },
    #[error("need at least 2 models, got {0}")]
    TooFewModels(usize),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("no scheme meets t_p <= {t_spec} h (fastest mean time: {min_t_p} h)")]
    Infeasible { t_spec: f64, min_t_p: f64 },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Training hyperparameters `{b, e_t, e_s, e_f, res_s, res_f}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingScheme {
    pub batch_size: u32,
    pub epochs: u32,
    /// Progressive resizing starts after this epoch.
    pub resize_start: u32,
    /// Resolution reaches `res_finish` at this epoch.
    pub resize_finish: u32,
    pub res_start: u32,
    pub res_finish: u32,
}

impl TrainingScheme {
    pub fn new(
        batch_size: u32,
        epochs: u32,
        resize_start: u32,
        resize_finish: u32,
        res_start: u32,
        res_finish: u32,
    ) -> Result<Self, ProxyError> {
        let s = Self {
            batch_size,
            epochs,
            resize_start,
            resize_finish,
            res_start,
            res_finish,
        };
        s.validate()?;
        Ok(s)
    }

    /// The expensive fixed-resolution recipe proxies are ranked against.
    pub fn reference() -> Self {
        Self {
            batch_size: 256,
            epochs: 300,
            resize_start: 0,
            resize_finish: 0,
            res_start: 224,
            res_finish: 224,
        }
    }

    pub fn validate(&self) -> Result<(), ProxyError> {
        let bad = |m: &str| Err(ProxyError::Scheme(format!("{m}: {self:?}")));
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.resize_start <= self.resize_finish && self.resize_finish <= self.epochs) {
            return bad("need resize_start <= resize_finish <= epochs");
        }
        if !(0 < self.res_start && self.res_start <= self.res_finish) {
            return bad("need 0 < res_start <= res_finish");
        }
        Ok(())
    }
}

/// Candidate values per hyperparameter; the search space is their product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeGrid {
    pub batch_size: Vec<u32>,
    pub epochs: Vec<u32>,
    pub resize_start: Vec<u32>,
    pub resize_finish: Vec<u32>,
    pub res_start: Vec<u32>,
    pub res_finish: Vec<u32>,
}

impl Default for SchemeGrid {
    /// 3 x 3 x 2 x 2 x 2 x 2 = 144 combinations, 120 of them valid.
    fn default() -> Self {
        Self {
            batch_size: vec![256, 384, 512],
            epochs: vec![30, 60, 90],
            resize_start: vec![0, 10],
            resize_finish: vec![20, 40],
            res_start: vec![128, 160],
            res_finish: vec![192, 224],
        }
    }
}

impl SchemeGrid {
    /// Valid schemes in grid order (batch size outermost, `res_finish`
    /// fastest).
    pub fn schemes(&self) -> Vec<TrainingScheme> {
        let mut out = Vec::new();
        for &batch_size in &self.batch_size {
            for &epochs in &self.epochs {
                for &resize_start in &self.resize_start {
                    for &resize_finish in &self.resize_finish {
                        for &res_start in &self.res_start {
                            for &res_finish in &self.res_finish {
                                let s = TrainingScheme {
                                    batch_size,
                                    epochs,
                                    resize_start,
                                    resize_finish,
                                    res_start,
                                    res_finish,
                                };
                                if s.validate().is_ok() {
                                    out.push(s);
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOutcome {
    /// Top-1 accuracy as a fraction.
    pub accuracy: f64,
    pub train_hours: f64,
}

/// Trains (or pretends to train) one architecture under one scheme.
/// Implementations must be deterministic in `(arch, scheme, seed)` and safe
/// to call from several threads.
pub trait TrainerOracle: Sync {
    fn evaluate(
        &self,
        arch: &Architecture,
        scheme: &TrainingScheme,
        seed: u64,
    ) -> Result<TrainOutcome, OracleError>;
}

/// Stop at the first scheme (in grid order) reaching both thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlyStop {
    pub tau_min: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRecord {
    /// Position in [`SchemeGrid::schemes`].
    pub id: usize,
    pub scheme: TrainingScheme,
    pub tau: f64,
    /// Mean training hours over the grid models.
    pub t_p: f64,
    pub feasible: bool,
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxySearchResult {
    pub best: SchemeRecord,
    /// Evaluated schemes in grid order. Truncated after the stopping scheme
    /// when early stopping fired.
    pub table: Vec<SchemeRecord>,
    pub reference_accuracies: Vec<f64>,
    pub stopped_early: bool,
}

/// Accuracies of `models` under `scheme`, one run each with `seed`.
pub fn accuracies<O: TrainerOracle + ?Sized>(
    models: &[Architecture],
    scheme: &TrainingScheme,
    oracle: &O,
    seed: u64,
) -> Result<Vec<f64>, ProxyError> {
    models
        .iter()
        .map(|a| Ok(oracle.evaluate(a, scheme, seed)?.accuracy))
        .collect()
}

fn evaluate_scheme<O: TrainerOracle + ?Sized>(
    id: usize,
    scheme: &TrainingScheme,
    models: &[Architecture],
    ref_accs: &[f64],
    oracle: &O,
    t_spec: f64,
    seed: u64,
) -> Result<SchemeRecord, ProxyError> {
    let outcomes = models
        .iter()
        .map(|a| oracle.evaluate(a, scheme, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let accuracies: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
    let t_p = outcomes.iter().map(|o| o.train_hours).sum::<f64>() / outcomes.len() as f64;
    let tau = metrics::kendall_tau(&accuracies, ref_accs)?;
    Ok(SchemeRecord {
        id,
        scheme: *scheme,
        tau,
        t_p,
        feasible: t_p <= t_spec,
        accuracies,
    })
}

/// Constrained tau maximization over every valid scheme of `grid`.
///
/// Schemes are evaluated in parallel on the current rayon pool; the table
/// and the choice are independent of scheduling. Among feasible schemes the
/// highest tau wins, ties going to the smaller `t_p` and then to grid order.
#[allow(clippy::too_many_arguments)]
pub fn grid_search<O: TrainerOracle + ?Sized>(
    grid: &SchemeGrid,
    models: &[Architecture],
    ref_accs: &[f64],
    oracle: &O,
    t_spec: f64,
    early_stop: Option<EarlyStop>,
    seed: u64,
) -> Result<ProxySearchResult, ProxyError> {
    if models.len() != ref_accs.len() {
        return Err(ProxyError::LengthMismatch {
            models: models.len(),
            accs: ref_accs.len(),
        });
    }
    if models.len() < 2 {
        return Err(ProxyError::TooFewModels(models.len()));
    }
    if t_spec.is_nan() {
        return Err(ProxyError::Argument("t_spec is NaN".into()));
    }
    let schemes = grid.schemes();
    if schemes.is_empty() {
        return Err(ProxyError::EmptyGrid);
    }

    let eval =
        |id: usize| evaluate_scheme(id, &schemes[id], models, ref_accs, oracle, t_spec, seed);

    let mut table = Vec::with_capacity(schemes.len());
    let chunk = match early_stop {
        Some(_) => rayon::current_num_threads().max(1),
        None => schemes.len(),
    };
    let mut start = 0;
    while start < schemes.len() {
        let end = (start + chunk).min(schemes.len());
        let records = (start..end)
            .into_par_iter()
            .map(eval)
            .collect::<Result<Vec<_>, _>>()?;
        for rec in records {
            let stop = early_stop
                .is_some_and(|es| rec.feasible && rec.tau >= es.tau_min && rec.t_p <= es.t_max);
            table.push(rec);
            if stop {
                let best = table.last().cloned().expect("just pushed");
                return Ok(ProxySearchResult {
                    best,
                    table,
                    reference_accuracies: ref_accs.to_vec(),
                    stopped_early: true,
                });
            }
        }
        start = end;
    }

    let best = select_best(&table)
        .cloned()
        .ok_or_else(|| ProxyError::Infeasible {
            t_spec,
            min_t_p: table.iter().map(|r| r.t_p).fold(f64::INFINITY, f64::min),
        })?;
    Ok(ProxySearchResult {
        best,
        table,
        reference_accuracies: ref_accs.to_vec(),
        stopped_early: false,
    })
}

/// Highest tau among feasible records; ties to smaller `t_p`, then earlier.
pub fn select_best(table: &[SchemeRecord]) -> Option<&SchemeRecord> {
    table
        .iter()
        .filter(|r| r.feasible)
        .fold(None, |best, r| match best {
            Some(b) if !(r.tau > b.tau || (r.tau == b.tau && r.t_p < b.t_p)) => Some(b),
            _ => Some(r),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub arch: Architecture,
    pub proxy_mean: f64,
    pub reference_mean: f64,
    pub proxy_runs: Vec<f64>,
    pub reference_runs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub tau: f64,
    pub seeds: Vec<u64>,
    pub rows: Vec<ScatterRow>,
}

/// Trains `m` fresh architectures `repeats` times under both schemes and
/// correlates the mean accuracies. Architectures listed in `exclude` (for
/// example the search grid) are never drawn.
#[allow(clippy::too_many_arguments)]
pub fn validate_scheme<O: TrainerOracle + ?Sized, R: Rng + ?Sized>(
    space: &SpaceDef,
    scheme: &TrainingScheme,
    reference: &TrainingScheme,
    m: usize,
    repeats: usize,
    exclude: &[Architecture],
    oracle: &O,
    rng: &mut R,
) -> Result<ValidationReport, ProxyError> {
    if m < 2 {
        return Err(ProxyError::TooFewModels(m));
    }
    if repeats == 0 {
        return Err(ProxyError::Argument("repeats must be at least 1".into()));
    }
    let space_size = space.space_size().unwrap_or(u64::MAX);
    if (m as u64).saturating_add(exclude.len() as u64) > space_size {
        return Err(ProxyError::Argument(format!(
            "cannot draw {m} unseen architectures from a space of {space_size}"
        )));
    }
    let mut seen: HashSet<Architecture> = exclude.iter().cloned().collect();
    let mut archs = Vec::with_capacity(m);
    while archs.len() < m {
        let a = space.sample_uniform(rng);
        if seen.insert(a.clone()) {
            archs.push(a);
        }
    }
    let seeds: Vec<u64> = (0..repeats).map(|_| rng.random()).collect();

    let rows = archs
        .into_par_iter()
        .map(|arch| {
            let runs = |s: &TrainingScheme| {
                seeds
                    .iter()
                    .map(|&seed| Ok(oracle.evaluate(&arch, s, seed)?.accuracy))
                    .collect::<Result<Vec<f64>, OracleError>>()
            };
            let proxy_runs = runs(scheme)?;
            let reference_runs = runs(reference)?;
            Ok(ScatterRow {
                proxy_mean: mean(&proxy_runs),
                reference_mean: mean(&reference_runs),
                arch,
                proxy_runs,
                reference_runs,
            })
        })
        .collect::<Result<Vec<_>, OracleError>>()?;
    let proxy: Vec<f64> = rows.iter().map(|r| r.proxy_mean).collect();
    let reference_means: Vec<f64> = rows.iter().map(|r| r.reference_mean).collect();
    Ok(ValidationReport {
        tau: metrics::kendall_tau(&proxy, &reference_means)?,
        seeds,
        rows,
    })
}

/// Ratio of mean training times `t_r / t_p` over `models`.
pub fn speedup<O: TrainerOracle + ?Sized>(
    scheme: &TrainingScheme,
    reference: &TrainingScheme,
    models: &[Architecture],
    oracle: &O,
    seed: u64,
) -> Result<f64, ProxyError> {
    if models.is_empty() {
        return Err(ProxyError::TooFewModels(0));
    }
    let mean_time = |s: &TrainingScheme| -> Result<f64, ProxyError> {
        let total = models
            .iter()
            .map(|a| Ok(oracle.evaluate(a, s, seed)?.train_hours))
            .sum::<Result<f64, ProxyError>>()?;
        Ok(total / models.len() as f64)
    };
    let t_p = mean_time(scheme)?;
    if t_p <= 0.0 {
        return Err(ProxyError::Argument("proxy training time is zero".into()));
    }
    Ok(mean_time(reference)? / t_p)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
