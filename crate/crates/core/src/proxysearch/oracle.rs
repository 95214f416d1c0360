//! Deterministic stand-in for training an architecture under a scheme.
//!
//! Reference ("true") accuracy is a logistic function of the architecture's
//! size and structure, squeezed into `[acc_floor, acc_floor + acc_span]`:
//!
//! ```text
//! z    = alpha ln(MACs / 1e6) + beta ln(params / 1e6) + gamma se_count + delta sum(kernel) + bias
//! acc* = acc_floor + acc_span * sigmoid(z)
//! ```
//!
//! A scheme lowers it uniformly by an underfitting penalty and adds seeded
//! Gaussian noise whose spread grows as training gets shorter:
//!
//! ```text
//! underfit = c1 max(0, 1/e_t - 1/reference_epochs) + c2 max(0, 1 - res_f / res_ref)
//! acc      = clamp(acc* - underfit + N(0, (noise (1 + c3 / e_t))^2), 0, 1)
//! ```
//!
//! Training time ignores the architecture:
//! `sum over epochs 1..=e_t of kappa (res(epoch) / res_ref)^2 samples / b`,
//! with `res(epoch)` the progressive-resizing schedule.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{OracleError, TrainOutcome, TrainerOracle, TrainingScheme};
use crate::archspace::{flops_params, SpaceDef};
use crate::{arch_words, seeded_rng, stable_hash, Architecture};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticOracleParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub bias: f64,
    pub acc_floor: f64,
    pub acc_span: f64,
    /// Base standard deviation of the per-run accuracy noise.
    pub noise: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Epoch count at which the epoch penalty vanishes.
    pub reference_epochs: u32,
    pub reference_resolution: u32,
    /// GPU-hours per optimizer step at the reference resolution.
    pub kappa: f64,
    pub samples_per_epoch: f64,
}

impl Default for SyntheticOracleParams {
    fn default() -> Self {
        Self {
            alpha: 1.6,
            beta: -0.9,
            gamma: 0.15,
            delta: 0.02,
            bias: -9.2,
            acc_floor: 0.60,
            acc_span: 0.20,
            noise: 0.001,
            c1: 1.5,
            c2: 0.1,
            c3: 60.0,
            reference_epochs: 300,
            reference_resolution: 224,
            kappa: 1.0e-5,
            samples_per_epoch: 1_281_167.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    space: SpaceDef,
    params: SyntheticOracleParams,
}

impl SyntheticOracle {
    pub fn new(space: SpaceDef, params: SyntheticOracleParams) -> Self {
        Self { space, params }
    }

    pub fn params(&self) -> &SyntheticOracleParams {
        &self.params
    }

    pub fn space(&self) -> &SpaceDef {
        &self.space
    }

    /// Noise-free accuracy under the reference recipe.
    pub fn true_accuracy(&self, arch: &Architecture) -> Result<f64, OracleError> {
        let p = &self.params;
        let cost = flops_params(&self.space, arch, self.space.base_resolution)
            .map_err(|e| OracleError::new(e.to_string()))?;
        let z = p.alpha * (cost.flops as f64 / 1e6).ln()
            + p.beta * (cost.params as f64 / 1e6).ln()
            + p.gamma * arch.se_count() as f64
            + p.delta * f64::from(arch.kernel_sum())
            + p.bias;
        Ok(p.acc_floor + p.acc_span / (1.0 + (-z).exp()))
    }

    pub fn underfit(&self, scheme: &TrainingScheme) -> f64 {
        let p = &self.params;
        let epochs =
            (1.0 / f64::from(scheme.epochs) - 1.0 / f64::from(p.reference_epochs)).max(0.0);
        let res = (1.0 - f64::from(scheme.res_finish) / f64::from(p.reference_resolution)).max(0.0);
        p.c1 * epochs + p.c2 * res
    }

    pub fn noise_std(&self, scheme: &TrainingScheme) -> f64 {
        self.params.noise * (1.0 + self.params.c3 / f64::from(scheme.epochs))
    }

    /// Input resolution used during `epoch` (1-based).
    pub fn resolution_at(scheme: &TrainingScheme, epoch: u32) -> f64 {
        let (s, f) = (f64::from(scheme.res_start), f64::from(scheme.res_finish));
        if epoch <= scheme.resize_start {
            s
        } else if epoch >= scheme.resize_finish {
            f
        } else {
            let t = f64::from(epoch - scheme.resize_start)
                / f64::from(scheme.resize_finish - scheme.resize_start);
            s + (f - s) * t
        }
    }

    pub fn train_hours(&self, scheme: &TrainingScheme) -> f64 {
        let p = &self.params;
        let steps = p.samples_per_epoch / f64::from(scheme.batch_size);
        let res_ref = f64::from(p.reference_resolution);
        (1..=scheme.epochs)
            .map(|e| (Self::resolution_at(scheme, e) / res_ref).powi(2))
            .sum::<f64>()
            * p.kappa
            * steps
    }
}

impl TrainerOracle for SyntheticOracle {
    fn evaluate(
        &self,
        arch: &Architecture,
        scheme: &TrainingScheme,
        seed: u64,
    ) -> Result<TrainOutcome, OracleError> {
        scheme
            .validate()
            .map_err(|e| OracleError::new(e.to_string()))?;
        let mut acc = self.true_accuracy(arch)? - self.underfit(scheme);
        let std = self.noise_std(scheme);
        if std > 0.0 {
            // batch size is deliberately absent: it only changes the time
            let key = stable_hash(arch_words(arch).chain([
                u64::from(scheme.epochs),
                u64::from(scheme.resize_start),
                u64::from(scheme.resize_finish),
                u64::from(scheme.res_start),
                u64::from(scheme.res_finish),
                seed,
            ]));
            let z: f64 = StandardNormal.sample(&mut seeded_rng(key));
            acc += std * z;
        }
        Ok(TrainOutcome {
            accuracy: acc.clamp(0.0, 1.0),
            train_hours: self.train_hours(scheme),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(noise: f64) -> SyntheticOracle {
        SyntheticOracle::new(
            SpaceDef::default(),
            SyntheticOracleParams {
                noise,
                ..Default::default()
            },
        )
    }

    #[test]
    fn reference_scheme_without_noise_is_exact() {
        let o = oracle(0.0);
        let arch = SpaceDef::default().sample_uniform(&mut seeded_rng(1));
        let out = o.evaluate(&arch, &TrainingScheme::reference(), 3).unwrap();
        assert_eq!(out.accuracy, o.true_accuracy(&arch).unwrap());
    }

    #[test]
    fn halving_batch_doubles_time() {
        let o = oracle(0.002);
        let arch = SpaceDef::default().sample_uniform(&mut seeded_rng(2));
        let s = TrainingScheme::new(256, 60, 10, 40, 128, 224).unwrap();
        let h = TrainingScheme {
            batch_size: 128,
            ..s
        };
        let a = o.evaluate(&arch, &s, 0).unwrap();
        let b = o.evaluate(&arch, &h, 0).unwrap();
        assert!((b.train_hours / a.train_hours - 2.0).abs() < 1e-12);
        assert_eq!(a.accuracy, b.accuracy);
    }

    #[test]
    fn accuracy_in_declared_range() {
        let o = oracle(0.0);
        let space = SpaceDef::default();
        let mut rng = seeded_rng(3);
        for _ in 0..500 {
            let a = o.true_accuracy(&space.sample_uniform(&mut rng)).unwrap();
            assert!((0.60..=0.80).contains(&a));
        }
    }

    #[test]
    fn resize_schedule() {
        let s = TrainingScheme::new(256, 10, 2, 6, 100, 200).unwrap();
        let r: Vec<f64> = (1..=10)
            .map(|e| SyntheticOracle::resolution_at(&s, e))
            .collect();
        assert_eq!(
            r,
            [100.0, 100.0, 125.0, 150.0, 175.0, 200.0, 200.0, 200.0, 200.0, 200.0]
        );
        let step = TrainingScheme::new(256, 4, 2, 2, 100, 200).unwrap();
        let r: Vec<f64> = (1..=4)
            .map(|e| SyntheticOracle::resolution_at(&step, e))
            .collect();
        assert_eq!(r, [100.0, 100.0, 200.0, 200.0]);
    }

    #[test]
    fn noise_is_seeded() {
        let o = oracle(0.01);
        let arch = SpaceDef::default().sample_uniform(&mut seeded_rng(4));
        let s = TrainingScheme::new(256, 30, 0, 20, 128, 192).unwrap();
        let a = o.evaluate(&arch, &s, 7).unwrap().accuracy;
        assert_eq!(a, o.evaluate(&arch, &s, 7).unwrap().accuracy);
        assert_ne!(a, o.evaluate(&arch, &s, 8).unwrap().accuracy);
    }
}
