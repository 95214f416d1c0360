//! Analytic stand-ins for on-device throughput and latency measurement.
//!
//! Per-image work is split into arithmetic (MACs at a device-specific rate),
//! weight traffic, and per-layer overheads that penalize depth, squeeze-excite
//! and large depthwise kernels. A fixed per-call overhead is amortized over
//! the batch for throughput:
//!
//! ```text
//! work_ms   = MACs / macs_per_ms + params / params_per_ms
//!           + sum over blocks of layers * (layer_ms + se * se_ms + (k^2 / 9 - 1) * dw_ms)
//! latency   = fixed_ms + work_ms                      (batch 1)
//! throughput = 1000 * batch / (fixed_ms + batch * work_ms)
//! ```
//!
//! Both are multiplied by `exp(noise * z)`, `z` a standard normal keyed on
//! the architecture and device name.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Metric, MetricOracle};
use crate::archspace::{flops_params, SpaceDef};
use crate::proxysearch::OracleError;
use crate::{arch_words, seeded_rng, stable_hash, Architecture};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceModel {
    pub name: String,
    pub macs_per_ms: f64,
    pub params_per_ms: f64,
    pub layer_ms: f64,
    pub se_ms: f64,
    pub dw_ms: f64,
    pub fixed_ms: f64,
    pub batch: u32,
    pub noise: f64,
}

impl DeviceModel {
    /// Built-in models for ZCU, VCK, TPUv2, TPUv3, A100 and RTX.
    pub fn preset(name: &str) -> Option<Self> {
        let m =
            |macs_per_ms: f64, params_per_ms: f64, layer_ms, se_ms, dw_ms, fixed_ms, batch| Self {
                name: name.to_string(),
                macs_per_ms,
                params_per_ms,
                layer_ms,
                se_ms,
                dw_ms,
                fixed_ms,
                batch,
                noise: 0.01,
            };
        Some(match name {
            // FPGAs: small batch, SE and large kernels are expensive
            "ZCU" => m(6.0e7, 2.0e6, 0.05, 0.20, 0.06, 1.5, 1),
            "VCK" => m(2.0e8, 8.0e6, 0.02, 0.08, 0.02, 0.8, 8),
            "TPUv2" => m(1.5e9, 1.0e8, 0.004, 0.010, 0.001, 4.0, 256),
            "TPUv3" => m(2.5e9, 1.5e8, 0.003, 0.008, 0.001, 3.0, 256),
            "A100" => m(1.2e9, 2.0e8, 0.003, 0.004, 0.002, 2.0, 128),
            "RTX" => m(5.0e8, 1.0e8, 0.004, 0.006, 0.003, 1.0, 64),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [self.macs_per_ms, self.params_per_ms];
        let nonneg = [
            self.layer_ms,
            self.se_ms,
            self.dw_ms,
            self.fixed_ms,
            self.noise,
        ];
        if self.name.is_empty() || self.name.contains(char::is_whitespace) {
            return Err(format!(
                "device name {:?} must be a nonempty token",
                self.name
            ));
        }
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(format!("{}: rates must be positive", self.name));
        }
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(format!(
                "{}: overheads and noise must be nonnegative",
                self.name
            ));
        }
        if self.batch == 0 {
            return Err(format!("{}: batch must be positive", self.name));
        }
        Ok(())
    }

    fn work_ms(&self, space: &SpaceDef, arch: &Architecture) -> Result<f64, OracleError> {
        let cost = flops_params(space, arch, space.base_resolution)
            .map_err(|e| OracleError::new(e.to_string()))?;
        let per_layer: f64 = arch
            .blocks
            .iter()
            .map(|b| {
                let k2 = f64::from(b.kernel * b.kernel);
                f64::from(b.layers)
                    * (self.layer_ms
                        + f64::from(u8::from(b.se)) * self.se_ms
                        + (k2 / 9.0 - 1.0) * self.dw_ms)
            })
            .sum();
        Ok(cost.flops as f64 / self.macs_per_ms
            + cost.params as f64 / self.params_per_ms
            + per_layer)
    }

    fn jitter(&self, arch: &Architecture) -> f64 {
        if self.noise == 0.0 {
            return 1.0;
        }
        let name = self.name.bytes().map(u64::from);
        let z: f64 =
            StandardNormal.sample(&mut seeded_rng(stable_hash(arch_words(arch).chain(name))));
        (self.noise * z).exp()
    }

    pub fn latency_ms(&self, space: &SpaceDef, arch: &Architecture) -> Result<f64, OracleError> {
        Ok((self.fixed_ms + self.work_ms(space, arch)?) * self.jitter(arch))
    }

    pub fn throughput(&self, space: &SpaceDef, arch: &Architecture) -> Result<f64, OracleError> {
        let b = f64::from(self.batch);
        let t = self.fixed_ms + b * self.work_ms(space, arch)?;
        Ok(1000.0 * b / t * self.jitter(arch))
    }
}

/// One `(device, metric)` measurement source.
#[derive(Debug, Clone)]
pub struct DeviceOracle {
    pub space: SpaceDef,
    pub model: DeviceModel,
    pub metric: Metric,
}

impl DeviceOracle {
    pub fn new(space: SpaceDef, model: DeviceModel, metric: Metric) -> Result<Self, String> {
        model.validate()?;
        if metric == Metric::Acc {
            return Err("device oracles measure Thr or Lat".into());
        }
        Ok(Self {
            space,
            model,
            metric,
        })
    }
}

impl MetricOracle for DeviceOracle {
    fn device(&self) -> Option<&str> {
        Some(&self.model.name)
    }

    fn metric(&self) -> Metric {
        self.metric
    }

    fn measure(&self, arch: &Architecture) -> Result<f64, OracleError> {
        match self.metric {
            Metric::Thr => self.model.throughput(&self.space, arch),
            Metric::Lat => self.model.latency_ms(&self.space, arch),
            Metric::Acc => Err(OracleError::new("device oracle asked for accuracy")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_plausible() {
        let space = SpaceDef::default();
        let arch = space.sample_uniform(&mut seeded_rng(0));
        for name in ["ZCU", "VCK", "TPUv2", "TPUv3", "A100", "RTX"] {
            let m = DeviceModel::preset(name).unwrap();
            m.validate().unwrap();
            let thr = m.throughput(&space, &arch).unwrap();
            let lat = m.latency_ms(&space, &arch).unwrap();
            assert!(thr > 10.0 && thr < 1e5, "{name} thr {thr}");
            assert!(lat > 0.1 && lat < 1e3, "{name} lat {lat}");
        }
        assert!(DeviceModel::preset("H100").is_none());
    }

    #[test]
    fn more_layers_are_slower() {
        let space = SpaceDef::default();
        let mut m = DeviceModel::preset("ZCU").unwrap();
        m.noise = 0.0;
        let small: Architecture =
            "e1k3l1se0,e1k3l1se0,e1k3l1se0,e1k3l1se0,e1k3l1se0,e1k3l1se0,e1k3l1se0"
                .parse()
                .unwrap();
        let big: Architecture =
            "e6k5l3se1,e6k5l3se1,e6k5l3se1,e6k5l3se1,e6k5l3se1,e6k5l3se1,e6k5l3se1"
                .parse()
                .unwrap();
        assert!(m.latency_ms(&space, &small).unwrap() < m.latency_ms(&space, &big).unwrap());
        assert!(m.throughput(&space, &small).unwrap() > m.throughput(&space, &big).unwrap());
    }
}
