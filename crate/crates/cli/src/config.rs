//! The TOML run configuration. Every section is optional; unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use anb::data::{parse_name, DeviceModel, Metric, SplitRatios};
use anb::optim::{Objective, OptimizerSpec, PerfMetric, DEFAULT_SEEDS};
use anb::proxysearch::{
    EarlyStop, SchemeGrid, SyntheticOracleParams, TrainingScheme, DEFAULT_T_SPEC,
};
use anb::surrogate::{FitConfig, TuneGrid};
use anb::SpaceDef;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
    pub space: SpaceDef,
    pub oracle: SyntheticOracleParams,
    pub proxy: ProxyConfig,
    pub collect: CollectConfig,
    pub surrogate: SurrogateConfig,
    pub simulate: SimulateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            jobs: 0,
            space: SpaceDef::default(),
            oracle: SyntheticOracleParams::default(),
            proxy: ProxyConfig::default(),
            collect: CollectConfig::default(),
            surrogate: SurrogateConfig::default(),
            simulate: SimulateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProxyConfig {
    pub t_spec: f64,
    /// Grid models, spread evenly over FLOPs.
    pub n_models: usize,
    /// Random architectures the grid models are picked from.
    pub pool: usize,
    /// Training seed for every scheme evaluation.
    pub train_seed: u64,
    /// Training seed of the reference runs.
    pub reference_seed: u64,
    pub reference: TrainingScheme,
    pub grid: SchemeGrid,
    pub early_stop: Option<EarlyStop>,
    pub validation: Option<ValidationConfig>,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        Self {
            t_spec: DEFAULT_T_SPEC,
            n_models: 20,
            pool: 2000,
            train_seed: 0,
            reference_seed: 1,
            reference: TrainingScheme::reference(),
            grid: SchemeGrid::default(),
            early_stop: None,
            validation: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    pub m: usize,
    pub repeats: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub device: String,
    pub metric: Metric,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollectConfig {
    pub n: usize,
    /// Scheme used to train every sampled architecture once.
    pub scheme: TrainingScheme,
    pub train_seed: u64,
    pub accuracy: bool,
    pub devices: Vec<DeviceSpec>,
    /// Device models beyond the built-in presets, referenced by name.
    pub custom_devices: Vec<DeviceModel>,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            n: 5200,
            scheme: TrainingScheme {
                batch_size: 512,
                epochs: 60,
                resize_start: 10,
                resize_finish: 20,
                res_start: 160,
                res_finish: 192,
            },
            train_seed: 0,
            accuracy: true,
            devices: vec![
                DeviceSpec {
                    device: "A100".into(),
                    metric: Metric::Thr,
                },
                DeviceSpec {
                    device: "ZCU".into(),
                    metric: Metric::Lat,
                },
            ],
            custom_devices: Vec::new(),
        }
    }
}

impl CollectConfig {
    pub fn device_model(&self, name: &str) -> Option<DeviceModel> {
        self.custom_devices
            .iter()
            .find(|d| d.name == name)
            .cloned()
            .or_else(|| DeviceModel::preset(name))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    /// Dataset names, e.g. `ANB-Acc`, `ANB-A100-Thr`.
    pub datasets: Vec<String>,
    /// Defaults to `<out>/data`.
    pub data_dir: Option<PathBuf>,
    /// Defaults to `<out>/models`.
    pub model_dir: Option<PathBuf>,
    pub ratios: SplitRatios,
    pub split_seed: u64,
    pub fit: FitConfig,
    pub tune_budget: usize,
    pub tune_grid: TuneGrid,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            datasets: vec![
                "ANB-Acc".into(),
                "ANB-A100-Thr".into(),
                "ANB-ZCU-Lat".into(),
            ],
            data_dir: None,
            model_dir: None,
            ratios: SplitRatios::default(),
            split_seed: 0,
            fit: FitConfig::default(),
            tune_budget: 20,
            tune_grid: TuneGrid::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    /// Model name of the accuracy surrogate.
    pub accuracy: String,
    /// Model name of the performance surrogate; needed for bi-objective runs.
    pub perf: Option<String>,
    pub objective: Objective,
    pub budget: usize,
    pub seeds: Vec<u64>,
    pub optimizers: Vec<OptimizerSpec>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            accuracy: "ANB-Acc".into(),
            perf: None,
            objective: Objective::Uni,
            budget: 2000,
            seeds: DEFAULT_SEEDS.to_vec(),
            optimizers: vec![
                OptimizerSpec::Random,
                OptimizerSpec::evolution(),
                OptimizerSpec::reinforce(),
            ],
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn data_dir(&self) -> PathBuf {
        self.surrogate
            .data_dir
            .clone()
            .unwrap_or_else(|| self.out.join("data"))
    }

    pub fn model_dir(&self) -> PathBuf {
        self.surrogate
            .model_dir
            .clone()
            .unwrap_or_else(|| self.out.join("models"))
    }

    /// Checks everything that can be checked before work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.space
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;

        let p = &self.proxy;
        if p.t_spec.is_nan() || p.t_spec <= 0.0 {
            return bad(format!("proxy.t_spec must be positive, got {}", p.t_spec));
        }
        for (name, list) in [
            ("batch_size", &p.grid.batch_size),
            ("epochs", &p.grid.epochs),
            ("resize_start", &p.grid.resize_start),
            ("resize_finish", &p.grid.resize_finish),
            ("res_start", &p.grid.res_start),
            ("res_finish", &p.grid.res_finish),
        ] {
            if list.is_empty() {
                return bad(format!("proxy.grid.{name} is empty"));
            }
        }
        if p.grid.schemes().is_empty() {
            return bad("proxy.grid has no valid scheme".into());
        }
        p.reference
            .validate()
            .map_err(|e| CliError::Config(format!("proxy.reference: {e}")))?;
        if p.n_models < 2 || p.pool < p.n_models {
            return bad("proxy needs 2 <= n_models <= pool".into());
        }
        if let Some(v) = p.validation {
            if v.m < 2 || v.repeats == 0 {
                return bad("proxy.validation needs m >= 2 and repeats >= 1".into());
            }
        }

        let c = &self.collect;
        if c.n == 0 {
            return bad("collect.n must be positive".into());
        }
        c.scheme
            .validate()
            .map_err(|e| CliError::Config(format!("collect.scheme: {e}")))?;
        for d in &c.custom_devices {
            d.validate().map_err(CliError::Config)?;
        }
        for d in &c.devices {
            if c.device_model(&d.device).is_none() {
                return bad(format!(
                    "unknown device {:?}; add it to collect.custom_devices",
                    d.device
                ));
            }
            if d.metric == Metric::Acc {
                return bad(format!("device {} cannot measure Acc", d.device));
            }
        }
        if !c.accuracy && c.devices.is_empty() {
            return bad("collect has nothing to measure".into());
        }

        let s = &self.surrogate;
        for name in &s.datasets {
            parse_name(name).map_err(|e| CliError::Config(e.to_string()))?;
        }
        s.ratios
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        s.fit
            .validate()
            .map_err(|e| CliError::Config(format!("surrogate.fit: {e}")))?;
        if s.tune_budget == 0 || s.tune_grid.is_empty() {
            return bad("surrogate needs tune_budget >= 1 and a nonempty tune_grid".into());
        }

        let m = &self.simulate;
        m.objective
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if m.seeds.is_empty() || m.budget == 0 || m.optimizers.is_empty() {
            return bad("simulate needs seeds, a positive budget and optimizers".into());
        }
        let (_, acc_metric) =
            parse_name(&m.accuracy).map_err(|e| CliError::Config(e.to_string()))?;
        if acc_metric != Metric::Acc {
            return bad(format!(
                "simulate.accuracy {:?} is not an accuracy model",
                m.accuracy
            ));
        }
        if let Objective::Bi { metric, .. } = m.objective {
            let Some(perf) = &m.perf else {
                return bad("bi-objective simulate needs simulate.perf".into());
            };
            let (_, pm) = parse_name(perf).map_err(|e| CliError::Config(e.to_string()))?;
            let expected = match metric {
                PerfMetric::Throughput => Metric::Thr,
                PerfMetric::Latency => Metric::Lat,
            };
            if pm != expected {
                return bad(format!(
                    "simulate.perf {perf:?} does not measure {metric:?}"
                ));
            }
        }
        for o in &m.optimizers {
            match *o {
                OptimizerSpec::Evolution { population, sample } => {
                    if !(m.budget >= population && population >= sample && sample >= 1) {
                        return bad("evolution needs budget >= population >= sample >= 1".into());
                    }
                }
                OptimizerSpec::Reinforce { lr, baseline_decay } => {
                    if !(lr >= 0.0 && (0.0..1.0).contains(&baseline_decay)) {
                        return bad("reinforce needs lr >= 0 and baseline_decay in [0, 1)".into());
                    }
                }
                OptimizerSpec::Random => {}
            }
        }
        Ok(())
    }
}
