//! Zero-cost architecture search against surrogate (or oracle) evaluators.

mod pareto;
mod reinforce;
mod report;

use std::collections::VecDeque;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archspace::{SpaceDef, SpaceError};
use crate::data::DeviceModel;
use crate::proxysearch::SyntheticOracle;
use crate::surrogate::Gbdt;
use crate::{seeded_rng, Architecture};

pub use pareto::{pareto_front, PerfDirection};
pub use reinforce::Reinforce;
pub use report::{write_curve_csv, write_pareto_csv, write_trajectory_csv};

/// Seeds of a default multi-seed comparison.
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("invalid optimizer setting: {0}")]
    Config(String),
    #[error("evaluator failed: {0}")]
    Evaluator(String),
    #[error("bi-objective search needs a performance value for {0}")]
    MissingPerf(Architecture),
    #[error("performance value {0} must be positive")]
    NonPositivePerf(f64),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

type Result<T> = std::result::Result<T, OptimError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerfMetric {
    /// Images per second, higher is better.
    Throughput,
    /// Milliseconds, lower is better.
    Latency,
}

impl PerfMetric {
    pub fn direction(self) -> PerfDirection {
        match self {
            PerfMetric::Throughput => PerfDirection::Maximize,
            PerfMetric::Latency => PerfDirection::Minimize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum Objective {
    Uni,
    Bi {
        metric: PerfMetric,
        /// Performance target `T > 0`.
        target: f64,
        /// Exponent `w <= 0`.
        weight: f64,
    },
}

impl Objective {
    pub fn validate(&self) -> Result<()> {
        if let Objective::Bi { target, weight, .. } = *self {
            if !(target.is_finite() && target > 0.0) {
                return Err(OptimError::Config(format!(
                    "target {target} must be positive"
                )));
            }
            if !(weight.is_finite() && weight <= 0.0) {
                return Err(OptimError::Config(format!("weight {weight} must be <= 0")));
            }
        }
        Ok(())
    }

    pub fn needs_perf(&self) -> bool {
        matches!(self, Objective::Bi { .. })
    }

    /// Reward of one evaluation.
    pub fn reward(&self, arch: &Architecture, e: &Evaluation) -> Result<f64> {
        match self {
            Objective::Uni => Ok(e.accuracy),
            Objective::Bi { .. } => {
                let perf = e
                    .perf
                    .ok_or_else(|| OptimError::MissingPerf(arch.clone()))?;
                scalarize(e.accuracy, perf, self)
            }
        }
    }
}

/// Weighted-product reward: `acc (perf / T)^w` for latency and
/// `acc (T / perf)^w` for throughput. Uni-objective returns `acc`.
pub fn scalarize(acc: f64, perf: f64, obj: &Objective) -> Result<f64> {
    match *obj {
        Objective::Uni => Ok(acc),
        Objective::Bi {
            metric,
            target,
            weight,
        } => {
            if perf.is_nan() || perf <= 0.0 {
                return Err(OptimError::NonPositivePerf(perf));
            }
            if target.is_nan() || target <= 0.0 {
                return Err(OptimError::Config(format!(
                    "target {target} must be positive"
                )));
            }
            let ratio = match metric {
                PerfMetric::Latency => perf / target,
                PerfMetric::Throughput => target / perf,
            };
            Ok(acc * ratio.powf(weight))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub perf: Option<f64>,
}

/// Scores architectures. Shared read-only across parallel runs.
pub trait Evaluator: Sync {
    fn evaluate(&self, arch: &Architecture) -> Result<Evaluation>;
}

impl<F> Evaluator for F
where
    F: Fn(&Architecture) -> Result<Evaluation> + Sync,
{
    fn evaluate(&self, arch: &Architecture) -> Result<Evaluation> {
        self(arch)
    }
}

/// Accuracy and optional performance from fitted surrogates.
pub struct SurrogateEvaluator {
    pub space: SpaceDef,
    pub accuracy: Gbdt,
    pub perf: Option<Gbdt>,
}

impl Evaluator for SurrogateEvaluator {
    fn evaluate(&self, arch: &Architecture) -> Result<Evaluation> {
        let x = self.space.encode(arch)?;
        let predict = |m: &Gbdt| {
            m.predict(&x)
                .map_err(|e| OptimError::Evaluator(e.to_string()))
        };
        Ok(Evaluation {
            accuracy: predict(&self.accuracy)?,
            perf: self.perf.as_ref().map(predict).transpose()?,
        })
    }
}

/// Noise-free reference accuracy and device performance straight from the
/// synthetic oracles.
pub struct OracleEvaluator {
    pub oracle: SyntheticOracle,
    pub perf: Option<(DeviceModel, PerfMetric)>,
}

impl Evaluator for OracleEvaluator {
    fn evaluate(&self, arch: &Architecture) -> Result<Evaluation> {
        let err = |e: crate::proxysearch::OracleError| OptimError::Evaluator(e.to_string());
        let space = self.oracle.space();
        let perf = match &self.perf {
            None => None,
            Some((m, PerfMetric::Throughput)) => Some(m.throughput(space, arch).map_err(err)?),
            Some((m, PerfMetric::Latency)) => Some(m.latency_ms(space, arch).map_err(err)?),
        };
        Ok(Evaluation {
            accuracy: self.oracle.true_accuracy(arch).map_err(err)?,
            perf,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub step: usize,
    pub arch: Architecture,
    pub accuracy: f64,
    pub perf: Option<f64>,
    pub reward: f64,
    /// Best reward among steps `0..=step`.
    pub incumbent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrajectory {
    pub optimizer: String,
    pub seed: u64,
    pub steps: Vec<Step>,
}

impl SearchTrajectory {
    fn new(optimizer: &str, seed: u64, budget: usize) -> Self {
        Self {
            optimizer: optimizer.to_string(),
            seed,
            steps: Vec::with_capacity(budget),
        }
    }

    /// Evaluates `arch`, appends it and returns its reward.
    fn record<E: Evaluator + ?Sized>(
        &mut self,
        arch: Architecture,
        evaluator: &E,
        objective: &Objective,
    ) -> Result<f64> {
        let e = evaluator.evaluate(&arch)?;
        let reward = objective.reward(&arch, &e)?;
        let incumbent = self
            .steps
            .last()
            .map_or(reward, |s| s.incumbent.max(reward));
        self.steps.push(Step {
            step: self.steps.len(),
            arch,
            accuracy: e.accuracy,
            perf: e.perf,
            reward,
            incumbent,
        });
        Ok(reward)
    }

    pub fn final_incumbent(&self) -> Option<f64> {
        self.steps.last().map(|s| s.incumbent)
    }
}

fn check_budget(budget: usize, objective: &Objective) -> Result<()> {
    objective.validate()?;
    if budget == 0 {
        return Err(OptimError::Config("budget must be at least 1".into()));
    }
    Ok(())
}

/// `budget` independent uniform samples.
pub fn random_search<E: Evaluator + ?Sized>(
    space: &SpaceDef,
    evaluator: &E,
    objective: &Objective,
    budget: usize,
    seed: u64,
) -> Result<SearchTrajectory> {
    check_budget(budget, objective)?;
    let mut rng = seeded_rng(seed);
    let mut traj = SearchTrajectory::new("RS", seed, budget);
    for _ in 0..budget {
        traj.record(space.sample_uniform(&mut rng), evaluator, objective)?;
    }
    Ok(traj)
}

/// Aging evolution: `population` random warm-up samples, then each step
/// mutates the best of `sample` members drawn without replacement and
/// replaces the oldest member with the child.
pub fn regularized_evolution<E: Evaluator + ?Sized>(
    space: &SpaceDef,
    evaluator: &E,
    objective: &Objective,
    budget: usize,
    population: usize,
    sample: usize,
    seed: u64,
) -> Result<SearchTrajectory> {
    check_budget(budget, objective)?;
    if !(budget >= population && population >= sample && sample >= 1) {
        return Err(OptimError::Config(format!(
            "need budget >= population >= sample >= 1, got {budget}, {population}, {sample}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut traj = SearchTrajectory::new("RE", seed, budget);
    let mut pop: VecDeque<(Architecture, f64)> = VecDeque::with_capacity(population + 1);
    for _ in 0..population {
        let arch = space.sample_uniform(&mut rng);
        let reward = traj.record(arch.clone(), evaluator, objective)?;
        pop.push_back((arch, reward));
    }
    for _ in population..budget {
        let mut parent: Option<usize> = None;
        for i in index::sample(&mut rng, pop.len(), sample) {
            if parent.is_none_or(|p| pop[i].1 > pop[p].1) {
                parent = Some(i);
            }
        }
        let parent = &pop[parent.expect("sample >= 1")].0;
        let child = space.mutate(parent, &mut rng)?;
        let reward = traj.record(child.clone(), evaluator, objective)?;
        pop.push_back((child, reward));
        pop.pop_front();
    }
    Ok(traj)
}

/// REINFORCE over independent per-decision categorical policies.
pub fn reinforce<E: Evaluator + ?Sized>(
    space: &SpaceDef,
    evaluator: &E,
    objective: &Objective,
    budget: usize,
    lr: f64,
    baseline_decay: f64,
    seed: u64,
) -> Result<SearchTrajectory> {
    check_budget(budget, objective)?;
    let mut policy = Reinforce::new(space, lr, baseline_decay)?;
    let mut rng = seeded_rng(seed);
    let mut traj = SearchTrajectory::new("REINFORCE", seed, budget);
    for _ in 0..budget {
        let (arch, choices) = policy.sample(&mut rng);
        let reward = traj.record(arch, evaluator, objective)?;
        policy.update(&choices, reward);
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OptimizerSpec {
    Random,
    Evolution {
        #[serde(default = "default_population")]
        population: usize,
        #[serde(default = "default_sample")]
        sample: usize,
    },
    Reinforce {
        #[serde(default = "default_lr")]
        lr: f64,
        #[serde(default = "default_decay")]
        baseline_decay: f64,
    },
}

fn default_population() -> usize {
    100
}
fn default_sample() -> usize {
    25
}
fn default_lr() -> f64 {
    reinforce::DEFAULT_LR
}
fn default_decay() -> f64 {
    reinforce::DEFAULT_BASELINE_DECAY
}

impl OptimizerSpec {
    pub fn evolution() -> Self {
        OptimizerSpec::Evolution {
            population: default_population(),
            sample: default_sample(),
        }
    }

    pub fn reinforce() -> Self {
        OptimizerSpec::Reinforce {
            lr: default_lr(),
            baseline_decay: default_decay(),
        }
    }

    /// Short label used in trajectories and file names.
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerSpec::Random => "RS",
            OptimizerSpec::Evolution { .. } => "RE",
            OptimizerSpec::Reinforce { .. } => "REINFORCE",
        }
    }

    pub fn run<E: Evaluator + ?Sized>(
        &self,
        space: &SpaceDef,
        evaluator: &E,
        objective: &Objective,
        budget: usize,
        seed: u64,
    ) -> Result<SearchTrajectory> {
        match *self {
            OptimizerSpec::Random => random_search(space, evaluator, objective, budget, seed),
            OptimizerSpec::Evolution { population, sample } => regularized_evolution(
                space, evaluator, objective, budget, population, sample, seed,
            ),
            OptimizerSpec::Reinforce { lr, baseline_decay } => reinforce(
                space,
                evaluator,
                objective,
                budget,
                lr,
                baseline_decay,
                seed,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub mean_incumbent: f64,
    /// Population standard deviation across seeds.
    pub std_incumbent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    /// One trajectory per seed, in the order the seeds were given.
    pub trajectories: Vec<SearchTrajectory>,
    pub curve: Vec<CurvePoint>,
}

/// Independent runs per seed (in parallel) and the pointwise incumbent
/// mean and standard deviation.
pub fn simulate_runs<E: Evaluator + ?Sized>(
    spec: &OptimizerSpec,
    space: &SpaceDef,
    evaluator: &E,
    objective: &Objective,
    budget: usize,
    seeds: &[u64],
) -> Result<Simulation> {
    if seeds.is_empty() {
        return Err(OptimError::Config("need at least one seed".into()));
    }
    let trajectories = seeds
        .par_iter()
        .map(|&s| spec.run(space, evaluator, objective, budget, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(Simulation {
        curve: aggregate(&trajectories),
        trajectories,
    })
}

/// Pointwise mean and population std of incumbents. Values are sorted before
/// summing so the result does not depend on trajectory order.
pub fn aggregate(trajectories: &[SearchTrajectory]) -> Vec<CurvePoint> {
    let len = trajectories
        .iter()
        .map(|t| t.steps.len())
        .min()
        .unwrap_or(0);
    let k = trajectories.len() as f64;
    let mut vals = Vec::with_capacity(trajectories.len());
    (0..len)
        .map(|step| {
            vals.clear();
            vals.extend(trajectories.iter().map(|t| t.steps[step].incumbent));
            vals.sort_by(f64::total_cmp);
            let mean = vals.iter().sum::<f64>() / k;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k;
            CurvePoint {
                step,
                mean_incumbent: mean,
                std_incumbent: var.sqrt(),
            }
        })
        .collect()
}
