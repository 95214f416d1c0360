use rand::Rng;

use super::{OptimError, Result};
use crate::archspace::{Field, SpaceDef};
use crate::Architecture;

pub const DEFAULT_LR: f64 = 1.0;
pub const DEFAULT_BASELINE_DECAY: f64 = 0.9;

/// Independent softmax policies, one per (block, field) decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Reinforce {
    space: SpaceDef,
    /// Block-major: decision `4 * block + field`.
    logits: Vec<Vec<f64>>,
    baseline: Option<f64>,
    lr: f64,
    decay: f64,
}

impl Reinforce {
    pub fn new(space: &SpaceDef, lr: f64, baseline_decay: f64) -> Result<Self> {
        space.validate()?;
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(OptimError::Config(format!(
                "learning rate {lr} must be >= 0"
            )));
        }
        if !(0.0..1.0).contains(&baseline_decay) {
            return Err(OptimError::Config(format!(
                "baseline decay {baseline_decay} must be in [0, 1)"
            )));
        }
        let logits = (0..space.num_blocks)
            .flat_map(|_| Field::ALL.map(|f| vec![0.0; space.cardinality(f)]))
            .collect();
        Ok(Self {
            space: space.clone(),
            logits,
            baseline: None,
            lr,
            decay: baseline_decay,
        })
    }

    pub fn logits(&self) -> &[Vec<f64>] {
        &self.logits
    }

    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    /// Softmax of every decision's logits.
    pub fn policy(&self) -> Vec<Vec<f64>> {
        self.logits.iter().map(|l| softmax(l)).collect()
    }

    /// Probability of drawing `arch`.
    pub fn probability(&self, arch: &Architecture) -> Result<f64> {
        self.space.check(arch)?;
        let policy = self.policy();
        let mut p = 1.0;
        for (b, spec) in arch.blocks.iter().enumerate() {
            let idx = self.space.value_indices(b, spec)?;
            for (f, &i) in idx.iter().enumerate() {
                p *= policy[b * idx.len() + f][i];
            }
        }
        Ok(p)
    }

    /// Draws one value index per decision.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Architecture, Vec<usize>) {
        let choices: Vec<usize> = self
            .logits
            .iter()
            .map(|l| {
                let p = softmax(l);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, pi) in p.iter().enumerate() {
                    acc += pi;
                    if u < acc {
                        return i;
                    }
                }
                p.len() - 1
            })
            .collect();
        let blocks = choices
            .chunks(Field::ALL.len())
            .map(|c| self.space.block_from_indices([c[0], c[1], c[2], c[3]]))
            .collect();
        (Architecture { blocks }, choices)
    }

    /// One policy-gradient step for the sampled `choices` and their reward.
    /// The baseline starts at the first reward.
    pub fn update(&mut self, choices: &[usize], reward: f64) {
        let baseline = *self.baseline.get_or_insert(reward);
        let adv = reward - baseline;
        for (logits, &c) in self.logits.iter_mut().zip(choices) {
            let p = softmax(logits);
            for (i, (l, pi)) in logits.iter_mut().zip(&p).enumerate() {
                let indicator = if i == c { 1.0 } else { 0.0 };
                *l += self.lr * adv * (indicator - pi);
            }
        }
        self.baseline = Some(self.decay * baseline + (1.0 - self.decay) * reward);
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / z).collect()
}
