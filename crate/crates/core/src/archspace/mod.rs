//! Hierarchical block-based search space.
//!
//! An [`Architecture`] is a fixed-length sequence of [`BlockSpec`]s, one per
//! stage of an MBConv network. Each block carries four categorical decisions:
//! expansion factor, depthwise kernel size, number of layers and whether
//! squeeze-excitation is enabled. The [`SpaceDef`] holds the admissible
//! values for every decision together with the stage layout used by the
//! analytic cost model in [`cost`].

pub mod cost;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cost::{flops_params, CostSummary};

/// Number of searchable decisions per block.
pub const FIELDS_PER_BLOCK: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("architecture has {got} blocks, space expects {expected}")]
    BlockCount { expected: usize, got: usize },
    #[error("block {block}: {field} value {value} is not in the space")]
    OutOfSet {
        block: usize,
        field: Field,
        value: String,
    },
    #[error("feature vector has length {got}, expected {expected}")]
    VectorLength { expected: usize, got: usize },
    #[error("block {block}: malformed {field} group ({reason})")]
    MalformedGroup {
        block: usize,
        field: Field,
        reason: String,
    },
    #[error("cannot parse architecture token `{token}`: {reason}")]
    Parse { token: String, reason: String },
    #[error("every decision has a single admissible value; nothing to mutate")]
    NothingToMutate,
    #[error("space size overflows u64")]
    Overflow,
    #[error("uniform grid needs n >= 2 and pool >= 10 * n (n = {n}, pool = {pool})")]
    GridArgs { n: usize, pool: usize },
    #[error("pool has only {distinct} distinct FLOPs values, cannot fill {n} bins")]
    GridDegenerate { n: usize, distinct: usize },
}

/// One searchable decision inside a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Field {
    Expansion,
    Kernel,
    Layers,
    SqueezeExcite,
}

impl Field {
    pub const ALL: [Field; FIELDS_PER_BLOCK] = [
        Field::Expansion,
        Field::Kernel,
        Field::Layers,
        Field::SqueezeExcite,
    ];
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Expansion => "expansion",
            Field::Kernel => "kernel",
            Field::Layers => "layers",
            Field::SqueezeExcite => "se",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockSpec {
    pub expansion: u32,
    pub kernel: u32,
    pub layers: u32,
    pub se: bool,
}

impl BlockSpec {
    pub const fn new(expansion: u32, kernel: u32, layers: u32, se: bool) -> Self {
        Self {
            expansion,
            kernel,
            layers,
            se,
        }
    }
}

impl fmt::Display for BlockSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "e{}k{}l{}se{}",
            self.expansion, self.kernel, self.layers, self.se as u8
        )
    }
}

impl FromStr for BlockSpec {
    type Err = SpaceError;

    /// Parses `e{E}k{K}l{L}se{0|1}`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| SpaceError::Parse {
            token: s.to_string(),
            reason: reason.to_string(),
        };
        let rest = s.strip_prefix('e').ok_or_else(|| err("missing `e`"))?;
        let (e, rest) = rest.split_once('k').ok_or_else(|| err("missing `k`"))?;
        let (k, rest) = rest.split_once('l').ok_or_else(|| err("missing `l`"))?;
        let (l, se) = rest.split_once("se").ok_or_else(|| err("missing `se`"))?;
        let num = |v: &str, what: &str| {
            v.parse::<u32>()
                .map_err(|_| err(&format!("bad {what} `{v}`")))
        };
        let se = match se {
            "0" => false,
            "1" => true,
            other => return Err(err(&format!("se flag must be 0 or 1, got `{other}`"))),
        };
        Ok(BlockSpec::new(
            num(e, "expansion")?,
            num(k, "kernel")?,
            num(l, "layers")?,
            se,
        ))
    }
}

/// An ordered sequence of blocks. The text form is the comma-joined block
/// tokens, e.g. `e1k3l1se0,e6k5l3se1,...`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Architecture {
    pub blocks: Vec<BlockSpec>,
}

impl Architecture {
    pub fn new(blocks: Vec<BlockSpec>) -> Self {
        Self { blocks }
    }

    pub fn se_count(&self) -> usize {
        self.blocks.iter().filter(|b| b.se).count()
    }

    pub fn kernel_sum(&self) -> u32 {
        self.blocks.iter().map(|b| b.kernel).sum()
    }

    pub fn layer_count(&self) -> u32 {
        self.blocks.iter().map(|b| b.layers).sum()
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl FromStr for Architecture {
    type Err = SpaceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let blocks = s
            .split(',')
            .map(|t| t.trim().parse())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Architecture { blocks })
    }
}

impl Serialize for Architecture {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Architecture {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Layout of one stage, used only for costing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub in_channels: u64,
    pub out_channels: u64,
    pub stride: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDef {
    pub num_blocks: usize,
    pub expansions: Vec<u32>,
    pub kernels: Vec<u32>,
    pub layers: Vec<u32>,
    pub se: Vec<bool>,
    pub stem_channels: u64,
    pub head_channels: u64,
    pub num_classes: u64,
    /// Input resolution the architecture is costed at unless told otherwise.
    pub base_resolution: u32,
    pub stages: Vec<StageConfig>,
}

/// EfficientNet-B0 stage layout: (in, out, stride).
const B0_STAGES: [(u64, u64, u64); 7] = [
    (32, 16, 1),
    (16, 24, 2),
    (24, 40, 2),
    (40, 80, 2),
    (80, 112, 1),
    (112, 192, 2),
    (192, 320, 1),
];

impl Default for SpaceDef {
    fn default() -> Self {
        Self::with_blocks(7)
    }
}

impl SpaceDef {
    /// The default decision sets over the first `num_blocks` EfficientNet-B0
    /// stages. `num_blocks` must be in `1..=7`.
    pub fn with_blocks(num_blocks: usize) -> Self {
        assert!(
            (1..=B0_STAGES.len()).contains(&num_blocks),
            "the EfficientNet-B0 layout has 1 to 7 stages"
        );
        SpaceDef {
            num_blocks,
            expansions: vec![1, 4, 6],
            kernels: vec![3, 5],
            layers: vec![1, 2, 3],
            se: vec![false, true],
            stem_channels: 32,
            head_channels: 1280,
            num_classes: 1000,
            base_resolution: 224,
            stages: B0_STAGES[..num_blocks]
                .iter()
                .map(|&(in_channels, out_channels, stride)| StageConfig {
                    in_channels,
                    out_channels,
                    stride,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), SpaceError> {
        let bad = |m: &str| Err(SpaceError::InvalidSpace(m.to_string()));
        if self.num_blocks == 0 {
            return bad("num_blocks must be at least 1");
        }
        if self.expansions.is_empty()
            || self.kernels.is_empty()
            || self.layers.is_empty()
            || self.se.is_empty()
        {
            return bad("every decision needs at least one value");
        }
        if has_duplicates(&self.expansions)
            || has_duplicates(&self.kernels)
            || has_duplicates(&self.layers)
            || has_duplicates(&self.se)
        {
            return bad("decision value sets must not repeat values");
        }
        if self.expansions.contains(&0) || self.kernels.contains(&0) || self.layers.contains(&0) {
            return bad("expansion, kernel and layer values must be positive");
        }
        if self.stages.len() != self.num_blocks {
            return bad("stage config length must equal num_blocks");
        }
        if self
            .stages
            .iter()
            .any(|s| s.in_channels == 0 || s.out_channels == 0 || s.stride == 0)
        {
            return bad("stage channels and strides must be positive");
        }
        if self.base_resolution == 0 {
            return bad("base_resolution must be positive");
        }
        Ok(())
    }

    /// Number of values for `field`.
    pub fn cardinality(&self, field: Field) -> usize {
        match field {
            Field::Expansion => self.expansions.len(),
            Field::Kernel => self.kernels.len(),
            Field::Layers => self.layers.len(),
            Field::SqueezeExcite => self.se.len(),
        }
    }

    /// Configurations available to a single block.
    pub fn block_configs(&self) -> u64 {
        Field::ALL
            .iter()
            .map(|&f| self.cardinality(f) as u64)
            .product()
    }

    /// Exact number of distinct architectures.
    pub fn space_size(&self) -> Result<u64, SpaceError> {
        let per_block = self.block_configs();
        (0..self.num_blocks).try_fold(1u64, |acc, _| {
            acc.checked_mul(per_block).ok_or(SpaceError::Overflow)
        })
    }

    /// Total number of (block, field) decisions.
    pub fn num_decisions(&self) -> usize {
        self.num_blocks * FIELDS_PER_BLOCK
    }

    /// Length of the one-hot feature vector produced by [`SpaceDef::encode`].
    pub fn feature_dim(&self) -> usize {
        self.num_blocks * self.block_feature_dim()
    }

    fn block_feature_dim(&self) -> usize {
        self.expansions.len() + self.kernels.len() + self.layers.len() + 1
    }

    /// Index of each field of `block` within its value set.
    pub fn value_indices(&self, block: usize, spec: &BlockSpec) -> Result<[usize; 4], SpaceError> {
        let find = |field: Field, pos: Option<usize>, value: String| {
            pos.ok_or(SpaceError::OutOfSet {
                block,
                field,
                value,
            })
        };
        Ok([
            find(
                Field::Expansion,
                self.expansions.iter().position(|&v| v == spec.expansion),
                spec.expansion.to_string(),
            )?,
            find(
                Field::Kernel,
                self.kernels.iter().position(|&v| v == spec.kernel),
                spec.kernel.to_string(),
            )?,
            find(
                Field::Layers,
                self.layers.iter().position(|&v| v == spec.layers),
                spec.layers.to_string(),
            )?,
            find(
                Field::SqueezeExcite,
                self.se.iter().position(|&v| v == spec.se),
                (spec.se as u8).to_string(),
            )?,
        ])
    }

    /// Builds a block from value indices. Panics if an index is out of range.
    pub fn block_from_indices(&self, idx: [usize; 4]) -> BlockSpec {
        BlockSpec::new(
            self.expansions[idx[0]],
            self.kernels[idx[1]],
            self.layers[idx[2]],
            self.se[idx[3]],
        )
    }

    /// Checks that `arch` has the right length and every value is admissible.
    pub fn check(&self, arch: &Architecture) -> Result<(), SpaceError> {
        if arch.blocks.len() != self.num_blocks {
            return Err(SpaceError::BlockCount {
                expected: self.num_blocks,
                got: arch.blocks.len(),
            });
        }
        for (i, b) in arch.blocks.iter().enumerate() {
            self.value_indices(i, b)?;
        }
        Ok(())
    }

    /// Parses the comma-separated text form and checks it against the space.
    pub fn parse_arch(&self, text: &str) -> Result<Architecture, SpaceError> {
        let arch: Architecture = text.parse()?;
        self.check(&arch)?;
        Ok(arch)
    }

    /// Draws every decision independently and uniformly.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Architecture {
        let blocks = (0..self.num_blocks)
            .map(|_| {
                self.block_from_indices([
                    rng.random_range(0..self.expansions.len()),
                    rng.random_range(0..self.kernels.len()),
                    rng.random_range(0..self.layers.len()),
                    rng.random_range(0..self.se.len()),
                ])
            })
            .collect();
        Architecture { blocks }
    }

    /// One-hot encoding: per block `onehot(expansion) ++ onehot(kernel) ++
    /// onehot(layers) ++ [se]`.
    pub fn encode(&self, arch: &Architecture) -> Result<Vec<f64>, SpaceError> {
        if arch.blocks.len() != self.num_blocks {
            return Err(SpaceError::BlockCount {
                expected: self.num_blocks,
                got: arch.blocks.len(),
            });
        }
        let mut out = Vec::with_capacity(self.feature_dim());
        for (i, b) in arch.blocks.iter().enumerate() {
            let [e, k, l, _] = self.value_indices(i, b)?;
            push_one_hot(&mut out, self.expansions.len(), e);
            push_one_hot(&mut out, self.kernels.len(), k);
            push_one_hot(&mut out, self.layers.len(), l);
            out.push(if b.se { 1.0 } else { 0.0 });
        }
        Ok(out)
    }

    pub fn decode(&self, features: &[f64]) -> Result<Architecture, SpaceError> {
        if features.len() != self.feature_dim() {
            return Err(SpaceError::VectorLength {
                expected: self.feature_dim(),
                got: features.len(),
            });
        }
        let blocks = features
            .chunks_exact(self.block_feature_dim())
            .enumerate()
            .map(|(block, chunk)| {
                let (e_bits, rest) = chunk.split_at(self.expansions.len());
                let (k_bits, rest) = rest.split_at(self.kernels.len());
                let (l_bits, se_bit) = rest.split_at(self.layers.len());
                let e = hot_index(e_bits, block, Field::Expansion)?;
                let k = hot_index(k_bits, block, Field::Kernel)?;
                let l = hot_index(l_bits, block, Field::Layers)?;
                let se = match se_bit[0] {
                    0.0 => false,
                    1.0 => true,
                    v => {
                        return Err(SpaceError::MalformedGroup {
                            block,
                            field: Field::SqueezeExcite,
                            reason: format!("se bit must be 0 or 1, got {v}"),
                        })
                    }
                };
                let spec = BlockSpec::new(self.expansions[e], self.kernels[k], self.layers[l], se);
                if !self.se.contains(&se) {
                    return Err(SpaceError::OutOfSet {
                        block,
                        field: Field::SqueezeExcite,
                        value: (se as u8).to_string(),
                    });
                }
                Ok(spec)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Architecture { blocks })
    }

    /// Changes exactly one decision to a different admissible value.
    ///
    /// The (block, field) position is drawn uniformly and re-drawn while it
    /// points at a singleton value set.
    pub fn mutate<R: Rng + ?Sized>(
        &self,
        arch: &Architecture,
        rng: &mut R,
    ) -> Result<Architecture, SpaceError> {
        self.check(arch)?;
        if Field::ALL.iter().all(|&f| self.cardinality(f) < 2) {
            return Err(SpaceError::NothingToMutate);
        }
        let (block, field) = loop {
            let pos = rng.random_range(0..self.num_decisions());
            let field = Field::ALL[pos % FIELDS_PER_BLOCK];
            if self.cardinality(field) > 1 {
                break (pos / FIELDS_PER_BLOCK, field);
            }
        };
        let mut idx = self.value_indices(block, &arch.blocks[block])?;
        let slot = field as usize;
        let card = self.cardinality(field);
        // uniform over the other card - 1 values
        let mut pick = rng.random_range(0..card - 1);
        if pick >= idx[slot] {
            pick += 1;
        }
        idx[slot] = pick;
        let mut child = arch.clone();
        child.blocks[block] = self.block_from_indices(idx);
        Ok(child)
    }

    /// Every architecture of the space in lexicographic index order. Only
    /// sensible for tiny spaces.
    pub fn enumerate(&self) -> Vec<Architecture> {
        let per_block: Vec<BlockSpec> = itertools_product4(
            self.expansions.len(),
            self.kernels.len(),
            self.layers.len(),
            self.se.len(),
        )
        .map(|idx| self.block_from_indices(idx))
        .collect();
        let mut out = vec![Architecture { blocks: Vec::new() }];
        for _ in 0..self.num_blocks {
            out = out
                .into_iter()
                .flat_map(|a| {
                    per_block.iter().map(move |b| {
                        let mut blocks = a.blocks.clone();
                        blocks.push(*b);
                        Architecture { blocks }
                    })
                })
                .collect();
        }
        out
    }

    /// Picks `n` architectures evenly spread over FLOPs.
    ///
    /// Draws `pool` random architectures, orders them by (FLOPs, params,
    /// encoding), keeps the first of every run of equal FLOPs, cuts the result
    /// into `n` equal-frequency bins and takes from each bin the member
    /// closest to the bin's median FLOPs (ties: fewer params, then smaller
    /// encoding). The returned FLOPs are strictly increasing.
    pub fn uniform_grid<R: Rng + ?Sized>(
        &self,
        n: usize,
        pool: usize,
        rng: &mut R,
    ) -> Result<Vec<Architecture>, SpaceError> {
        if n < 2 || pool < 10 * n {
            return Err(SpaceError::GridArgs { n, pool });
        }
        let res = self.base_resolution;
        let mut candidates = (0..pool)
            .map(|_| {
                let arch = self.sample_uniform(rng);
                let cost = flops_params(self, &arch, res)?;
                let enc = self.encode(&arch)?;
                Ok((cost, enc, arch))
            })
            .collect::<Result<Vec<_>, SpaceError>>()?;
        candidates.sort_by(|a, b| {
            (a.0.flops, a.0.params)
                .cmp(&(b.0.flops, b.0.params))
                .then_with(|| cmp_encoding(&a.1, &b.1))
        });
        candidates.dedup_by_key(|c| c.0.flops);
        if candidates.len() < n {
            return Err(SpaceError::GridDegenerate {
                n,
                distinct: candidates.len(),
            });
        }
        let total = candidates.len();
        let grid = (0..n)
            .map(|bin| {
                let lo = bin * total / n;
                let hi = (bin + 1) * total / n;
                let members = &candidates[lo..hi];
                let m = members.len();
                let median = if m % 2 == 1 {
                    members[m / 2].0.flops as f64
                } else {
                    (members[m / 2 - 1].0.flops as f64 + members[m / 2].0.flops as f64) / 2.0
                };
                let best = members
                    .iter()
                    .min_by(|a, b| {
                        let da = (a.0.flops as f64 - median).abs();
                        let db = (b.0.flops as f64 - median).abs();
                        da.total_cmp(&db)
                            .then(a.0.params.cmp(&b.0.params))
                            .then_with(|| cmp_encoding(&a.1, &b.1))
                    })
                    .expect("bins are nonempty");
                best.2.clone()
            })
            .collect();
        Ok(grid)
    }
}

fn has_duplicates<T: PartialEq>(v: &[T]) -> bool {
    v.iter()
        .enumerate()
        .any(|(i, a)| v[i + 1..].iter().any(|b| a == b))
}

fn push_one_hot(out: &mut Vec<f64>, len: usize, hot: usize) {
    out.extend((0..len).map(|i| if i == hot { 1.0 } else { 0.0 }));
}

fn hot_index(bits: &[f64], block: usize, field: Field) -> Result<usize, SpaceError> {
    let mut hot = None;
    for (i, &v) in bits.iter().enumerate() {
        if v == 1.0 {
            if hot.is_some() {
                return Err(SpaceError::MalformedGroup {
                    block,
                    field,
                    reason: "more than one hot bit".into(),
                });
            }
            hot = Some(i);
        } else if v != 0.0 {
            return Err(SpaceError::MalformedGroup {
                block,
                field,
                reason: format!("entry {i} is {v}, expected 0 or 1"),
            });
        }
    }
    hot.ok_or_else(|| SpaceError::MalformedGroup {
        block,
        field,
        reason: "no hot bit".into(),
    })
}

fn cmp_encoding(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn itertools_product4(a: usize, b: usize, c: usize, d: usize) -> impl Iterator<Item = [usize; 4]> {
    (0..a).flat_map(move |i| {
        (0..b).flat_map(move |j| (0..c).flat_map(move |k| (0..d).map(move |l| [i, j, k, l])))
    })
}
