//! `(architecture, metric)` datasets: naming, JSON-Lines persistence,
//! seeded splits and the collection pipeline.

pub mod device;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archspace::{SpaceDef, SpaceError};
use crate::proxysearch::{OracleError, TrainerOracle, TrainingScheme};
use crate::{seeded_rng, Architecture};

pub use device::{DeviceModel, DeviceOracle};

pub const SCHEMA_VERSION: u32 = 1;

/// Devices whose latency is measurable in the benchmark.
pub const FPGA_DEVICES: [&str; 2] = ["ZCU", "VCK"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("schema version {found} is not supported (expected {SCHEMA_VERSION})")]
    Version { found: u64 },
    #[error("line {line}: {msg}")]
    Invalid { line: usize, msg: String },
    #[error("invalid dataset name {0:?}; expected ANB-Acc or ANB-<device>-<Thr|Lat>")]
    Name(String),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("collect: {0}")]
    Collect(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Acc,
    Thr,
    Lat,
}

impl Metric {
    pub fn unit(self) -> &'static str {
        match self {
            Metric::Acc => "top1-fraction",
            Metric::Thr => "images-per-sec",
            Metric::Lat => "ms",
        }
    }

    /// Whether larger values are better.
    pub fn maximize(self) -> bool {
        !matches!(self, Metric::Lat)
    }

    fn check_value(self, v: f64) -> std::result::Result<(), String> {
        if !v.is_finite() {
            return Err(format!("value {v} is not finite"));
        }
        match self {
            Metric::Acc if !(0.0..=1.0).contains(&v) => Err(format!("accuracy {v} outside [0, 1]")),
            Metric::Thr | Metric::Lat if v <= 0.0 => {
                Err(format!("{self} value {v} must be positive"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Acc => "Acc",
            Metric::Thr => "Thr",
            Metric::Lat => "Lat",
        })
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "Acc" => Ok(Metric::Acc),
            "Thr" => Ok(Metric::Thr),
            "Lat" => Ok(Metric::Lat),
            _ => Err(format!("unknown metric {s:?}")),
        }
    }
}

/// `ANB-Acc` or `ANB-{device}-{metric}`.
pub fn dataset_name(device: Option<&str>, metric: Metric) -> String {
    match device {
        Some(d) => format!("ANB-{d}-{metric}"),
        None => format!("ANB-{metric}"),
    }
}

/// Inverse of [`dataset_name`].
pub fn parse_name(name: &str) -> Result<(Option<String>, Metric)> {
    let bad = || DataError::Name(name.to_string());
    let rest = name.strip_prefix("ANB-").ok_or_else(bad)?;
    match rest.rsplit_once('-') {
        None => match rest.parse() {
            Ok(Metric::Acc) => Ok((None, Metric::Acc)),
            _ => Err(bad()),
        },
        Some((device, metric)) => {
            let metric: Metric = metric.parse().map_err(|_| bad())?;
            if device.is_empty() || metric == Metric::Acc {
                return Err(bad());
            }
            Ok((Some(device.to_string()), metric))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub arch: Architecture,
    pub value: f64,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricDataset {
    pub name: String,
    pub device: Option<String>,
    pub metric: Metric,
    pub records: Vec<Record>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    name: String,
    count: usize,
    schema_version: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    arch: String,
    value: f64,
    unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

impl MetricDataset {
    pub fn new(device: Option<&str>, metric: Metric, records: Vec<Record>) -> Self {
        Self {
            name: dataset_name(device, metric),
            device: device.map(str::to_string),
            metric,
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate(&self, space: &SpaceDef) -> Result<()> {
        let (device, metric) = parse_name(&self.name)?;
        if device != self.device || metric != self.metric {
            return Err(DataError::Name(self.name.clone()));
        }
        for (i, r) in self.records.iter().enumerate() {
            let line = i + 2;
            space.check(&r.arch).map_err(|e| DataError::Invalid {
                line,
                msg: e.to_string(),
            })?;
            self.metric
                .check_value(r.value)
                .map_err(|msg| DataError::Invalid { line, msg })?;
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = Header {
            name: self.name.clone(),
            count: self.records.len(),
            schema_version: u64::from(SCHEMA_VERSION),
        };
        writeln!(
            out,
            "{}",
            serde_json::to_string(&header).expect("header serializes")
        )?;
        let unit = self.metric.unit();
        for r in &self.records {
            let line = Line {
                arch: r.arch.to_string(),
                value: r.value,
                unit: unit.to_string(),
                split: r.split,
            };
            writeln!(
                out,
                "{}",
                serde_json::to_string(&line).expect("record serializes")
            )?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R, space: &SpaceDef) -> Result<Self> {
        let mut lines = input.lines();
        let header_text = lines.next().transpose()?.ok_or(DataError::Parse {
            line: 1,
            msg: "missing header line".into(),
        })?;
        let raw: serde_json::Value =
            serde_json::from_str(&header_text).map_err(|e| DataError::Parse {
                line: 1,
                msg: e.to_string(),
            })?;
        match raw.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => return Err(DataError::Version { found: v }),
            None => {
                return Err(DataError::Parse {
                    line: 1,
                    msg: "header lacks an integer schema_version".into(),
                })
            }
        }
        let header: Header = serde_json::from_value(raw).map_err(|e| DataError::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
        let (device, metric) = parse_name(&header.name)?;

        let mut records = Vec::with_capacity(header.count);
        for (i, text) in lines.enumerate() {
            let line = i + 2;
            let text = text?;
            if text.trim().is_empty() {
                continue;
            }
            let l: Line = serde_json::from_str(&text).map_err(|e| DataError::Parse {
                line,
                msg: e.to_string(),
            })?;
            if l.unit != metric.unit() {
                return Err(DataError::Invalid {
                    line,
                    msg: format!(
                        "unit {:?} does not match {} ({})",
                        l.unit,
                        header.name,
                        metric.unit()
                    ),
                });
            }
            let arch = space.parse_arch(&l.arch).map_err(|e| DataError::Invalid {
                line,
                msg: e.to_string(),
            })?;
            metric
                .check_value(l.value)
                .map_err(|msg| DataError::Invalid { line, msg })?;
            records.push(Record {
                arch,
                value: l.value,
                split: l.split,
            });
        }
        if records.len() != header.count {
            return Err(DataError::Parse {
                line: records.len() + 2,
                msg: format!(
                    "header announces {} records, found {}",
                    header.count,
                    records.len()
                ),
            });
        }
        Ok(Self {
            name: header.name,
            device,
            metric,
            records,
        })
    }

    pub fn load(path: impl AsRef<Path>, space: &SpaceDef) -> Result<Self> {
        Self::read_jsonl(BufReader::new(fs::File::open(path)?), space)
    }

    pub fn apply_split(&mut self, assignment: &SplitAssignment) -> Result<()> {
        if assignment.tags.len() != self.records.len() {
            return Err(DataError::Split(format!(
                "assignment covers {} records, dataset has {}",
                assignment.tags.len(),
                self.records.len()
            )));
        }
        for (r, &t) in self.records.iter_mut().zip(&assignment.tags) {
            r.split = Some(t);
        }
        Ok(())
    }

    /// One-hot features and values of the records tagged `split`.
    pub fn xy(&self, space: &SpaceDef, split: Split) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for r in self.records.iter().filter(|r| r.split == Some(split)) {
            x.push(space.encode(&r.arch)?);
            y.push(r.value);
        }
        Ok((x, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DataError::Split(format!(
                "ratios must be finite and nonnegative: {self:?}"
            )));
        }
        if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DataError::Split(format!("ratios must sum to 1: {self:?}")));
        }
        Ok(())
    }

    /// `(train, val, test)` sizes for `n` records; val and test are floored,
    /// the remainder goes to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let cut = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
        let (val, test) = (cut(self.val), cut(self.test));
        (n - val - test, val, test)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub ratios: SplitRatios,
    pub seed: u64,
    pub tags: Vec<Split>,
}

/// Seeded shuffle, then contiguous train/val/test cuts.
pub fn split(ds: &MetricDataset, ratios: SplitRatios, seed: u64) -> Result<SplitAssignment> {
    ratios.validate()?;
    let n = ds.records.len();
    if n < 3 {
        return Err(DataError::Split(format!(
            "need at least 3 records, got {n}"
        )));
    }
    let (train, val, _) = ratios.sizes(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed));
    let mut tags = vec![Split::Test; n];
    for (pos, &i) in order.iter().enumerate() {
        if pos < train {
            tags[i] = Split::Train;
        } else if pos < train + val {
            tags[i] = Split::Val;
        }
    }
    Ok(SplitAssignment { ratios, seed, tags })
}

/// Produces one metric value per architecture.
pub trait MetricOracle: Sync {
    fn device(&self) -> Option<&str>;
    fn metric(&self) -> Metric;
    fn measure(&self, arch: &Architecture) -> std::result::Result<f64, OracleError>;
}

/// Accuracy from training each architecture once under a fixed scheme.
pub struct AccuracyOracle<'a, T: TrainerOracle + ?Sized> {
    pub trainer: &'a T,
    pub scheme: TrainingScheme,
    pub seed: u64,
}

impl<T: TrainerOracle + ?Sized> MetricOracle for AccuracyOracle<'_, T> {
    fn device(&self) -> Option<&str> {
        None
    }

    fn metric(&self) -> Metric {
        Metric::Acc
    }

    fn measure(&self, arch: &Architecture) -> std::result::Result<f64, OracleError> {
        Ok(self
            .trainer
            .evaluate(arch, &self.scheme, self.seed)?
            .accuracy)
    }
}

/// Samples `n` distinct architectures and measures each with every oracle.
/// An architecture on which any oracle fails is dropped from all datasets,
/// so the datasets share one arch column.
pub fn collect<R: Rng + ?Sized>(
    space: &SpaceDef,
    n: usize,
    oracles: &[&dyn MetricOracle],
    rng: &mut R,
) -> Result<Vec<MetricDataset>> {
    if n == 0 {
        return Err(DataError::Collect("n must be at least 1".into()));
    }
    if oracles.is_empty() {
        return Err(DataError::Collect("no oracle given".into()));
    }
    let mut names = HashSet::new();
    for o in oracles {
        if !names.insert(dataset_name(o.device(), o.metric())) {
            return Err(DataError::Collect(format!(
                "two oracles produce {}",
                dataset_name(o.device(), o.metric())
            )));
        }
        if o.metric() == Metric::Lat && !o.device().is_some_and(|d| FPGA_DEVICES.contains(&d)) {
            log::warn!(
                "latency requested for {:?}; only FPGA devices report latency",
                o.device().unwrap_or("no device")
            );
        }
    }
    if (n as u64) > space.space_size().unwrap_or(u64::MAX) {
        return Err(DataError::Collect(format!(
            "space has fewer than {n} architectures"
        )));
    }
    let mut seen = HashSet::with_capacity(n);
    let mut archs = Vec::with_capacity(n);
    while archs.len() < n {
        let a = space.sample_uniform(rng);
        if seen.insert(a.clone()) {
            archs.push(a);
        }
    }

    let rows: Vec<Option<Vec<f64>>> = archs
        .par_iter()
        .map(|a| {
            oracles
                .iter()
                .map(|o| o.measure(a))
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| log::warn!("skipping {a}: {e}"))
                .ok()
        })
        .collect();

    let mut out: Vec<MetricDataset> = oracles
        .iter()
        .map(|o| MetricDataset::new(o.device(), o.metric(), Vec::with_capacity(n)))
        .collect();
    for (arch, row) in archs.into_iter().zip(rows) {
        let Some(values) = row else { continue };
        for (ds, value) in out.iter_mut().zip(values) {
            ds.records.push(Record {
                arch: arch.clone(),
                value,
                split: None,
            });
        }
    }
    for ds in &out {
        ds.validate(space)
            .map_err(|e| DataError::Collect(format!("{}: {e}", ds.name)))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names() {
        assert_eq!(dataset_name(None, Metric::Acc), "ANB-Acc");
        assert_eq!(dataset_name(Some("ZCU"), Metric::Lat), "ANB-ZCU-Lat");
        assert_eq!(
            parse_name("ANB-my-board-Thr").unwrap(),
            (Some("my-board".into()), Metric::Thr)
        );
        assert_eq!(parse_name("ANB-Acc").unwrap(), (None, Metric::Acc));
        for bad in [
            "ANB-Thr",
            "ANB-ZCU-Acc",
            "ANB--Lat",
            "NB-A100-Thr",
            "ANB-A100-Foo",
        ] {
            assert!(parse_name(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn split_sizes() {
        let r = SplitRatios::default();
        assert_eq!(r.sizes(10), (8, 1, 1));
        assert_eq!(r.sizes(5200), (4160, 520, 520));
        assert_eq!(r.sizes(3), (3, 0, 0));
        assert!(SplitRatios {
            train: 0.8,
            val: 0.1,
            test: 0.2
        }
        .validate()
        .is_err());
        assert!(SplitRatios {
            train: 1.1,
            val: -0.1,
            test: 0.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn value_ranges() {
        assert!(Metric::Acc.check_value(1.2).is_err());
        assert!(Metric::Acc.check_value(0.7).is_ok());
        assert!(Metric::Thr.check_value(0.0).is_err());
        assert!(Metric::Lat.check_value(f64::NAN).is_err());
    }
}
