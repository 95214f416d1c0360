//! Versioned JSON model files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Gbdt, Node, RegressionTree, Result, SurrogateError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    metric_name: String,
    feature_dim: usize,
    base_score: f64,
    learning_rate: f64,
    trees: Vec<RegressionTree>,
}

impl Gbdt {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            metric_name: self.metric_name.clone(),
            feature_dim: self.feature_dim,
            base_score: self.base_score,
            learning_rate: self.learning_rate,
            trees: self.trees.clone(),
        };
        let mut s = serde_json::to_string(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Gbdt> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
            if e.is_eof() {
                SurrogateError::Truncated(e.to_string())
            } else {
                SurrogateError::Malformed(e.to_string())
            }
        })?;
        match value.get("format_version") {
            Some(v) if v.as_u64() == Some(u64::from(FORMAT_VERSION)) => {}
            Some(v) => {
                return Err(SurrogateError::Version {
                    found: v.to_string(),
                    expected: FORMAT_VERSION,
                })
            }
            None => return Err(SurrogateError::Malformed("missing format_version".into())),
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| SurrogateError::Malformed(e.to_string()))?;
        let model = Gbdt {
            metric_name: file.metric_name,
            feature_dim: file.feature_dim,
            base_score: file.base_score,
            learning_rate: file.learning_rate,
            trees: file.trees,
        };
        model.check_structure()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Gbdt> {
        Gbdt::from_json(&fs::read_to_string(path)?)
    }

    /// Rejects anything `fit` could not have produced: dangling or shared
    /// children, unreachable nodes, out-of-range features, non-finite numbers.
    fn check_structure(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(SurrogateError::Malformed(
                "feature_dim must be positive".into(),
            ));
        }
        if !self.base_score.is_finite() {
            return Err(SurrogateError::Malformed("base_score is not finite".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(SurrogateError::Malformed(
                "learning_rate must be in (0, 1]".into(),
            ));
        }
        for (t, tree) in self.trees.iter().enumerate() {
            let bad = |node: usize, reason: &str| SurrogateError::InvalidTree {
                tree: t,
                node,
                reason: reason.into(),
            };
            if tree.nodes.is_empty() {
                return Err(bad(0, "tree has no nodes"));
            }
            let mut parents = vec![0usize; tree.nodes.len()];
            for (i, node) in tree.nodes.iter().enumerate() {
                match *node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        if feature >= self.feature_dim {
                            return Err(bad(i, "split feature out of range"));
                        }
                        if !threshold.is_finite() {
                            return Err(bad(i, "threshold is not finite"));
                        }
                        // children after their parent rules out cycles
                        for child in [left, right] {
                            if child <= i || child >= tree.nodes.len() {
                                return Err(bad(i, "child index out of range"));
                            }
                            parents[child] += 1;
                        }
                        if left == right {
                            return Err(bad(i, "left and right children coincide"));
                        }
                    }
                    Node::Leaf { value } => {
                        if !value.is_finite() {
                            return Err(bad(i, "leaf value is not finite"));
                        }
                    }
                }
            }
            if let Some(i) = parents.iter().skip(1).position(|&p| p != 1) {
                return Err(bad(i + 1, "node must have exactly one parent"));
            }
        }
        Ok(())
    }
}
