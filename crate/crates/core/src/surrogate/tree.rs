//! Least-squares regression trees grown level by level with exact greedy
//! splits.
//!
//! Every feature column is presorted once per fit. Growing one level visits
//! each candidate feature once for all open nodes together: low-cardinality
//! features (the one-hot encodings) accumulate per-node histograms over their
//! distinct values, others scan the sorted order with running left-hand
//! statistics. Both see the same candidate thresholds.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    /// Raw leaf output for `x`. The caller guarantees `x` is long enough.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
                Node::Leaf { value } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    /// Features tested anywhere in the tree.
    pub fn split_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

/// Column-major copy of the training matrix, per-feature row orderings and
/// per-feature distinct values with each row's index into them.
pub(crate) struct Columns {
    pub values: Vec<Vec<f64>>,
    pub order: Vec<Vec<u32>>,
    pub distinct: Vec<Vec<f64>>,
    /// Offset of each feature's first distinct value in a flat histogram.
    pub offsets: Vec<usize>,
    pub total_bins: usize,
    /// Row-major `offsets[f] + index of x[f] in distinct[f]`.
    pub row_bins: Vec<u32>,
    dim: usize,
}

impl Columns {
    pub fn new(rows: &[Vec<f64>], dim: usize) -> Self {
        let n = rows.len();
        let values: Vec<Vec<f64>> = (0..dim)
            .map(|f| rows.iter().map(|r| r[f]).collect())
            .collect();
        let order: Vec<Vec<u32>> = values
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        let mut distinct = Vec::with_capacity(dim);
        let mut offsets = Vec::with_capacity(dim);
        let mut row_bins = vec![0u32; n * dim];
        let mut total_bins = 0;
        for (f, (col, ord)) in values.iter().zip(&order).enumerate() {
            let mut d: Vec<f64> = Vec::new();
            for &r in ord {
                let v = col[r as usize];
                if d.last() != Some(&v) {
                    d.push(v);
                }
                row_bins[r as usize * dim + f] = (total_bins + d.len() - 1) as u32;
            }
            offsets.push(total_bins);
            total_bins += d.len();
            distinct.push(d);
        }
        Self {
            values,
            order,
            distinct,
            offsets,
            total_bins,
            row_bins,
            dim,
        }
    }

    pub fn rows(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

pub(crate) struct GrowParams<'a> {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features considered by this tree, ascending.
    pub features: &'a [usize],
}

#[derive(Clone, Copy, Default)]
struct Stats {
    count: usize,
    sum: f64,
    sum_sq: f64,
}

impl Stats {
    fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn score(&self) -> f64 {
        self.sum * self.sum / self.count as f64
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

const NO_NODE: u32 = u32::MAX;

/// Scores the split `x <= (lo + hi) / 2` of a node whose rows with
/// `x <= lo` sum to `left`. Earlier candidates win ties.
#[allow(clippy::too_many_arguments)]
fn consider(
    best: &mut Option<Candidate>,
    total: &Stats,
    left_count: usize,
    left_sum: f64,
    min_leaf: usize,
    feature: usize,
    lo: f64,
    hi: f64,
) {
    let rc = total.count - left_count;
    if left_count < min_leaf || rc < min_leaf {
        return;
    }
    let l = Stats {
        count: left_count,
        sum: left_sum,
        sum_sq: 0.0,
    };
    let r = Stats {
        count: rc,
        sum: total.sum - left_sum,
        sum_sq: 0.0,
    };
    let gain = l.score() + r.score() - total.score();
    if gain > 1e-12 * total.sum_sq && best.is_none_or(|b| gain > b.gain) {
        *best = Some(Candidate {
            gain,
            feature,
            threshold: lo + (hi - lo) / 2.0,
        });
    }
}

/// Fits one tree to `targets` over the rows flagged in `in_sample`.
pub(crate) fn grow(
    cols: &Columns,
    targets: &[f64],
    in_sample: &[bool],
    params: &GrowParams<'_>,
) -> RegressionTree {
    let n = cols.rows();
    let min_leaf = params.min_samples_leaf;
    let mut row_node = vec![NO_NODE; n];
    let mut root = Stats::default();
    for r in 0..n {
        if in_sample[r] {
            row_node[r] = 0;
            root.push(targets[r]);
        }
    }
    let mut nodes = vec![Node::Leaf {
        value: leaf_value(&root),
    }];
    // (node id, stats) of nodes that may still split
    let mut frontier = vec![(0usize, root)];
    let mut slot_of = vec![usize::MAX; 1];
    let mut row_slot = vec![NO_NODE; n];
    let mut hist: Vec<(usize, f64)> = Vec::new();

    for _depth in 0..params.max_depth {
        frontier.retain(|(_, s)| s.count >= 2 * min_leaf && s.count >= 2);
        if frontier.is_empty() {
            break;
        }
        slot_of.resize(nodes.len(), usize::MAX);
        slot_of.iter_mut().for_each(|s| *s = usize::MAX);
        for (slot, (id, _)) in frontier.iter().enumerate() {
            slot_of[*id] = slot;
        }
        for r in 0..n {
            row_slot[r] = match row_node[r] {
                NO_NODE => NO_NODE,
                node => match slot_of[node as usize] {
                    usize::MAX => NO_NODE,
                    s => s as u32,
                },
            };
        }

        let slots = frontier.len();
        let mut best: Vec<Option<Candidate>> = vec![None; slots];
        // few distinct values: per-node histograms, filled in one row pass
        let use_hist = |f: usize| slots * cols.distinct[f].len() <= 4 * n;
        let hist_features: Vec<usize> = params
            .features
            .iter()
            .copied()
            .filter(|&f| cols.distinct[f].len() >= 2 && use_hist(f))
            .collect();
        if !hist_features.is_empty() {
            let width = cols.total_bins;
            hist.clear();
            hist.resize(slots * width, (0, 0.0));
            for r in 0..n {
                let s = row_slot[r];
                if s == NO_NODE {
                    continue;
                }
                let t = targets[r];
                let h = &mut hist[s as usize * width..(s as usize + 1) * width];
                let bins = &cols.row_bins[r * cols.dim..(r + 1) * cols.dim];
                for &f in &hist_features {
                    let cell = &mut h[bins[f] as usize];
                    cell.0 += 1;
                    cell.1 += t;
                }
            }
        }
        for &f in params.features {
            let distinct = &cols.distinct[f];
            let nb = distinct.len();
            if nb < 2 {
                continue;
            }
            if use_hist(f) {
                let off = cols.offsets[f];
                for (slot, (_, total)) in frontier.iter().enumerate() {
                    let (mut lc, mut ls, mut last) = (0usize, 0.0f64, 0.0f64);
                    let base = slot * cols.total_bins + off;
                    for (b, &(c, s)) in hist[base..base + nb].iter().enumerate() {
                        if c == 0 {
                            continue;
                        }
                        if lc > 0 {
                            consider(
                                &mut best[slot],
                                total,
                                lc,
                                ls,
                                min_leaf,
                                f,
                                last,
                                distinct[b],
                            );
                        }
                        lc += c;
                        ls += s;
                        last = distinct[b];
                    }
                }
            } else {
                let mut left = vec![(0usize, 0.0f64, 0.0f64); slots];
                let col = &cols.values[f];
                for &r in &cols.order[f] {
                    let r = r as usize;
                    let s = row_slot[r];
                    if s == NO_NODE {
                        continue;
                    }
                    let slot = s as usize;
                    let v = col[r];
                    let (lc, ls, last) = &mut left[slot];
                    if *lc > 0 && v > *last {
                        consider(
                            &mut best[slot],
                            &frontier[slot].1,
                            *lc,
                            *ls,
                            min_leaf,
                            f,
                            *last,
                            v,
                        );
                    }
                    *lc += 1;
                    *ls += targets[r];
                    *last = v;
                }
            }
        }

        // children of a split node get consecutive ids: left, right
        let mut child_ids = vec![(0usize, 0usize); frontier.len()];
        for (slot, cand) in best.iter().enumerate() {
            if let Some(c) = cand {
                let l = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[frontier[slot].0] = Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left: l,
                    right: l + 1,
                };
                child_ids[slot] = (l, l + 1);
            }
        }
        let mut child_stats = vec![(Stats::default(), Stats::default()); frontier.len()];
        for r in 0..n {
            let node = row_node[r];
            if node == NO_NODE {
                continue;
            }
            let slot = slot_of[node as usize];
            if slot == usize::MAX {
                continue;
            }
            let Some(c) = best[slot] else { continue };
            let (l, rt) = child_ids[slot];
            if cols.values[c.feature][r] <= c.threshold {
                row_node[r] = l as u32;
                child_stats[slot].0.push(targets[r]);
            } else {
                row_node[r] = rt as u32;
                child_stats[slot].1.push(targets[r]);
            }
        }
        let mut next = Vec::new();
        for (slot, cand) in best.iter().enumerate() {
            if cand.is_some() {
                let (l, rt) = child_ids[slot];
                let (ls, rs) = child_stats[slot];
                nodes[l] = Node::Leaf {
                    value: leaf_value(&ls),
                };
                nodes[rt] = Node::Leaf {
                    value: leaf_value(&rs),
                };
                next.push((l, ls));
                next.push((rt, rs));
            }
        }
        frontier = next;
    }
    RegressionTree { nodes }
}

fn leaf_value(s: &Stats) -> f64 {
    if s.count == 0 {
        0.0
    } else {
        s.sum / s.count as f64
    }
}
