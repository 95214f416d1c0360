use serde::{Deserialize, Serialize};

use super::{OptimError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerfDirection {
    Maximize,
    Minimize,
}

/// Indices of the non-dominated `(accuracy, perf)` points, by accuracy
/// ascending. A point is dominated when another is at least as good in both
/// objectives and strictly better in one; of identical points only the first
/// is kept.
pub fn pareto_front(points: &[(f64, f64)], direction: PerfDirection) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(OptimError::Config("pareto front of no points".into()));
    }
    if let Some(p) = points
        .iter()
        .find(|p| !(p.0.is_finite() && p.1.is_finite()))
    {
        return Err(OptimError::Config(format!("non-finite point {p:?}")));
    }
    let gain = |i: usize| match direction {
        PerfDirection::Maximize => points[i].1,
        PerfDirection::Minimize => -points[i].1,
    };
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[b]
            .0
            .total_cmp(&points[a].0)
            .then(gain(b).total_cmp(&gain(a)))
            .then(a.cmp(&b))
    });
    // sweeping by accuracy descending, a point survives only if it beats
    // every perf seen so far
    let mut front = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for i in order {
        if gain(i) > best {
            best = gain(i);
            front.push(i);
        }
    }
    front.reverse();
    Ok(front)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        assert_eq!(
            pareto_front(&[(0.5, 3.0)], PerfDirection::Maximize).unwrap(),
            [0]
        );
        let pts = [(0.7, 100.0), (0.8, 100.0)];
        assert_eq!(pareto_front(&pts, PerfDirection::Maximize).unwrap(), [1]);
        let pts = [(0.7, 1.0), (0.8, 2.0), (0.7, 1.0), (0.9, 3.0)];
        assert_eq!(
            pareto_front(&pts, PerfDirection::Minimize).unwrap(),
            [0, 1, 3]
        );
        assert_eq!(pareto_front(&pts, PerfDirection::Maximize).unwrap(), [3]);
        assert!(pareto_front(&[], PerfDirection::Maximize).is_err());
    }
}
