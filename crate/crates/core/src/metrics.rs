//! Rank-correlation and regression fit metrics.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
}

fn check_pair(xs: &[f64], ys: &[f64], min_len: usize) -> Result<(), MetricError> {
    if xs.len() != ys.len() {
        return Err(MetricError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < min_len {
        return Err(MetricError::TooFewSamples {
            needed: min_len,
            got: xs.len(),
        });
    }
    if let Some(index) = xs
        .iter()
        .zip(ys)
        .position(|(x, y)| !x.is_finite() || !y.is_finite())
    {
        return Err(MetricError::NonFinite { index });
    }
    Ok(())
}

/// Number of pairs within runs of equal consecutive values.
fn tied_pairs<T: PartialEq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for v in sorted {
        if prev.as_ref() == Some(&v) {
            run += 1;
        } else {
            total += run * (run.saturating_sub(1)) / 2;
            run = 1;
        }
        prev = Some(v);
    }
    total + run * (run.saturating_sub(1)) / 2
}

/// Merge sort on `v`, returning the number of strict inversions.
fn sort_count_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        sort_count_swaps(left, bl) + sort_count_swaps(right, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm).
///
/// `tau = (C - D) / sqrt((C + D + Tx) (C + D + Ty))` where `Tx`/`Ty` count
/// pairs tied only in x / only in y.
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> Result<f64, MetricError> {
    check_pair(xs, ys, 2)?;
    let n = xs.len() as u64;
    let total_pairs = n * (n - 1) / 2;

    // `+ 0.0` folds -0.0 into 0.0 so total_cmp agrees with ==.
    let mut pairs: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x + 0.0, y + 0.0)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let x_ties = tied_pairs(pairs.iter().map(|p| p.0));
    let joint_ties = tied_pairs(pairs.iter().copied());

    let mut ys_sorted: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; ys_sorted.len()];
    let swaps = sort_count_swaps(&mut ys_sorted, &mut buf);
    let y_ties = tied_pairs(ys_sorted.iter().copied());

    let not_tied_x = total_pairs - x_ties;
    let not_tied_y = total_pairs - y_ties;
    if not_tied_x == 0 || not_tied_y == 0 {
        return Err(MetricError::Degenerate("all values tied on one axis"));
    }
    // C - D = pairs untied in both axes minus twice the discordant ones.
    let untied_both = (total_pairs + joint_ties) as i64 - (x_ties + y_ties) as i64;
    let concordant_minus_discordant = untied_both - 2 * swaps as i64;
    Ok(concordant_minus_discordant as f64 / ((not_tied_x as f64) * (not_tied_y as f64)).sqrt())
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r_squared(truth: &[f64], pred: &[f64]) -> Result<f64, MetricError> {
    check_pair(truth, pred, 2)?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(MetricError::Degenerate("constant truth"));
    }
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn mean_abs_error(truth: &[f64], pred: &[f64]) -> Result<f64, MetricError> {
    check_pair(truth, pred, 1)?;
    Ok(truth
        .iter()
        .zip(pred)
        .map(|(t, p)| (t - p).abs())
        .sum::<f64>()
        / truth.len() as f64)
}
