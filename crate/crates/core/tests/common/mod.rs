//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

/// O(n^2) Kendall tau-b by explicit pair enumeration.
pub fn brute_force_tau(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    let (mut concordant, mut discordant, mut only_x, mut only_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = xs[i] - xs[j];
            let dy = ys[i] - ys[j];
            match (dx == 0.0, dy == 0.0) {
                (true, true) => {}
                (true, false) => only_x += 1,
                (false, true) => only_y += 1,
                (false, false) => {
                    if (dx > 0.0) == (dy > 0.0) {
                        concordant += 1
                    } else {
                        discordant += 1
                    }
                }
            }
        }
    }
    let a = (concordant + discordant + only_x) as u64;
    let b = (concordant + discordant + only_y) as u64;
    if a == 0 || b == 0 {
        return None;
    }
    Some((concordant - discordant) as f64 / ((a as f64) * (b as f64)).sqrt())
}

/// O(n^2) weak-dominance filter. `maximize_perf` selects the perf direction.
/// Returns the sorted, deduplicated non-dominated points.
pub fn brute_force_front(points: &[(f64, f64)], maximize_perf: bool) -> Vec<(f64, f64)> {
    let better_or_eq = |a: f64, b: f64| if maximize_perf { a >= b } else { a <= b };
    let strictly = |a: f64, b: f64| if maximize_perf { a > b } else { a < b };
    let mut front: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| {
            !points
                .iter()
                .any(|q| q.0 >= p.0 && better_or_eq(q.1, p.1) && (q.0 > p.0 || strictly(q.1, p.1)))
        })
        .copied()
        .collect();
    front.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    front.dedup();
    front
}
