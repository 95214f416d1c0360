mod common;

use anb::metrics::{kendall_tau, mean_abs_error, r_squared};
use anb::seeded_rng;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn fast_tau_equals_quadratic_oracle_on_seeded_vectors() {
    let mut rng = seeded_rng(2024);
    let mut checked = 0;
    for case in 0..1000 {
        let n = rng.random_range(2..200);
        // every other case draws from a small alphabet to force ties
        let levels = if case % 2 == 0 { 5 } else { 1_000_000 };
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
        match common::brute_force_tau(&xs, &ys) {
            Some(expected) => {
                assert_eq!(kendall_tau(&xs, &ys).unwrap(), expected, "case {case}");
                checked += 1;
            }
            None => assert!(kendall_tau(&xs, &ys).is_err()),
        }
    }
    assert!(checked > 990);
}

proptest! {
    #[test]
    fn tau_symmetric_and_matches_oracle(
        pairs in prop::collection::vec((0u8..20, 0u8..20), 2..60)
    ) {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let oracle = common::brute_force_tau(&xs, &ys);
        let fast = kendall_tau(&xs, &ys).ok();
        prop_assert_eq!(fast, oracle);
        prop_assert_eq!(kendall_tau(&ys, &xs).ok(), fast);
    }

    #[test]
    fn tau_invariant_under_increasing_transform(
        pairs in prop::collection::vec((0.1f64..10.0, -5.0f64..5.0), 2..60)
    ) {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let cubed: Vec<f64> = xs.iter().map(|x| x.powi(3)).collect();
        prop_assert_eq!(kendall_tau(&xs, &ys).ok(), kendall_tau(&cubed, &ys).ok());
    }

    #[test]
    fn r_squared_at_most_one(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..50)
    ) {
        let truth: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let pred: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        if let Ok(r2) = r_squared(&truth, &pred) {
            prop_assert!(r2 <= 1.0);
            prop_assert_eq!(r_squared(&truth, &truth).unwrap(), 1.0);
        }
    }

    #[test]
    fn mae_invariant_under_joint_permutation(
        mut pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..50),
        seed in any::<u64>(),
    ) {
        let split = |p: &[(f64, f64)]| -> (Vec<f64>, Vec<f64>) { p.iter().copied().unzip() };
        let (t, p) = split(&pairs);
        let before = mean_abs_error(&t, &p).unwrap();
        use rand::seq::SliceRandom;
        pairs.shuffle(&mut seeded_rng(seed));
        let (t, p) = split(&pairs);
        prop_assert!((mean_abs_error(&t, &p).unwrap() - before).abs() <= 1e-12 * (1.0 + before));
    }
}
