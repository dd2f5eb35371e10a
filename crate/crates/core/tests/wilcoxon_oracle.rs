//! Exactness of the signed-rank test against an independent sign-assignment
//! enumeration, plus the normal-approximation error bound at the exact
//! cutoff.

use culture_probe_core::metrics::fractional_ranks;
use culture_probe_core::psychnorms::{
    wilcoxon_one_sided_less, wilcoxon_signed_rank, wilcoxon_signed_rank_with_cutoff, WilcoxonMethod,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent oracle: recursively enumerate every sign assignment and count
/// those whose positive-rank sum does not exceed `w`.
fn oracle_count_le(ranks: &[f64], w: f64) -> u64 {
    fn recurse(ranks: &[f64], acc: f64, w: f64) -> u64 {
        match ranks.split_first() {
            None => u64::from(acc <= w + 1e-9),
            Some((first, rest)) => recurse(rest, acc, w) + recurse(rest, acc + first, w),
        }
    }
    recurse(ranks, 0.0, w)
}

fn oracle_two_sided(diffs: &[f64]) -> (f64, f64) {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    if nonzero.is_empty() {
        return (0.0, 1.0);
    }
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = fractional_ranks(&abs);
    let w_plus: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let w_minus: f64 = ranks.iter().sum::<f64>() - w_plus;
    let w = w_plus.min(w_minus);
    let total = 1u64 << ranks.len();
    let p = (2.0 * oracle_count_le(&ranks, w) as f64 / total as f64).min(1.0);
    (w, p)
}

fn random_diffs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            // quantized magnitudes so ties occur regularly; occasional zeros
            let magnitude = rng.random_range(0..=6) as f64 * 0.5;
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            magnitude * sign
        })
        .collect()
}

#[test]
fn exact_p_matches_enumeration_oracle_up_to_12() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 100 {
        let n = rng.random_range(1..=12);
        let diffs = random_diffs(&mut rng, n);
        let pairs: Vec<(f64, f64)> = diffs.iter().map(|d| (*d, 0.0)).collect();
        let result = wilcoxon_signed_rank(&pairs).unwrap();
        assert_eq!(result.method, WilcoxonMethod::Exact);
        let (oracle_w, oracle_p) = oracle_two_sided(&diffs);
        assert!(
            (result.statistic - oracle_w).abs() < 1e-9,
            "W mismatch on {diffs:?}"
        );
        assert!(
            (result.p_value - oracle_p).abs() < 1e-12,
            "p mismatch on {diffs:?}: got {}, oracle {}",
            result.p_value,
            oracle_p
        );
        checked += 1;
    }
}

#[test]
fn five_positive_distinct_differences() {
    let pairs: Vec<(f64, f64)> = (1..=5).map(|i| (i as f64, 0.0)).collect();
    let r = wilcoxon_signed_rank(&pairs).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert_eq!(r.n_effective, 5);
    assert!((r.p_value - 0.0625).abs() < 1e-15);
}

#[test]
fn normal_approximation_close_to_exact_at_cutoff() {
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    for _ in 0..100 {
        // n = 12 non-zero continuous differences; with tie-free magnitudes
        // the worst-case gap over every possible statistic is 0.0137
        let diffs: Vec<f64> = (0..12)
            .map(|_| {
                let magnitude = rng.random_range(0.01..5.0);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                magnitude * sign
            })
            .collect();
        let pairs: Vec<(f64, f64)> = diffs.iter().map(|d| (*d, 0.0)).collect();
        let exact = wilcoxon_signed_rank_with_cutoff(&pairs, 12).unwrap();
        let approx = wilcoxon_signed_rank_with_cutoff(&pairs, 0).unwrap();
        assert_eq!(exact.method, WilcoxonMethod::Exact);
        assert_eq!(approx.method, WilcoxonMethod::NormalApprox);
        assert!(
            (exact.p_value - approx.p_value).abs() < 0.02,
            "normal approximation off by {} on {diffs:?}",
            (exact.p_value - approx.p_value).abs()
        );
    }
}

#[test]
fn one_sided_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let n = rng.random_range(1..=10);
        let diffs = random_diffs(&mut rng, n);
        let pairs: Vec<(f64, f64)> = diffs.iter().map(|d| (*d, 0.0)).collect();
        let (p, _) = wilcoxon_one_sided_less(&pairs, 12).unwrap();

        let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
        let oracle_p = if nonzero.is_empty() {
            1.0
        } else {
            let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
            let ranks = fractional_ranks(&abs);
            let w_plus: f64 = nonzero
                .iter()
                .zip(&ranks)
                .filter(|(d, _)| **d > 0.0)
                .map(|(_, r)| r)
                .sum();
            oracle_count_le(&ranks, w_plus) as f64 / (1u64 << ranks.len()) as f64
        };
        assert!(
            (p - oracle_p).abs() < 1e-12,
            "one-sided mismatch on {diffs:?}"
        );
    }
}
