//! Oracle parity for the rank-correlation stack: the tie-free Spearman
//! implementation must match the classic sum-of-squared-rank-differences
//! formula on every permutation, and the ranking reward must reproduce a
//! frozen fixture suite exactly.

use culture_probe_core::metrics::{precision_at_k, ranking_reward, spearman};
use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent oracle: rho = 1 - 6 * sum(d^2) / (n (n^2 - 1)), valid only
/// when both sides are tie-free. Ranks computed by position in sorted order.
fn sigma_d_squared_rho(a: &[f64], b: &[f64]) -> f64 {
    fn plain_ranks(values: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let mut ranks = vec![0.0; values.len()];
        for (rank, &idx) in order.iter().enumerate() {
            ranks[idx] = (rank + 1) as f64;
        }
        ranks
    }
    let ra = plain_ranks(a);
    let rb = plain_ranks(b);
    let n = a.len() as f64;
    let d_squared: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
    1.0 - 6.0 * d_squared / (n * (n * n - 1.0))
}

#[test]
fn spearman_matches_oracle_on_all_permutations_up_to_6() {
    for n in 2..=6usize {
        let identity: Vec<f64> = (0..n).map(|i| i as f64).collect();
        for perm in (0..n).permutations(n) {
            let permuted: Vec<f64> = perm.iter().map(|&i| i as f64).collect();
            let got = spearman(&identity, &permuted)
                .unwrap()
                .expect("tie-free permutations are never constant for n >= 2");
            let expected = sigma_d_squared_rho(&identity, &permuted);
            assert!(
                (got - expected).abs() < 1e-12,
                "n={n} perm={perm:?}: got {got}, oracle {expected}"
            );
        }
    }
}

#[test]
fn spearman_matches_oracle_on_random_tie_free_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..500 {
        let n = rng.random_range(2..=12);
        let mut a: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut b = a.clone();
        for i in (1..n).rev() {
            a.swap(i, rng.random_range(0..=i));
            b.swap(i, rng.random_range(0..=i));
        }
        let got = spearman(&a, &b).unwrap().unwrap();
        let expected = sigma_d_squared_rho(&a, &b);
        assert!((got - expected).abs() < 1e-12);
    }
}

fn truth10() -> Vec<String> {
    [
        "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn ranked(words: &[&str]) -> String {
    let mut text = String::from("Final Ranking:\n");
    for (i, w) in words.iter().enumerate() {
        text.push_str(&format!("Rank {}: {}\n", i + 1, w));
    }
    text
}

/// Twenty reward fixtures with expected values frozen from the
/// sum-of-squared-differences oracle on the filtered subsets. Undefined
/// correlations (zero or singleton overlap) take the -1.0 fallback.
#[test]
fn ranking_reward_fixture_suite() {
    let truth = truth10();
    let cases: Vec<(String, f64)> = vec![
        // 1. exact order
        (
            ranked(&[
                "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india",
                "juliet",
            ]),
            1.0,
        ),
        // 2. full reverse
        (
            ranked(&[
                "juliet", "india", "hotel", "golf", "foxtrot", "echo", "delta", "charlie", "bravo",
                "alpha",
            ]),
            -1.0,
        ),
        // 3. zero overlap
        (ranked(&["zebra", "yak", "xerus"]), -1.0),
        // 4. free prose, no rank lines
        (
            "these words all relate to the cue somehow".to_string(),
            -1.0,
        ),
        // 5. singleton overlap
        (ranked(&["alpha", "zebra", "yak"]), -1.0),
        // 6. reversed even-position subset
        (ranked(&["india", "golf", "echo", "charlie", "alpha"]), -1.0),
        // 7. order-preserving subset
        (ranked(&["alpha", "charlie", "echo", "golf", "india"]), 1.0),
        // 8. ordered pair
        (ranked(&["alpha", "bravo"]), 1.0),
        // 9. reversed pair
        (ranked(&["bravo", "alpha"]), -1.0),
        // 10. permutation [2,0,1,4,3]: sum d^2 = 8 over n=5
        (ranked(&["charlie", "alpha", "bravo", "echo", "delta"]), 0.6),
        // 11. duplicate kept at earliest rank
        (ranked(&["alpha", "bravo", "alpha", "charlie"]), 1.0),
        // 12. case and whitespace variants
        (
            "final ranking:\nRank 1:  ALPHA \nRANK 2: Bravo\nrank 3: charlie\n".to_string(),
            1.0,
        ),
        // 13. novel words interleaved are filtered out
        (ranked(&["alpha", "zebra", "bravo", "yak", "charlie"]), 1.0),
        // 14. reversed 3-prefix
        (ranked(&["charlie", "bravo", "alpha"]), -1.0),
        // 15. only the section after the last marker counts
        (
            format!(
                "Rank 1: juliet\nRank 2: india\nLet me reconsider.\n{}",
                ranked(&["delta", "echo"])
            ),
            1.0,
        ),
        // 16. adjacent swap in the full list: sum d^2 = 2 over n=10
        (
            ranked(&[
                "bravo", "alpha", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india",
                "juliet",
            ]),
            1.0 - 12.0 / 990.0,
        ),
        // 17. reversed 5-prefix
        (
            ranked(&["echo", "delta", "charlie", "bravo", "alpha"]),
            -1.0,
        ),
        // 18. one inversion among 4: sum d^2 = 2 over n=4
        (ranked(&["alpha", "charlie", "bravo", "delta"]), 0.8),
        // 19. rotation by one: sum d^2 = 90 over n=10
        (
            ranked(&[
                "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet",
                "alpha",
            ]),
            1.0 - 540.0 / 990.0,
        ),
        // 20. sparse subset [6,9,0]: sum d^2 = 6 over n=3
        (ranked(&["golf", "juliet", "alpha"]), -0.5),
    ];

    assert_eq!(cases.len(), 20);
    for (i, (text, expected)) in cases.iter().enumerate() {
        let got = ranking_reward(text, &truth);
        assert!(
            (got - expected).abs() < 1e-12,
            "case {}: got {got}, expected {expected}\n{text}",
            i + 1
        );
    }
}

#[test]
fn reward_bounds_hold_on_random_responses() {
    let truth = truth10();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let n = rng.random_range(0..=10);
        let mut pool: Vec<&str> = truth.iter().map(String::as_str).collect();
        pool.extend(["zebra", "yak", "xerus", "wolf"]);
        let mut words = Vec::new();
        for _ in 0..n {
            words.push(pool[rng.random_range(0..pool.len())]);
        }
        let reward = ranking_reward(&ranked(&words), &truth);
        assert!(
            (-1.0..=1.0).contains(&reward),
            "reward {reward} out of range"
        );
    }
}

/// Precision@K: monotone non-increasing in K once every generated word sits
/// inside the smallest human top-K, and k * P@K is always an integer count
/// bounded by k.
#[test]
fn precision_monotonicity_and_integrality_over_random_fixtures() {
    let ks = [5usize, 10, 20, 30, 40];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let vocab: Vec<String> = (0..60).map(|i| format!("w{i:02}")).collect();

    for _ in 0..10_000 {
        let human_len = rng.random_range(5..=50);
        let mut human: Vec<String> = vocab.clone();
        for i in (1..human.len()).rev() {
            human.swap(i, rng.random_range(0..=i));
        }
        human.truncate(human_len);

        // generated words drawn from the human top-5 (may be fewer than 5)
        let mut generated: Vec<String> = human[..5.min(human_len)].to_vec();
        for i in (1..generated.len()).rev() {
            generated.swap(i, rng.random_range(0..=i));
        }
        generated.truncate(rng.random_range(1..=generated.len()));

        let mut previous = f64::INFINITY;
        for &k in &ks {
            let human_top_k: Vec<String> = human.iter().take(k).cloned().collect();
            let p = precision_at_k(&generated, &human_top_k, k);
            assert!(p <= previous + 1e-12, "P@K increased at k={k}");
            previous = p;
            let count = p * k as f64;
            assert!((count - count.round()).abs() < 1e-9, "k*P@K not integral");
            assert!(count.round() as usize <= k);
        }

        // integrality must also hold for arbitrary generated lists
        let mut arbitrary: Vec<String> = (0..rng.random_range(0..=20))
            .map(|_| vocab[rng.random_range(0..vocab.len())].clone())
            .collect();
        arbitrary.dedup();
        for &k in &ks {
            let human_top_k: Vec<String> = human.iter().take(k).cloned().collect();
            let p = precision_at_k(&arbitrary, &human_top_k, k);
            let count = p * k as f64;
            assert!((count - count.round()).abs() < 1e-9);
            assert!((0.0..=1.0).contains(&p));
        }
    }
}
