#[path = "common/oracle.rs"]
mod oracle;

use oracle::{
    brute_force_beta, brute_force_counts, brute_force_em_update, brute_force_likelihood, for_each_path, path_joint,
    random_model, random_sequence,
};
use markov_diffusion::hmm::{credit_gradient, credit_trace, em_step, forward, forward_backward, train};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn likelihood_matches_enumeration(seed in any::<u64>(), n in 1usize..5, k in 1usize..4, len in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(n, k, &mut rng);
        let y = random_sequence(k, len, &mut rng);
        let oracle = brute_force_likelihood(&m, &y).ln();
        prop_assert!(close(forward(&m, &y).unwrap().log_likelihood, oracle, 1e-12));
        prop_assert!(close(forward_backward(&m, &y).unwrap().log_likelihood, oracle, 1e-12));
    }

    #[test]
    fn beta_and_gradient_match_enumeration(seed in any::<u64>(), n in 1usize..4, len in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(n, 3, &mut rng);
        let y = random_sequence(3, len, &mut rng);
        let fb = forward_backward(&m, &y).unwrap();
        for t in 1..=len {
            let oracle = brute_force_beta(&m, &y, t);
            let g = credit_gradient(&m, &y, t).unwrap();
            for ((b, g), o) in fb.unscaled_beta(t).iter().zip(&g).zip(&oracle) {
                prop_assert!(close(*b, *o, 1e-10));
                prop_assert!(close(*g, *o, 1e-10));
            }
        }
    }

    #[test]
    fn posteriors_match_enumeration(seed in any::<u64>(), n in 1usize..4, len in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(n, 2, &mut rng);
        let y = random_sequence(2, len, &mut rng);
        let fb = forward_backward(&m, &y).unwrap();
        let l = brute_force_likelihood(&m, &y);
        let mut occupancy = vec![vec![0.0; n]; len + 1];
        for_each_path(n, len + 1, |p| {
            let w = path_joint(&m, &y, p) / l;
            for (t, &x) in p.iter().enumerate() {
                occupancy[t][x] += w;
            }
        });
        for t in 1..=len {
            for (g, o) in fb.gamma(t).iter().zip(&occupancy[t]) {
                prop_assert!((g - o).abs() < 1e-10);
            }
        }
        let emitted: f64 = brute_force_counts(&m, &y).emissions.iter().flatten().sum();
        prop_assert!(close(emitted, len as f64, 1e-12));
    }

    #[test]
    fn em_update_matches_enumeration(seed in any::<u64>(), n in 1usize..4, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(n, k, &mut rng);
        let data: Vec<_> = (1..4).map(|len| random_sequence(k, len, &mut rng)).collect();
        let (next, ll) = em_step(&m, &data).unwrap();
        let oracle_ll: f64 = data.iter().map(|y| brute_force_likelihood(&m, y).ln()).sum();
        prop_assert!(close(ll, oracle_ll, 1e-12));
        let (a, b, pi) = brute_force_em_update(&m, &data);
        for i in 0..n {
            prop_assert!((next.initial().as_slice()[i] - pi[i]).abs() < 1e-10);
            for j in 0..n {
                prop_assert!((next.transitions().get(i, j) - a[i][j]).abs() < 1e-10);
            }
            for l in 0..k {
                prop_assert!((next.emissions()[(l, i)] - b[l][i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn training_history_never_decreases(seed in any::<u64>(), n in 1usize..6, k in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(n, k, &mut rng);
        let data: Vec<_> = (0..4).map(|i| random_sequence(k, 5 + 3 * i, &mut rng)).collect();
        let run = train(&m, &data, 30, 1e-12).unwrap();
        let mut prev = run.initial_log_likelihood;
        for &ll in &run.history {
            prop_assert!(ll >= prev - 1e-10);
            prev = ll;
        }
    }

    #[test]
    fn credit_trace_respects_birkhoff_bound(seed in any::<u64>(), n in 2usize..6, len in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(n, 3, &mut rng);
        let y = random_sequence(3, len, &mut rng);
        let trace = credit_trace(&m, &y).unwrap();
        prop_assert_eq!(trace.tau1_series.len(), len);
        for (tau, bound) in trace.tau1_series.iter().zip(&trace.birkhoff_bound_series) {
            let tau = tau.unwrap();
            prop_assert!((0.0..=1.0).contains(&tau));
            prop_assert!(tau <= bound + 1e-12);
        }
    }
}
