use dyncover::analytic::*;
use dyncover::brute_force_step_distribution;
use dyncover::model::with_harmonics;
use proptest::prelude::*;

const LAMBDAS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

fn rel_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Non-visit probability of vertex `j` by multiplying the per-interval
/// Poisson-thinned survival factors `exp(-λ / (k0 + s - 2))` one by one.
fn survival_by_intervals(j: u32, horizon: u32, k0: u32, lambda: f64) -> f64 {
    let first_interval = if j <= k0 { 1 } else { j - k0 + 1 };
    (first_interval..=horizon)
        .map(|s| (-lambda / f64::from(k0 + s - 2)).exp())
        .product()
}

#[test]
fn covered_mean_equals_sum_of_visit_probabilities() {
    for k0 in 3..=10 {
        for lambda in LAMBDAS {
            for horizon in 1..=200 {
                let direct = expected_covered(horizon, k0, lambda);
                let summed: f64 = 1.0
                    + (2..k0 + horizon)
                        .map(|j| visit_prob(j, horizon, k0, lambda).unwrap())
                        .sum::<f64>();
                assert!(
                    rel_gap(direct, summed) <= 1e-12,
                    "k0={k0} lambda={lambda} T={horizon}: {direct} vs {summed}"
                );
            }
        }
    }
}

#[test]
fn visit_probabilities_match_interval_products() {
    for (k0, lambda, horizon) in [(3, 1.0, 7), (5, 0.3, 20), (9, 4.0, 3)] {
        for j in 2..k0 + horizon {
            let u = visit_prob(j, horizon, k0, lambda).unwrap();
            let survival = survival_by_intervals(j, horizon, k0, lambda);
            assert!((u - (1.0 - survival)).abs() < 1e-13, "j={j}");
        }
    }
}

#[test]
fn closed_forms_match_recursions() {
    for k0 in 3..=10 {
        for lambda in LAMBDAS {
            for horizon in 0..=200 {
                let p = no_return_prob(horizon, k0, lambda);
                let p_rec = no_return_prob_recursive(horizon, k0, lambda);
                assert!(rel_gap(p, p_rec) <= 1e-12, "P k0={k0} λ={lambda} T={horizon}: {p} vs {p_rec}");
                let q = at_start_prob(horizon, k0, lambda);
                let q_rec = at_start_prob_recursive(horizon, k0, lambda);
                assert!(rel_gap(q, q_rec) <= 1e-12, "Q k0={k0} λ={lambda} T={horizon}: {q} vs {q_rec}");
            }
        }
    }
}

#[test]
fn visit_probability_non_increasing_in_insertion_order() {
    for k0 in 3..=10 {
        for lambda in LAMBDAS {
            let horizon = 60;
            let probs: Vec<f64> = (k0 + 1..k0 + horizon + 2)
                .map(|j| visit_prob(j, horizon, k0, lambda).unwrap())
                .collect();
            assert!(probs.windows(2).all(|w| w[0] >= w[1]), "k0={k0} λ={lambda}");
        }
    }
}

#[test]
fn probability_outputs_stay_in_unit_interval() {
    for k0 in 3..=10 {
        for lambda in LAMBDAS {
            for horizon in (1..=200).step_by(7) {
                let mut values = vec![
                    at_start_prob(horizon, k0, lambda),
                    at_start_prob_recursive(horizon, k0, lambda),
                    unit_time_at_v(1.0, k0, lambda),
                    unit_time_at_v(0.0, k0, lambda),
                    azuma_tail_bound(3.0, horizon, k0),
                ];
                values.extend((1..k0 + horizon + 1).map(|j| visit_prob(j, horizon, k0, lambda).unwrap()));
                for v in values {
                    assert!((0.0..=1.0).contains(&v), "k0={k0} λ={lambda} T={horizon}: {v}");
                }
                let mean = expected_covered(horizon, k0, lambda);
                assert!((1.0..=f64::from(k0 + horizon - 1)).contains(&mean));
                assert!(variance_covered(horizon, k0, lambda) >= 0.0);
            }
        }
    }
}

#[test]
fn large_horizon_ratios_approach_limits() {
    for lambda in [0.5, 1.0, 2.0] {
        let t = 2000;
        let mean_ratio = expected_covered(t, 3, lambda) / f64::from(t);
        let var_ratio = variance_covered(t, 3, lambda) / f64::from(t);
        assert!((mean_ratio / expected_covered_asymptote(lambda) - 1.0).abs() < 0.05);
        assert!((var_ratio / variance_covered_asymptote(lambda) - 1.0).abs() < 0.05);
    }
}

#[test]
fn frozen_walker_closed_forms() {
    for k0 in 3..=6 {
        for horizon in 0..=30 {
            assert_eq!(expected_covered(horizon, k0, 0.0), 1.0);
            assert_eq!(variance_covered(horizon, k0, 0.0), 0.0);
            assert_eq!(expected_visits(horizon, k0, 0.0), 0.0);
            assert_eq!(at_start_prob(horizon, k0, 0.0), 1.0);
            assert_eq!(at_start_prob_recursive(horizon, k0, 0.0), 1.0);
        }
    }
}

#[test]
fn expected_visits_equals_per_interval_sum() {
    // Q(i) taken from the closed form instead of the memoized recursion
    for (k0, lambda, horizon) in [(3, 1.0, 40), (6, 0.4, 25), (4, 3.0, 60)] {
        let by_closed_form: f64 = (0..horizon)
            .map(|i| expected_visits_unit(at_start_prob(i, k0, lambda), k0 + i, lambda))
            .sum();
        assert!(rel_gap(expected_visits(horizon, k0, lambda), by_closed_form) < 1e-12);
    }
}

#[test]
fn step_return_matches_brute_force_grid() {
    for k0 in 3..=10u32 {
        for p in [0.0, 1.0 / f64::from(k0), 1.0] {
            let mut p0 = vec![(1.0 - p) / f64::from(k0 - 1); k0 as usize];
            p0[0] = p;
            for r in 0..=50 {
                let brute = brute_force_step_distribution(&p0, r)[0];
                let closed = step_return_prob(r, p, k0);
                assert!((brute - closed).abs() <= 1e-12, "k0={k0} p={p} r={r}");
            }
        }
    }
}

#[test]
fn harmonic_differences_use_cached_table() {
    with_harmonics(50, |h| {
        let direct: f64 = (21..=50).map(|i| 1.0 / f64::from(i)).sum();
        assert!((h[50] - h[20] - direct).abs() < 1e-15);
    });
}

proptest! {
    // r is kept small enough that the gap to 1/k0 stays far above rounding
    #[test]
    fn step_return_contracts_towards_uniform(k0 in 3u32..12, p in 0.0f64..=1.0, r in 0u32..8) {
        let k = f64::from(k0);
        prop_assume!((p - 1.0 / k).abs() > 1e-6);
        let now = (step_return_prob(r, p, k0) - 1.0 / k).abs();
        let next = (step_return_prob(r + 1, p, k0) - 1.0 / k).abs();
        prop_assert!(next < now);
        prop_assert!((next / now - 1.0 / (k - 1.0)).abs() < 1e-6);
    }

    #[test]
    fn unit_interval_probability_is_poisson_mixture_of_steps(k0 in 3u32..10, p in 0.0f64..=1.0, lambda in 0.0f64..4.0) {
        let mut mixture = 0.0;
        let mut weight = (-lambda).exp();
        for r in 0..200u32 {
            mixture += weight * step_return_prob(r, p, k0);
            weight *= lambda / f64::from(r + 1);
        }
        prop_assert!((mixture - unit_time_at_v(p, k0, lambda)).abs() < 1e-12);
    }

    #[test]
    fn unit_interval_visits_are_poisson_mixture_of_step_sums(k0 in 3u32..10, p in 0.0f64..=1.0, lambda in 0.0f64..4.0) {
        let mut mixture = 0.0;
        let mut weight = (-lambda).exp();
        let mut partial = 0.0;
        for r in 0..200u32 {
            if r > 0 {
                partial += step_return_prob(r, p, k0);
            }
            mixture += weight * partial;
            weight *= lambda / f64::from(r + 1);
        }
        prop_assert!((mixture - expected_visits_unit(p, k0, lambda)).abs() < 1e-12);
    }
}
