use beliefctl_core::aggregation::{FeatureSpace, RepresentativeSet};
use beliefctl_core::particle::systematic_resample;
use beliefctl_core::pomdp::{belief_update, observation_distribution, Belief, DenseModel, Pomdp};
use beliefctl_core::recovery::{RecoveryModel, RecoveryParams};
use beliefctl_core::rng::stream;
use proptest::prelude::*;

fn simplex_point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, dim).prop_map(|w| {
        let w: Vec<f64> = w.into_iter().map(|x| x * x * x + 1e-12).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn updated_beliefs_are_distributions(seed in 0u64..1000, b in simplex_point(3), u in 0usize..2) {
        let model = DenseModel::random(3, 2, 3, 0.9, &mut stream(seed, &[])).unwrap();
        let b = Belief::new(b).unwrap();
        let dist = observation_distribution(&model, &b, u);
        prop_assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for z in 0..3 {
            if dist[z] > 0.0 {
                let next = belief_update(&model, &b, u, z).unwrap();
                prop_assert!((next.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(next.probs().iter().all(|p| *p >= 0.0));
            }
        }
    }

    #[test]
    fn recovery_rows_are_stochastic(i in 0usize..8, u in 0usize..8, rate in 0.0f64..0.5) {
        let mut params = RecoveryParams::new(3);
        params.base_compromise_rate = rate;
        let model = RecoveryModel::new(&params).unwrap();
        let row: f64 = (0..8).map(|j| model.transition(i, u, j)).sum();
        prop_assert!((row - 1.0).abs() < 1e-12);
        let obs: f64 = (0..model.num_observations()).map(|z| model.observation(z, i, u)).sum();
        prop_assert!((obs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snapping_is_idempotent(q in simplex_point(4), rho in 1u32..12) {
        let reps = RepresentativeSet::enumerate(4, rho).unwrap();
        let k = reps.nearest(&q);
        prop_assert_eq!(reps.nearest(&reps.point(k)), k);
        prop_assert_eq!(reps.nearest(&q), k);
    }

    #[test]
    fn cells_have_bounded_diameter(a in simplex_point(5), t in 0.0f64..1.0, rho in 1u32..10) {
        // Any belief lies within n/ρ (L1) of its representative, so two
        // beliefs sharing a cell lie within 2n/ρ of each other.
        let n = 5.0;
        let reps = RepresentativeSet::enumerate(5, rho).unwrap();
        let k = reps.nearest(&a);
        let rep = reps.point(k);
        prop_assert!(l1(&a, &rep) <= n / rho as f64 + 1e-9);
        let b: Vec<f64> = a.iter().zip(&rep).map(|(x, y)| x + t * (y - x)).collect();
        if reps.nearest(&b) == k {
            prop_assert!(l1(&a, &b) <= 2.0 * n / rho as f64 + 1e-9);
        }
    }

    #[test]
    fn feature_beliefs_are_distributions(b in simplex_point(6)) {
        let fs = FeatureSpace::from_assignment(vec![0, 0, 1, 2, 2, 2], 3).unwrap();
        let q = fs.feature_belief(&b);
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let back = fs.disaggregate(&q);
        prop_assert_eq!(fs.feature_belief(back.probs()).len(), 3);
        for (x, y) in fs.feature_belief(back.probs()).iter().zip(&q) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn systematic_counts_are_floor_or_ceil(w in prop::collection::vec(0.0f64..1.0, 1..8), m in 1usize..200, seed in 0u64..100) {
        let total: f64 = w.iter().sum();
        prop_assume!(total > 0.0);
        let idx = systematic_resample(&w, m, &mut stream(seed, &[])).unwrap();
        prop_assert_eq!(idx.len(), m);
        for (k, wk) in w.iter().enumerate() {
            let c = idx.iter().filter(|&&i| i == k).count() as f64;
            let e = m as f64 * wk / total;
            prop_assert!(c >= e.floor() - 1e-9 && c <= e.ceil() + 1e-9, "k={} c={} e={}", k, c, e);
        }
    }
}

#[test]
fn ties_break_toward_the_smallest_index() {
    let reps = RepresentativeSet::enumerate(2, 1).unwrap();
    // (0.5, 0.5) is equidistant from (0, 1) and (1, 0); (0, 1) comes first.
    assert_eq!(reps.point(reps.nearest(&[0.5, 0.5])), vec![0.0, 1.0]);
    for _ in 0..10 {
        assert_eq!(reps.nearest(&[0.5, 0.5]), 0);
    }
}
