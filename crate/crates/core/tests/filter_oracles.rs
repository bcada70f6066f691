use beliefctl_core::particle::ParticleSet;
use beliefctl_core::pomdp::{belief_update, observation_probability, Belief, DenseModel, Pomdp};
use beliefctl_core::recovery::{build_recovery_pomdp, RecoveryParams};
use beliefctl_core::rng::stream;

/// Posterior over the final state by summing the joint probability of every
/// hidden state sequence consistent with the history.
fn brute_force_posterior(model: &dyn Pomdp, b0: &[f64], history: &[(usize, usize)]) -> Vec<f64> {
    let n = model.num_states();
    let t = history.len();
    let mut post = vec![0.0; n];
    let mut total = 0.0;
    for code in 0..n.pow(t as u32 + 1) {
        let seq: Vec<usize> = (0..=t).map(|k| code / n.pow(k as u32) % n).collect();
        let mut p = b0[seq[0]];
        for (k, &(u, z)) in history.iter().enumerate() {
            p *= model.transition(seq[k], u, seq[k + 1]) * model.observation(z, seq[k + 1], u);
        }
        post[seq[t]] += p;
        total += p;
    }
    post.iter().map(|p| p / total).collect()
}

#[test]
fn recursive_filter_matches_joint_enumeration() {
    let mut rng = stream(41, &[]);
    for trial in 0..10 {
        let model = DenseModel::random(3, 2, 3, 0.9, &mut rng).unwrap();
        let b0 = Belief::from_weights(vec![1.0 + trial as f64, 2.0, 0.5]).unwrap();
        let history = [(0, 1), (1, 2), (1, 0), (0, 0)];
        let mut b = b0.clone();
        for &(u, z) in &history {
            b = belief_update(&model, &b, u, z).unwrap();
        }
        let oracle = brute_force_posterior(&model, b0.probs(), &history);
        for (x, y) in b.probs().iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-12, "{:?} vs {oracle:?}", b.probs());
        }
    }
}

#[test]
fn observation_probability_matches_enumeration() {
    let mut rng = stream(42, &[]);
    let model = DenseModel::random(4, 3, 5, 0.9, &mut rng).unwrap();
    let b = Belief::from_weights(vec![0.1, 0.4, 0.2, 0.3]).unwrap();
    for u in 0..3 {
        let mut total = 0.0;
        for z in 0..5 {
            let mut p = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    p += b.probs()[i] * model.transition(i, u, j) * model.observation(z, j, u);
                }
            }
            assert!((observation_probability(&model, &b, u, z) - p).abs() < 1e-14);
            total += p;
        }
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sampled_transitions_follow_their_rows() {
    let model = build_recovery_pomdp(&RecoveryParams::new(2)).unwrap();
    let mut rng = stream(43, &[]);
    let draws = 200_000;
    let (i, u) = (0, 0);
    let mut counts = [0usize; 4];
    for _ in 0..draws {
        counts[model.sample_next_state(i, u, &mut rng)] += 1;
    }
    let mut chi2 = 0.0;
    let mut cells = 0;
    for (j, &c) in counts.iter().enumerate() {
        let e = draws as f64 * model.transition(i, u, j);
        if e > 0.0 {
            chi2 += (c as f64 - e).powi(2) / e;
            cells += 1;
        } else {
            assert_eq!(c, 0);
        }
    }
    // 99.9% quantile of chi-square with at most 3 degrees of freedom.
    assert!(cells == 4 && chi2 < 16.27, "chi2 = {chi2}");
}

#[test]
fn particle_error_shrinks_with_particle_count() {
    let model = build_recovery_pomdp(&RecoveryParams::new(1)).unwrap();
    let b0 = Belief::point_mass(2, 0);
    let mut errors = Vec::new();
    for m in [100, 10_000] {
        let mut total = 0.0;
        for seed in 0..20u64 {
            let mut rng = stream(seed, &[1]);
            let mut state = 0;
            let mut exact = b0.clone();
            let mut set = ParticleSet::init(&b0, m, &mut rng).unwrap();
            for k in 0..30 {
                let u = usize::from(k % 7 == 6);
                let (next, z, _) = model.sample(state, u, &mut rng);
                exact = belief_update(model.as_ref(), &exact, u, z).unwrap();
                set = set.update(model.as_ref(), u, z, &mut rng).set;
                total += set.belief(2).unwrap().tv_distance(&exact);
                state = next;
            }
        }
        errors.push(total / 600.0);
    }
    assert!(errors[1] < errors[0] && errors[1] < 0.02, "{errors:?}");
}
