use beliefctl_core::aggregation::{
    build_aggregate_mdp, representative_count, AggregateMdp, BuildOptions, ConstructionMode,
    FeatureSpace, RepresentativeSet,
};
use beliefctl_core::pomdp::DenseModel;
use beliefctl_core::rng::stream;

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// `(I − α P_π)⁻¹ g_π` for a stationary deterministic policy.
fn policy_cost(mdp: &AggregateMdp, policy: &[usize]) -> Vec<f64> {
    let s = mdp.num_states();
    let alpha = mdp.discount();
    let mut a = vec![vec![0.0; s]; s];
    let mut g = vec![0.0; s];
    for q in 0..s {
        a[q][q] += 1.0;
        for (k, p) in mdp.row(q, policy[q]) {
            a[q][k] -= alpha * p;
        }
        g[q] = mdp.stage_cost(q, policy[q]);
    }
    solve(a, g)
}

#[test]
fn value_iteration_matches_policy_enumeration() {
    let mut rng = stream(7, &[]);
    for trial in 0..5 {
        let model = DenseModel::random(3, 2, 2, 0.8, &mut rng).unwrap();
        let mut mdp = build_aggregate_mdp(
            &model,
            FeatureSpace::identity(3),
            RepresentativeSet::enumerate(3, 2).unwrap(),
            BuildOptions::default(),
        )
        .unwrap();
        let s = mdp.num_states();
        assert_eq!(s, 6);
        let mut best = vec![f64::INFINITY; s];
        for code in 0..1usize << s {
            let policy: Vec<usize> = (0..s).map(|q| code >> q & 1).collect();
            for (b, j) in best.iter_mut().zip(policy_cost(&mdp, &policy)) {
                *b = b.min(j);
            }
        }
        let solution = mdp.value_iteration(1e-12, 1_000_000).unwrap().clone();
        for (v, b) in solution.values.iter().zip(&best) {
            assert!((v - b).abs() < 1e-9, "trial {trial}: {v} vs {b}");
        }
        let greedy = policy_cost(&mdp, &solution.policy);
        for (g, b) in greedy.iter().zip(&best) {
            assert!((g - b).abs() < 1e-9);
        }
    }
}

#[test]
fn aggregate_rows_are_stochastic_and_sampled_rows_agree() {
    let mut rng = stream(8, &[]);
    let model = DenseModel::random(3, 2, 2, 0.9, &mut rng).unwrap();
    let reps = RepresentativeSet::enumerate(3, 6).unwrap();
    let exact = build_aggregate_mdp(
        &model,
        FeatureSpace::identity(3),
        reps.clone(),
        BuildOptions::default(),
    )
    .unwrap();
    let sampled = build_aggregate_mdp(
        &model,
        FeatureSpace::identity(3),
        reps,
        BuildOptions {
            mode: Some(ConstructionMode::Sampled { samples: 100_000 }),
            ..BuildOptions::default()
        },
    )
    .unwrap();
    for q in 0..exact.num_states() {
        for u in 0..2 {
            let total: f64 = exact.row(q, u).map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-9);
            for k in 0..exact.num_states() {
                let d = (exact.transition(q, u, k) - sampled.transition(q, u, k)).abs();
                assert!(d < 0.01, "({q},{u},{k}) differs by {d}");
            }
            assert_eq!(exact.stage_cost(q, u), sampled.stage_cost(q, u));
        }
    }
}

#[test]
fn grid_sizes_match_stars_and_bars() {
    // Number of compositions of ρ into m parts by direct recursion.
    fn compositions(rho: u32, m: usize) -> u128 {
        if m == 1 {
            return 1;
        }
        (0..=rho)
            .map(|first| compositions(rho - first, m - 1))
            .sum()
    }
    for m in 1..=6 {
        for rho in 1..=8 {
            let expected = compositions(rho, m);
            assert_eq!(representative_count(m, rho), expected);
            assert_eq!(
                RepresentativeSet::enumerate(m, rho).unwrap().len() as u128,
                expected
            );
        }
    }
}

#[test]
fn nearest_matches_exhaustive_search() {
    let mut rng = stream(9, &[]);
    use rand::Rng;
    for (dim, rho) in [(2, 3), (3, 4), (4, 5), (5, 2)] {
        let reps = RepresentativeSet::enumerate(dim, rho).unwrap();
        for _ in 0..300 {
            let w: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>().powi(3)).collect();
            let s: f64 = w.iter().sum();
            let q: Vec<f64> = w.iter().map(|x| x / s).collect();
            let dist = |k: usize| {
                reps.point(k)
                    .iter()
                    .zip(&q)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            };
            let best = (0..reps.len()).map(dist).fold(f64::INFINITY, f64::min);
            let first = (0..reps.len()).find(|&k| dist(k) <= best + 1e-9).unwrap();
            assert_eq!(reps.nearest(&q), first, "q = {q:?}");
        }
    }
}
