//! Monte Carlo policy evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::particle::{BeliefFilter, EstimatorKind};
use crate::pomdp::{truncation_bound, Belief, Policy, Pomdp};
use crate::rng::stream;
use crate::{Error, Result};

/// The model in force at each step: `pre` before `switch_step`, `post`
/// from it on.
#[derive(Clone, Copy, Debug)]
pub struct ModelSchedule<'a> {
    pub pre: &'a dyn Pomdp,
    pub post: Option<(usize, &'a dyn Pomdp)>,
}

impl<'a> ModelSchedule<'a> {
    pub fn fixed(model: &'a dyn Pomdp) -> Self {
        ModelSchedule {
            pre: model,
            post: None,
        }
    }

    pub fn switching(pre: &'a dyn Pomdp, switch_step: usize, post: &'a dyn Pomdp) -> Self {
        ModelSchedule {
            pre,
            post: Some((switch_step, post)),
        }
    }

    pub fn at(&self, k: usize) -> &'a dyn Pomdp {
        match self.post {
            Some((k0, post)) if k >= k0 => post,
            _ => self.pre,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub episodes: usize,
    pub horizon: usize,
    pub seed: u64,
    pub estimator: EstimatorKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub episodes: usize,
    pub mean: f64,
    /// Sample standard deviation of the per-episode discounted cost.
    pub std_dev: f64,
    pub std_error: f64,
    /// Largest possible contribution of the steps beyond the horizon.
    pub truncation_bound: f64,
    /// Particle updates that fell back to the propagated set.
    pub degenerate_steps: usize,
}

impl CostSummary {
    pub fn from_costs(costs: &[f64], truncation_bound: f64, degenerate_steps: usize) -> Self {
        let n = costs.len();
        let mean = if n == 0 {
            0.0
        } else {
            costs.iter().sum::<f64>() / n as f64
        };
        let std_dev = if n < 2 {
            0.0
        } else {
            (costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        CostSummary {
            episodes: n,
            mean,
            std_dev,
            std_error: if n == 0 {
                0.0
            } else {
                std_dev / (n as f64).sqrt()
            },
            truncation_bound,
            degenerate_steps,
        }
    }
}

/// One episode: the hidden state starts from `b0`, the policy sees the
/// estimator's belief, and costs are the realized `g(i, u, j)`.
pub fn run_episode(
    schedule: &ModelSchedule<'_>,
    policy: &mut dyn Policy,
    b0: &Belief,
    horizon: usize,
    estimator: EstimatorKind,
    seed: u64,
) -> Result<(f64, usize)> {
    let mut rng = stream(seed, &[]);
    let mut state = b0.sample_state(&mut rng);
    let mut filter = BeliefFilter::new(estimator, b0, &mut rng)?;
    let alpha = schedule.pre.discount();
    let (mut total, mut weight) = (0.0, 1.0);
    for k in 0..horizon {
        let model = schedule.at(k);
        let u = policy.control(&filter.belief());
        let (next, z, cost) = model.sample(state, u, &mut rng);
        total += weight * cost;
        weight *= alpha;
        filter.update(model, u, z, &mut rng)?;
        state = next;
    }
    let degenerate = match filter {
        BeliefFilter::Particle {
            degenerate_steps, ..
        } => degenerate_steps,
        BeliefFilter::Exact(_) => 0,
    };
    Ok((total, degenerate))
}

/// Runs `options.episodes` episodes, each with a fresh policy from
/// `make_policy`. Episode `e` draws from the stream `(seed, e)`, so results
/// do not depend on the worker count.
pub fn evaluate_policy<P, F>(
    schedule: &ModelSchedule<'_>,
    make_policy: F,
    b0: &Belief,
    options: &EvalOptions,
) -> Result<CostSummary>
where
    P: Policy,
    F: Fn() -> P + Sync,
{
    if options.horizon == 0 && options.episodes > 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let runs = (0..options.episodes)
        .into_par_iter()
        .map(|e| {
            let seed = crate::rng::derive_seed(options.seed, &[e as u64]);
            let mut policy = make_policy();
            run_episode(
                schedule,
                &mut policy,
                b0,
                options.horizon,
                options.estimator,
                seed,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let costs: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let degenerate = runs.iter().map(|r| r.1).sum();
    let bound = truncation_bound(
        schedule.pre.discount(),
        options.horizon,
        schedule
            .pre
            .cost_bound()
            .max(schedule.post.map_or(0.0, |(_, m)| m.cost_bound())),
    );
    Ok(CostSummary::from_costs(&costs, bound, degenerate))
}

/// Acts with `before` for the first `switch_step` decisions and with
/// `after` from then on.
#[derive(Debug)]
pub struct SwitchingPolicy<A, B> {
    before: A,
    after: B,
    switch_step: usize,
    step: usize,
}

impl<A: Policy, B: Policy> SwitchingPolicy<A, B> {
    pub fn new(before: A, switch_step: usize, after: B) -> Self {
        SwitchingPolicy {
            before,
            after,
            switch_step,
            step: 0,
        }
    }
}

impl<A: Policy, B: Policy> Policy for SwitchingPolicy<A, B> {
    fn control(&mut self, belief: &Belief) -> usize {
        let u = if self.step < self.switch_step {
            self.before.control(belief)
        } else {
            self.after.control(belief)
        };
        self.step += 1;
        u
    }
}

/// `A = (J₀ − J) / (J₀ − J₁)`.
pub fn adaptation_metric(j0: f64, j1: f64, j: f64) -> Result<f64> {
    if j0 == j1 {
        return Err(Error::MetricUndefined(j0));
    }
    Ok((j0 - j) / (j0 - j1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::{simulate_policy, DenseModel};
    use crate::recovery::{build_recovery_pomdp, RecoveryParams};

    #[test]
    fn metric() {
        assert_eq!(adaptation_metric(10.0, 2.0, 6.0).unwrap(), 0.5);
        assert_eq!(adaptation_metric(10.0, 2.0, 10.0).unwrap(), 0.0);
        assert!(matches!(
            adaptation_metric(3.0, 3.0, 1.0),
            Err(Error::MetricUndefined(_))
        ));
    }

    #[test]
    fn schedule_switches_at_step() {
        let a = DenseModel::new(1, 1, 1, 0.5, vec![1.0], vec![1.0], vec![1.0]).unwrap();
        let b = DenseModel::new(1, 1, 1, 0.5, vec![1.0], vec![1.0], vec![3.0]).unwrap();
        let s = ModelSchedule::switching(&a, 2, &b);
        assert_eq!(s.at(1).cost(0, 0, 0), 1.0);
        assert_eq!(s.at(2).cost(0, 0, 0), 3.0);
        let (total, _) = run_episode(
            &s,
            &mut |_: &Belief| 0,
            &Belief::point_mass(1, 0),
            3,
            EstimatorKind::Exact,
            0,
        )
        .unwrap();
        assert_eq!(total, 1.0 + 0.5 + 0.25 * 3.0);
    }

    #[test]
    fn switching_policy_counts_decisions() {
        let mut p = SwitchingPolicy::new(|_: &Belief| 0, 2, |_: &Belief| 1);
        let b = Belief::uniform(2);
        let us: Vec<usize> = (0..4).map(|_| p.control(&b)).collect();
        assert_eq!(us, vec![0, 0, 1, 1]);
    }

    #[test]
    fn exact_episodes_match_closed_loop_simulation() {
        let model = build_recovery_pomdp(&RecoveryParams::new(1)).unwrap();
        let b0 = Belief::point_mass(2, 0);
        let policy = |b: &Belief| usize::from(b.probs()[1] > 0.5);
        let (total, _) = run_episode(
            &ModelSchedule::fixed(model.as_ref()),
            &mut { policy },
            &b0,
            50,
            EstimatorKind::Exact,
            9,
        )
        .unwrap();
        let t = simulate_policy(model.as_ref(), &mut { policy }, &b0, 50, 9).unwrap();
        assert_eq!(total, t.discounted_cost);
    }

    #[test]
    fn summaries_are_deterministic() {
        let model = build_recovery_pomdp(&RecoveryParams::new(1)).unwrap();
        let options = EvalOptions {
            episodes: 40,
            horizon: 30,
            seed: 5,
            estimator: EstimatorKind::Particle { particles: 50 },
        };
        let make = || |b: &Belief| usize::from(b.probs()[1] > 0.3);
        let s = ModelSchedule::fixed(model.as_ref());
        let a = evaluate_policy(&s, make, &Belief::point_mass(2, 0), &options).unwrap();
        let b = evaluate_policy(&s, make, &Belief::point_mass(2, 0), &options).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.episodes, 40);
        let empty = EvalOptions {
            episodes: 0,
            ..options
        };
        assert_eq!(
            evaluate_policy(&s, make, &Belief::point_mass(2, 0), &empty)
                .unwrap()
                .episodes,
            0
        );
    }
}
