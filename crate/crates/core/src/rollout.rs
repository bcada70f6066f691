//! Online rollout on top of an aggregation base policy.
//!
//! The planner expands an `ℓ`-step lookahead tree over controls and
//! observations, minimizing over controls at every belief node. Each leaf
//! belief is scored by `L` simulations of the base policy `μ` for `m` steps
//! plus the discounted terminal approximation `α^m · J̃`.
//!
//! Simulations charge the expected stage cost `ĝ(b, u)` of the tracked
//! belief, so the only randomness is the observation sequence. Random
//! streams are derived from the configured seed, a hash of the root belief,
//! and the position in the tree, so a decision is a pure function of the
//! belief. Sibling controls share streams (common random numbers).

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::aggregation::BasePolicyBundle;
use crate::pomdp::{sample_slice, stage_cost_of, Belief, Policy, Pomdp};
use crate::rng::{hash_f64s, mix64, stream, SimRng};
use crate::{Error, Result};

pub const DEFAULT_NUM_SIMS: usize = 20;
pub const DEFAULT_PRUNE: f64 = 1e-6;
pub const DEFAULT_OBSERVATION_SAMPLES: usize = 64;
/// Observation spaces up to this size are expanded exactly by default.
pub const DEFAULT_EXACT_OBSERVATION_LIMIT: usize = 512;
pub const DEFAULT_NODE_BUDGET: u64 = 1_000_000;

/// How the expectation over the next observation is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ObservationMode {
    /// Every observation with `p̂(z | b, u)` at or above the prune threshold,
    /// renormalized.
    Exact,
    /// `samples` draws from `p̂(· | b, u)`, duplicates merged.
    Sampled { samples: usize },
    /// Interior layers as `Sampled`; at the last layer each of the `L`
    /// simulations draws its own observation, so a leaf costs `L`
    /// simulations in total instead of `L` per observation.
    Joint { samples: usize },
}

fn default_num_sims() -> usize {
    DEFAULT_NUM_SIMS
}
fn default_prune() -> f64 {
    DEFAULT_PRUNE
}
fn default_exact_limit() -> usize {
    DEFAULT_EXACT_OBSERVATION_LIMIT
}
fn default_node_budget() -> u64 {
    DEFAULT_NODE_BUDGET
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutConfig {
    /// `ℓ ≥ 1`.
    pub lookahead: usize,
    /// `m ≥ 0`.
    pub horizon: usize,
    /// `L ≥ 1`.
    #[serde(default = "default_num_sims")]
    pub num_sims: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_prune")]
    pub prune: f64,
    /// `None` expands exactly up to `exact_observation_limit` observations
    /// and samples beyond it.
    #[serde(default)]
    pub observation_mode: Option<ObservationMode>,
    #[serde(default = "default_exact_limit")]
    pub exact_observation_limit: usize,
    /// Cap on the number of control nodes in one decision tree.
    #[serde(default = "default_node_budget")]
    pub node_budget: u64,
}

impl RolloutConfig {
    pub fn new(lookahead: usize, horizon: usize) -> Self {
        RolloutConfig {
            lookahead,
            horizon,
            num_sims: DEFAULT_NUM_SIMS,
            seed: 0,
            prune: DEFAULT_PRUNE,
            observation_mode: None,
            exact_observation_limit: DEFAULT_EXACT_OBSERVATION_LIMIT,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sims(mut self, num_sims: usize) -> Self {
        self.num_sims = num_sims;
        self
    }

    pub fn with_mode(mut self, mode: ObservationMode) -> Self {
        self.observation_mode = Some(mode);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.lookahead == 0 || self.num_sims == 0 {
            return Err(Error::InvalidArgument(
                "lookahead and simulation count must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.prune) {
            return Err(Error::InvalidArgument(format!(
                "prune threshold {}",
                self.prune
            )));
        }
        match self.observation_mode {
            Some(
                ObservationMode::Sampled { samples: 0 } | ObservationMode::Joint { samples: 0 },
            ) => Err(Error::InvalidArgument(
                "observation samples must be at least 1".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Per-decision report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub control: usize,
    /// Estimated `Q(b, u)` for every control at the root.
    pub q_values: Vec<f64>,
    /// Control nodes expanded at each depth `1..=ℓ`.
    pub q_nodes: Vec<u64>,
    /// Beliefs scored by base-policy simulation (or `J̃` when `m = 0`).
    pub leaves: u64,
    pub mode: ObservationMode,
}

/// Rollout planner. The model may differ from the one the bundle was
/// solved on; the bundle is only read.
#[derive(Debug)]
pub struct RolloutPlanner<'a> {
    model: &'a dyn Pomdp,
    bundle: &'a BasePolicyBundle,
    config: RolloutConfig,
    mode: ObservationMode,
}

struct Counters {
    q_nodes: Vec<u64>,
    leaves: u64,
}

impl<'a> RolloutPlanner<'a> {
    pub fn new(
        model: &'a dyn Pomdp,
        bundle: &'a BasePolicyBundle,
        config: RolloutConfig,
    ) -> Result<Self> {
        config.validate()?;
        if bundle.num_states() != model.num_states() {
            return Err(Error::InvalidArgument(format!(
                "bundle covers {} states, model has {}",
                bundle.num_states(),
                model.num_states()
            )));
        }
        let mode = config.observation_mode.unwrap_or_else(|| {
            if model.num_observations() <= config.exact_observation_limit {
                ObservationMode::Exact
            } else {
                ObservationMode::Sampled {
                    samples: DEFAULT_OBSERVATION_SAMPLES,
                }
            }
        });
        Ok(RolloutPlanner {
            model,
            bundle,
            config,
            mode,
        })
    }

    pub fn config(&self) -> &RolloutConfig {
        &self.config
    }

    pub fn mode(&self) -> ObservationMode {
        self.mode
    }

    pub fn model(&self) -> &dyn Pomdp {
        self.model
    }

    /// Upper estimate of the control nodes in one tree.
    pub fn tree_size(&self) -> u128 {
        let nu = self.model.num_controls() as u128;
        let branching = match self.mode {
            ObservationMode::Exact => self.model.num_observations() as u128,
            ObservationMode::Sampled { samples } | ObservationMode::Joint { samples } => {
                samples as u128
            }
        };
        let mut layer = nu;
        let mut total = 0u128;
        for _ in 0..self.config.lookahead {
            total = total.saturating_add(layer);
            layer = layer.saturating_mul(branching).saturating_mul(nu);
        }
        total
    }

    /// `J̃_μ(b)`: mean over `L` simulations of the `m`-step discounted cost
    /// of `μ` from `b` plus `α^m · J̃` at the final belief.
    pub fn cost_to_go(&self, b: &Belief) -> f64 {
        let key = hash_f64s(b.probs());
        self.leaf_value(b.probs(), mix64(key))
    }

    fn leaf_value(&self, b: &[f64], stream_key: u64) -> f64 {
        if self.config.horizon == 0 {
            return self.bundle.cost(b);
        }
        let mut ws = Workspace::new(self.model.num_states());
        running_mean((0..self.config.num_sims).map(|s| {
            let mut rng = stream(self.config.seed, &[stream_key, s as u64]);
            let state = sample_slice(b, &mut rng);
            ws.belief.copy_from_slice(b);
            self.simulate(&mut ws, state, &mut rng)
        }))
    }

    /// Runs `μ` for `m` steps from `ws.belief` with hidden state `state`.
    fn simulate(&self, ws: &mut Workspace, mut state: usize, rng: &mut SimRng) -> f64 {
        let alpha = self.model.discount();
        let mut weight = 1.0;
        let mut total = 0.0;
        for _ in 0..self.config.horizon {
            let u = self.bundle.base_control(&ws.belief);
            total += weight * stage_cost_of(self.model, &ws.belief, u);
            let j = self.model.sample_next_state(state, u, rng);
            let z = self.model.sample_observation(j, u, rng);
            ws.update(self.model, u, z);
            state = j;
            weight *= alpha;
        }
        total + weight * self.bundle.cost(&ws.belief)
    }

    /// Rollout control with its report.
    pub fn decide(&self, b: &Belief) -> Result<Decision> {
        if b.len() != self.model.num_states() {
            return Err(Error::InvalidBelief(format!(
                "belief has {} entries",
                b.len()
            )));
        }
        let size = self.tree_size();
        if size > self.config.node_budget as u128 {
            return Err(Error::BudgetExceeded {
                required: size,
                budget: self.config.node_budget as u128,
            });
        }
        let mut counters = Counters {
            q_nodes: vec![0; self.config.lookahead],
            leaves: 0,
        };
        let root = mix64(hash_f64s(b.probs()));
        let q_values = self.q_values(b.probs(), 0, root, &mut counters);
        let control = argmin(&q_values);
        Ok(Decision {
            control,
            q_values,
            q_nodes: counters.q_nodes,
            leaves: counters.leaves,
            mode: self.mode,
        })
    }

    pub fn control(&self, b: &Belief) -> Result<usize> {
        Ok(self.decide(b)?.control)
    }

    fn q_values(&self, b: &[f64], depth: usize, key: u64, counters: &mut Counters) -> Vec<f64> {
        let nu = self.model.num_controls();
        let alpha = self.model.discount();
        let n = self.model.num_states();
        let last = depth + 1 == self.config.lookahead;
        let mut predicted = vec![0.0; n];
        (0..nu)
            .map(|u| {
                counters.q_nodes[depth] += 1;
                let cost = stage_cost_of(self.model, b, u);
                self.model.predict(b, u, &mut predicted);
                let future = match self.mode {
                    ObservationMode::Joint { .. } if last => {
                        counters.leaves += 1;
                        self.joint_leaf(&predicted, u, key)
                    }
                    _ => {
                        let branches = self.branches(&predicted, u, key);
                        let mut acc = 0.0;
                        for (z, w, post) in branches {
                            let child = mix64(key ^ mix64(z as u64 + 1));
                            let v = if last {
                                counters.leaves += 1;
                                self.leaf_value(&post, child)
                            } else {
                                let q = self.q_values(&post, depth + 1, child, counters);
                                q[argmin(&q)]
                            };
                            acc += w * v;
                        }
                        acc
                    }
                };
                cost + alpha * future
            })
            .collect()
    }

    /// Observation branches `(z, weight, F(b, u, z))` with weights summing
    /// to one.
    fn branches(&self, predicted: &[f64], u: usize, key: u64) -> Vec<(usize, f64, Vec<f64>)> {
        let n = predicted.len();
        let mut lik = vec![0.0; n];
        let posterior = |z: usize, lik: &mut Vec<f64>| -> Option<(f64, Vec<f64>)> {
            self.model.likelihoods(z, u, lik);
            let post: Vec<f64> = lik.iter().zip(predicted).map(|(l, p)| l * p).collect();
            let norm: f64 = post.iter().sum();
            (norm > 0.0).then(|| (norm, post.into_iter().map(|x| x / norm).collect()))
        };
        let mut out = Vec::new();
        match self.mode {
            ObservationMode::Exact => {
                for z in 0..self.model.num_observations() {
                    if let Some((p, post)) = posterior(z, &mut lik) {
                        if p >= self.config.prune {
                            out.push((z, p, post));
                        }
                    }
                }
                let total: f64 = out.iter().map(|b| b.1).sum();
                out.iter_mut().for_each(|b| b.1 /= total);
            }
            ObservationMode::Sampled { samples } | ObservationMode::Joint { samples } => {
                let mut rng = stream(self.config.seed, &[key, u64::MAX]);
                let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
                for _ in 0..samples {
                    let j = sample_slice(predicted, &mut rng);
                    *counts
                        .entry(self.model.sample_observation(j, u, &mut rng))
                        .or_default() += 1;
                }
                for (z, c) in counts {
                    let (_, post) =
                        posterior(z, &mut lik).expect("sampled observations are possible");
                    out.push((z, c as f64 / samples as f64, post));
                }
            }
        }
        out
    }

    /// `E_z[leaf(F(b, u, z))]` with one observation draw per simulation.
    fn joint_leaf(&self, predicted: &[f64], u: usize, key: u64) -> f64 {
        let mut ws = Workspace::new(predicted.len());
        running_mean((0..self.config.num_sims).map(|s| {
            let mut rng = stream(self.config.seed, &[key, s as u64]);
            let j = sample_slice(predicted, &mut rng);
            let z = self.model.sample_observation(j, u, &mut rng);
            ws.belief.copy_from_slice(predicted);
            ws.correct(self.model, u, z);
            if self.config.horizon == 0 {
                self.bundle.cost(&ws.belief)
            } else {
                self.simulate(&mut ws, j, &mut rng)
            }
        }))
    }
}

struct Workspace {
    belief: Vec<f64>,
    scratch: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            belief: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    fn update(&mut self, model: &dyn Pomdp, u: usize, z: usize) {
        model.predict(&self.belief, u, &mut self.scratch);
        std::mem::swap(&mut self.belief, &mut self.scratch);
        self.correct(model, u, z);
    }

    /// Multiplies `belief` by the likelihood of `z` and renormalizes.
    fn correct(&mut self, model: &dyn Pomdp, u: usize, z: usize) {
        model.likelihoods(z, u, &mut self.scratch);
        let mut norm = 0.0;
        for (b, l) in self.belief.iter_mut().zip(&self.scratch) {
            *b *= l;
            norm += *b;
        }
        debug_assert!(norm > 0.0, "simulated observations are possible");
        self.belief.iter_mut().for_each(|b| *b /= norm);
    }
}

/// Incremental mean; exact when all values are equal.
fn running_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut mean = 0.0;
    for (k, v) in values.enumerate() {
        mean += (v - mean) / (k + 1) as f64;
    }
    mean
}

/// Smallest index of the minimum.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = k;
        }
    }
    best
}

/// Rollout as a [`Policy`], memoizing decisions by belief. Decisions are
/// pure functions of the belief, so the cache never changes behavior.
#[derive(Debug)]
pub struct RolloutPolicy<'a> {
    planner: RolloutPlanner<'a>,
    cache: HashMap<Vec<u64>, usize>,
}

impl<'a> RolloutPolicy<'a> {
    pub fn new(planner: RolloutPlanner<'a>) -> Self {
        RolloutPolicy {
            planner,
            cache: HashMap::new(),
        }
    }

    pub fn planner(&self) -> &RolloutPlanner<'a> {
        &self.planner
    }

    pub fn cached_decisions(&self) -> usize {
        self.cache.len()
    }
}

impl Policy for RolloutPolicy<'_> {
    fn control(&mut self, belief: &Belief) -> usize {
        let key: Vec<u64> = belief.probs().iter().map(|p| p.to_bits()).collect();
        if let Some(&u) = self.cache.get(&key) {
            return u;
        }
        let u = self
            .planner
            .control(belief)
            .expect("planner configuration was validated at construction");
        self.cache.insert(key, u);
        u
    }
}

/// Monte Carlo comparison of rollout against its base policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub lookahead: usize,
    /// Per probe: (mean base cost, its standard error, mean rollout cost,
    /// its standard error).
    pub estimates: Vec<(f64, f64, f64, f64)>,
    /// Fraction of probes with rollout cost at most base cost plus the
    /// combined margin.
    pub improved_fraction: f64,
    /// `max |J_μ̃ − J⋆|` over the probes.
    pub rollout_error: f64,
    /// `max |J̃_μ − J⋆|` over the probes, with `J̃_μ` the simulation-based
    /// cost-to-go the planner uses at its leaves.
    pub base_error: f64,
    /// `2 α^ℓ / (1 − α) · base_error`.
    pub bound: f64,
    /// `rollout_error ≤ bound + margin`, with the margin the largest
    /// `sigmas`-standard-error band of the rollout estimates.
    pub bound_holds: bool,
}

/// Estimates `J_μ` and `J_μ̃` at each probe by `episodes` simulated
/// episodes of `horizon` steps, and checks the rollout suboptimality bound
/// against `oracle`.
#[allow(clippy::too_many_arguments)]
pub fn verify_policy_improvement(
    model: &dyn Pomdp,
    bundle: &BasePolicyBundle,
    config: &RolloutConfig,
    probes: &[Belief],
    episodes: usize,
    horizon: usize,
    sigmas: f64,
    oracle: impl Fn(&Belief) -> f64,
) -> Result<ImprovementReport> {
    if episodes < 2 {
        return Err(Error::InvalidArgument(
            "need at least two episodes per probe".into(),
        ));
    }
    let planner = RolloutPlanner::new(model, bundle, config.clone())?;
    let mut rollout = RolloutPolicy::new(planner);
    let mut base = bundle.clone();
    let alpha = model.discount();
    let mut estimates = Vec::with_capacity(probes.len());
    let (mut improved, mut rollout_error, mut base_error, mut margin): (usize, f64, f64, f64) =
        (0, 0.0, 0.0, 0.0);
    for (p, b) in probes.iter().enumerate() {
        let seed = config.seed ^ mix64(p as u64 + 1);
        let (mb, sb) = mean_and_se(model, &mut base, b, episodes, horizon, seed)?;
        let (mr, sr) = mean_and_se(model, &mut rollout, b, episodes, horizon, seed)?;
        if mr <= mb + sigmas * (sb * sb + sr * sr).sqrt() {
            improved += 1;
        }
        let j = oracle(b);
        rollout_error = rollout_error.max((mr - j).abs());
        base_error = base_error.max((rollout.planner().cost_to_go(b) - j).abs());
        margin = margin.max(sigmas * sr);
        estimates.push((mb, sb, mr, sr));
    }
    let bound = 2.0 * alpha.powi(config.lookahead as i32) / (1.0 - alpha) * base_error;
    Ok(ImprovementReport {
        lookahead: config.lookahead,
        estimates,
        improved_fraction: improved as f64 / probes.len().max(1) as f64,
        rollout_error,
        base_error,
        bound,
        bound_holds: rollout_error <= bound + margin,
    })
}

fn mean_and_se(
    model: &dyn Pomdp,
    policy: &mut dyn Policy,
    b: &Belief,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let costs = (0..episodes)
        .map(|e| {
            crate::pomdp::simulate_policy(model, policy, b, horizon, seed.wrapping_add(e as u64))
                .map(|t| t.discounted_cost)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::{solve_bundle, BuildOptions, FeatureSpace, RepresentativeSet};
    use crate::pomdp::{belief_update, observation_probability, DenseModel};
    use crate::recovery::{build_recovery_pomdp, RecoveryParams};

    fn recovery_bundle(rho: u32) -> (Box<dyn Pomdp>, BasePolicyBundle) {
        let model = build_recovery_pomdp(&RecoveryParams::new(1)).unwrap();
        let bundle = solve_bundle(
            model.as_ref(),
            FeatureSpace::identity(2),
            RepresentativeSet::enumerate(2, rho).unwrap(),
            BuildOptions::default(),
            1e-4,
        )
        .unwrap();
        (model, bundle)
    }

    /// Deterministic rotation 0 → 1 → 0 under control 0, stay under control
    /// 1, single observation.
    fn blind_rotation() -> DenseModel {
        let t = vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let o = vec![1.0; 4];
        let g = vec![1.0, 1.0, 0.5, 0.5, 0.0, 0.0, 2.0, 2.0];
        DenseModel::new(2, 2, 1, 0.9, t, o, g).unwrap()
    }

    #[test]
    fn zero_horizon_leaf_is_cost_approximation() {
        let (model, bundle) = recovery_bundle(5);
        let planner =
            RolloutPlanner::new(model.as_ref(), &bundle, RolloutConfig::new(1, 0)).unwrap();
        for k in 0..=20 {
            let b = Belief::binary(k as f64 / 20.0);
            assert_eq!(planner.cost_to_go(&b), bundle.cost(b.probs()));
        }
    }

    #[test]
    fn one_step_greedy_matches_direct_enumeration() {
        let (model, bundle) = recovery_bundle(7);
        let m = model.as_ref();
        let planner = RolloutPlanner::new(m, &bundle, RolloutConfig::new(1, 0)).unwrap();
        for k in 0..=10 {
            let b = Belief::binary(k as f64 / 10.0);
            let q: Vec<f64> = (0..2)
                .map(|u| {
                    let future: f64 = (0..8)
                        .map(|z| {
                            let p = observation_probability(m, &b, u, z);
                            p * bundle.cost(belief_update(m, &b, u, z).unwrap().probs())
                        })
                        .sum();
                    crate::pomdp::expected_stage_cost(m, &b, u) + 0.99 * future
                })
                .collect();
            let d = planner.decide(&b).unwrap();
            for u in 0..2 {
                assert!((d.q_values[u] - q[u]).abs() < 1e-9);
            }
            assert_eq!(d.control, argmin(&q));
        }
    }

    #[test]
    fn deterministic_model_has_no_simulation_noise() {
        let model = blind_rotation();
        let bundle = solve_bundle(
            &model,
            FeatureSpace::identity(2),
            RepresentativeSet::enumerate(2, 4).unwrap(),
            BuildOptions::default(),
            1e-6,
        )
        .unwrap();
        let b = Belief::new(vec![0.3, 0.7]).unwrap();
        let one =
            RolloutPlanner::new(&model, &bundle, RolloutConfig::new(1, 10).with_sims(1)).unwrap();
        let many =
            RolloutPlanner::new(&model, &bundle, RolloutConfig::new(1, 10).with_sims(100)).unwrap();
        assert_eq!(one.cost_to_go(&b), many.cost_to_go(&b));
    }

    #[test]
    fn surely_compromised_recovers() {
        let (model, bundle) = recovery_bundle(3);
        for lookahead in 1..=2 {
            let planner =
                RolloutPlanner::new(model.as_ref(), &bundle, RolloutConfig::new(lookahead, 5))
                    .unwrap();
            assert_eq!(planner.control(&Belief::point_mass(2, 1)).unwrap(), 1);
        }
    }

    #[test]
    fn node_counts_and_budget() {
        let (model, bundle) = recovery_bundle(3);
        let b = Belief::binary(0.3);
        let planner =
            RolloutPlanner::new(model.as_ref(), &bundle, RolloutConfig::new(2, 0)).unwrap();
        let d = planner.decide(&b).unwrap();
        let unpruned: Vec<u64> = (0..2)
            .map(|u| {
                (0..8)
                    .filter(|&z| observation_probability(model.as_ref(), &b, u, z) >= DEFAULT_PRUNE)
                    .count() as u64
            })
            .collect();
        assert_eq!(d.q_nodes, vec![2, 2 * unpruned.iter().sum::<u64>()]);
        assert_eq!(d.q_nodes[1], 2 * 8 * 2);
        let mut tight = RolloutConfig::new(3, 0);
        tight.node_budget = 100;
        let planner = RolloutPlanner::new(model.as_ref(), &bundle, tight).unwrap();
        assert!(matches!(
            planner.decide(&b),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn decisions_are_deterministic_and_memoized() {
        let (model, bundle) = recovery_bundle(4);
        let config = RolloutConfig::new(1, 8).with_seed(11);
        let a = RolloutPlanner::new(model.as_ref(), &bundle, config.clone()).unwrap();
        let b = RolloutPlanner::new(model.as_ref(), &bundle, config).unwrap();
        let mut policy = RolloutPolicy::new(
            RolloutPlanner::new(model.as_ref(), &bundle, a.config().clone()).unwrap(),
        );
        for k in 0..=10 {
            let belief = Belief::binary(k as f64 / 10.0);
            let d = a.decide(&belief).unwrap();
            assert_eq!(d, b.decide(&belief).unwrap());
            assert_eq!(policy.control(&belief), d.control);
            assert_eq!(policy.control(&belief), d.control);
        }
        assert_eq!(policy.cached_decisions(), 11);
    }

    #[test]
    fn sampled_and_joint_modes_track_exact() {
        let (model, bundle) = recovery_bundle(5);
        let b = Belief::binary(0.4);
        let exact = RolloutPlanner::new(model.as_ref(), &bundle, RolloutConfig::new(1, 0)).unwrap();
        let q = exact.decide(&b).unwrap().q_values;
        for mode in [
            ObservationMode::Sampled { samples: 20_000 },
            ObservationMode::Joint { samples: 64 },
        ] {
            let config = RolloutConfig::new(1, 0).with_mode(mode).with_sims(20_000);
            let d = RolloutPlanner::new(model.as_ref(), &bundle, config)
                .unwrap()
                .decide(&b)
                .unwrap();
            assert_eq!(d.mode, mode);
            for u in 0..2 {
                assert!(
                    (d.q_values[u] - q[u]).abs() < 0.1,
                    "{mode:?} {u}: {} vs {}",
                    d.q_values[u],
                    q[u]
                );
            }
        }
    }
}
