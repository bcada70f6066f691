//! Base policy, cost approximation, and error-bound diagnostics.

use std::cell::RefCell;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::features::FeatureSpace;
use super::mdp::{build_aggregate_mdp, AggregateMdp, BuildOptions, DEFAULT_MAX_SWEEPS};
use super::simplex::RepresentativeSet;
use crate::pomdp::{Belief, Policy, Pomdp};
use crate::{Error, Result};

thread_local! {
    static FEATURE_BELIEF: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
}

/// A solved aggregate MDP viewed as a policy and cost function on beliefs.
/// Both are constant on each cell `S_q̃ = Φ⁻¹(q̃)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AggregateMdp", into = "AggregateMdp")]
pub struct BasePolicyBundle {
    mdp: AggregateMdp,
}

impl BasePolicyBundle {
    pub fn new(mdp: AggregateMdp) -> Result<Self> {
        if mdp.solution().is_none() {
            return Err(Error::InvalidArgument(
                "aggregate MDP has not been solved".into(),
            ));
        }
        Ok(BasePolicyBundle { mdp })
    }

    pub fn mdp(&self) -> &AggregateMdp {
        &self.mdp
    }

    pub fn num_states(&self) -> usize {
        self.mdp.features().num_states()
    }

    fn solution(&self) -> &super::Solution {
        self.mdp.solution().expect("bundles are solved")
    }

    /// `Φ(b)`: index of the nearest representative to the feature belief
    /// of `b` in max norm, smallest index on ties.
    pub fn cell(&self, b: &[f64]) -> usize {
        FEATURE_BELIEF.with(|cell| {
            let q = &mut *cell.borrow_mut();
            q.resize(self.mdp.features().num_features(), 0.0);
            self.mdp.features().feature_belief_into(b, q);
            self.mdp.representatives().nearest(q)
        })
    }

    /// `μ(b) = π⋆(Φ(b))`.
    pub fn base_control(&self, b: &[f64]) -> usize {
        self.solution().policy[self.cell(b)]
    }

    /// `J̃(b) = r⋆(Φ(b))`.
    pub fn cost(&self, b: &[f64]) -> f64 {
        self.solution().values[self.cell(b)]
    }

    /// `(μ(b), J̃(b))` with a single `Φ` evaluation.
    pub fn evaluate(&self, b: &[f64]) -> (usize, f64) {
        let k = self.cell(b);
        let s = self.solution();
        (s.policy[k], s.values[k])
    }

    pub fn values(&self) -> &[f64] {
        &self.solution().values
    }

    pub fn policy(&self) -> &[usize] {
        &self.solution().policy
    }
}

impl Policy for BasePolicyBundle {
    fn control(&mut self, belief: &Belief) -> usize {
        self.base_control(belief.probs())
    }
}

impl TryFrom<AggregateMdp> for BasePolicyBundle {
    type Error = Error;
    fn try_from(mdp: AggregateMdp) -> Result<Self> {
        BasePolicyBundle::new(mdp)
    }
}

impl From<BasePolicyBundle> for AggregateMdp {
    fn from(b: BasePolicyBundle) -> Self {
        b.mdp
    }
}

/// Builds and solves in one step.
pub fn solve_bundle(
    model: &dyn Pomdp,
    features: FeatureSpace,
    representatives: RepresentativeSet,
    options: BuildOptions,
    threshold: f64,
) -> Result<BasePolicyBundle> {
    let mut mdp = build_aggregate_mdp(model, features, representatives, options)?;
    mdp.value_iteration(threshold, DEFAULT_MAX_SWEEPS)?;
    BasePolicyBundle::new(mdp)
}

/// Stand-in for `J⋆`: identity aggregation at a fine resolution.
pub fn oracle_cost_function(
    model: &dyn Pomdp,
    resolution: u32,
    threshold: f64,
) -> Result<BasePolicyBundle> {
    let n = model.num_states();
    solve_bundle(
        model,
        FeatureSpace::identity(n),
        RepresentativeSet::enumerate(n, resolution)?,
        BuildOptions::default(),
        threshold,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Largest spread `max − min` of the oracle within one cell.
    pub epsilon: f64,
    /// `ε̂ / (1 − α)`.
    pub bound: f64,
    /// `max |J̃(b) − J⋆(b)|` over the probes.
    pub observed_error: f64,
    /// Cells hit by at least one probe.
    pub groups: usize,
}

/// Groups probes by cell and measures the oracle's within-cell variation.
pub fn epsilon_and_bound(
    bundle: &BasePolicyBundle,
    oracle: impl Fn(&Belief) -> f64,
    probes: &[Belief],
) -> BoundReport {
    let mut ranges: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut observed: f64 = 0.0;
    for b in probes {
        let k = bundle.cell(b.probs());
        let j = oracle(b);
        observed = observed.max((bundle.values()[k] - j).abs());
        let r = ranges.entry(k).or_insert((j, j));
        r.0 = r.0.min(j);
        r.1 = r.1.max(j);
    }
    let epsilon = ranges.values().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
    BoundReport {
        epsilon,
        bound: epsilon / (1.0 - bundle.mdp().discount()),
        observed_error: observed,
        groups: ranges.len(),
    }
}
