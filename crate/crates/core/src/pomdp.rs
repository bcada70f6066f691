//! Finite POMDP models, beliefs, and the exact Bayes filter.
//!
//! States, controls, and observations are indexed from 0. A model is an
//! evaluator: transition, observation, and cost entries are computed on
//! demand, so factored models never need to materialize `n × |U| × n`
//! tensors. [`DenseModel`] is the tabulated implementation.
//!
//! The exact belief update is
//!
//! ```text
//! b'(j) ∝ p(z | j, u) · Σ_i b(i) p_ij(u)
//! ```
//!
//! which costs O(n²) per step: one prediction pass over the support of `b`
//! followed by an O(n) correction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, SimRng};
use crate::{Error, Result};

/// Tolerance for probability rows of constructed models.
pub const PROB_TOL: f64 = 1e-9;

/// Largest `n · |U| · n` for which [`Pomdp::cost_bound`] scans exhaustively.
pub const EXACT_SCAN_LIMIT: usize = 10_000_000;

pub trait Pomdp: Send + Sync + std::fmt::Debug {
    fn num_states(&self) -> usize;
    fn num_controls(&self) -> usize;
    fn num_observations(&self) -> usize;
    fn discount(&self) -> f64;

    /// `p_ij(u)`.
    fn transition(&self, i: usize, u: usize, j: usize) -> f64;
    /// `p(z | j, u)`, with `j` the post-transition state.
    fn observation(&self, z: usize, j: usize, u: usize) -> f64;
    /// `g(i, u, j)`.
    fn cost(&self, i: usize, u: usize, j: usize) -> f64;

    /// `Σ_j p_ij(u) g(i, u, j)`.
    fn expected_cost(&self, i: usize, u: usize) -> f64 {
        (0..self.num_states())
            .map(|j| {
                let p = self.transition(i, u, j);
                if p > 0.0 {
                    p * self.cost(i, u, j)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Writes `Σ_i b(i) p_ij(u)` into `out`.
    fn predict(&self, belief: &[f64], u: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, &bi) in belief.iter().enumerate() {
            if bi == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += bi * self.transition(i, u, j);
            }
        }
    }

    /// Writes `p(z | j, u)` for every state `j` into `out`.
    fn likelihoods(&self, z: usize, u: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.observation(z, j, u);
        }
    }

    fn sample_next_state(&self, i: usize, u: usize, rng: &mut SimRng) -> usize {
        let n = self.num_states();
        sample_index(n, |j| self.transition(i, u, j), rng)
    }

    fn sample_observation(&self, j: usize, u: usize, rng: &mut SimRng) -> usize {
        let m = self.num_observations();
        sample_index(m, |z| self.observation(z, j, u), rng)
    }

    /// Draws `(j, z, g(i, u, j))`.
    fn sample(&self, i: usize, u: usize, rng: &mut SimRng) -> (usize, usize, f64) {
        let j = self.sample_next_state(i, u, rng);
        let z = self.sample_observation(j, u, rng);
        (j, z, self.cost(i, u, j))
    }

    /// Bound on `|g|`, used for truncation-error reports. Exhaustive for
    /// models small enough to scan, otherwise a maximum over sampled triples.
    fn cost_bound(&self) -> f64 {
        let (n, nu) = (self.num_states(), self.num_controls());
        if n.saturating_mul(nu).saturating_mul(n) <= EXACT_SCAN_LIMIT {
            let mut g: f64 = 0.0;
            for i in 0..n {
                for u in 0..nu {
                    for j in 0..n {
                        if self.transition(i, u, j) > 0.0 {
                            g = g.max(self.cost(i, u, j).abs());
                        }
                    }
                }
            }
            g
        } else {
            let mut rng = stream(0x6D61_78, &[]);
            (0..100_000)
                .map(|_| {
                    let i = rng.gen_range(0..n);
                    let u = rng.gen_range(0..nu);
                    let j = self.sample_next_state(i, u, &mut rng);
                    self.cost(i, u, j).abs()
                })
                .fold(0.0, f64::max)
        }
    }
}

/// Inverse-CDF draw from an unnormalized-free probability evaluator. Falls
/// back to the last index with positive mass when rounding leaves the uniform
/// beyond the accumulated total.
pub(crate) fn sample_index(len: usize, prob: impl Fn(usize) -> f64, rng: &mut SimRng) -> usize {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for k in 0..len {
        let p = prob(k);
        if p > 0.0 {
            acc += p;
            last = k;
            if r < acc {
                return k;
            }
        }
    }
    last
}

pub(crate) fn sample_slice(probs: &[f64], rng: &mut SimRng) -> usize {
    sample_index(probs.len(), |k| probs[k], rng)
}

/// Probability vector over states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidBelief("empty belief".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidBelief(format!(
                "entry {p} is not a probability"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidBelief(format!("entries sum to {sum}")));
        }
        Ok(Belief(probs))
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidBelief(format!("weights with total {total}")));
        }
        Ok(Belief(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn point_mass(n: usize, state: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[state] = 1.0;
        Belief(probs)
    }

    pub fn uniform(n: usize) -> Self {
        Belief(vec![1.0 / n as f64; n])
    }

    /// Belief on two states with `p` on state 1.
    pub fn binary(p: f64) -> Self {
        Belief(vec![1.0 - p, p])
    }

    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        Belief(probs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn tv_distance(&self, other: &Belief) -> f64 {
        0.5 * self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    pub fn max_distance(&self, other: &Belief) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sample_state(&self, rng: &mut SimRng) -> usize {
        sample_slice(&self.0, rng)
    }

    fn check_dim(&self, model: &dyn Pomdp) -> Result<()> {
        if self.len() != model.num_states() {
            return Err(Error::InvalidBelief(format!(
                "dimension {} does not match {} states",
                self.len(),
                model.num_states()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for Belief {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Belief::new(v)
    }
}

impl From<Belief> for Vec<f64> {
    fn from(b: Belief) -> Self {
        b.0
    }
}

impl AsRef<[f64]> for Belief {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_control(model: &dyn Pomdp, u: usize) -> Result<()> {
    if u >= model.num_controls() {
        return Err(Error::InvalidArgument(format!("control {u} out of range")));
    }
    Ok(())
}

fn check_observation(model: &dyn Pomdp, z: usize) -> Result<()> {
    if z >= model.num_observations() {
        return Err(Error::InvalidArgument(format!(
            "observation {z} out of range"
        )));
    }
    Ok(())
}

/// Exact Bayes update `F(b, u, z)`.
pub fn belief_update(model: &dyn Pomdp, b: &Belief, u: usize, z: usize) -> Result<Belief> {
    b.check_dim(model)?;
    check_control(model, u)?;
    check_observation(model, z)?;
    let n = model.num_states();
    let mut predicted = vec![0.0; n];
    model.predict(b.probs(), u, &mut predicted);
    let mut lik = vec![0.0; n];
    model.likelihoods(z, u, &mut lik);
    correct(predicted, &lik)
        .map(Belief)
        .ok_or(Error::ZeroLikelihood {
            control: u,
            observation: z,
        })
}

/// Multiplies a predicted distribution by likelihoods and normalizes in
/// place. Returns `None` when the normalizer vanishes.
pub(crate) fn correct(mut predicted: Vec<f64>, likelihoods: &[f64]) -> Option<Vec<f64>> {
    let mut total = 0.0;
    for (p, l) in predicted.iter_mut().zip(likelihoods) {
        *p *= l;
        total += *p;
    }
    if total <= 0.0 {
        return None;
    }
    predicted.iter_mut().for_each(|p| *p /= total);
    Some(predicted)
}

/// `ĝ(b, u) = Σ_i b(i) Σ_j p_ij(u) g(i, u, j)`.
pub fn expected_stage_cost(model: &dyn Pomdp, b: &Belief, u: usize) -> f64 {
    stage_cost_of(model, b.probs(), u)
}

pub(crate) fn stage_cost_of(model: &dyn Pomdp, probs: &[f64], u: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(i, p)| p * model.expected_cost(i, u))
        .sum()
}

/// `p̂(z | b, u) = Σ_i b(i) Σ_j p_ij(u) p(z | j, u)`.
pub fn observation_probability(model: &dyn Pomdp, b: &Belief, u: usize, z: usize) -> f64 {
    let n = model.num_states();
    let mut predicted = vec![0.0; n];
    model.predict(b.probs(), u, &mut predicted);
    predicted
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(j, p)| p * model.observation(z, j, u))
        .sum()
}

/// `p̂(· | b, u)` over all observations.
pub fn observation_distribution(model: &dyn Pomdp, b: &Belief, u: usize) -> Vec<f64> {
    let n = model.num_states();
    let mut predicted = vec![0.0; n];
    model.predict(b.probs(), u, &mut predicted);
    let mut lik = vec![0.0; n];
    (0..model.num_observations())
        .map(|z| {
            model.likelihoods(z, u, &mut lik);
            predicted.iter().zip(&lik).map(|(p, l)| p * l).sum()
        })
        .collect()
}

/// Map from beliefs to controls.
pub trait Policy {
    fn control(&mut self, belief: &Belief) -> usize;
}

impl<F: FnMut(&Belief) -> usize> Policy for F {
    fn control(&mut self, belief: &Belief) -> usize {
        self(belief)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// Hidden state at the start of the step.
    pub state: usize,
    pub belief: Belief,
    pub control: usize,
    /// Observation emitted by the successor state.
    pub observation: usize,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub discount: f64,
    pub discounted_cost: f64,
    /// `α^T · g_max / (1 − α)`: the largest possible contribution of the
    /// steps beyond the horizon.
    pub truncation_bound: f64,
}

impl Trajectory {
    pub fn recompute_discounted_cost(&self) -> f64 {
        discounted_sum(self.steps.iter().map(|s| s.cost), self.discount)
    }
}

pub(crate) fn discounted_sum(costs: impl Iterator<Item = f64>, discount: f64) -> f64 {
    let mut weight = 1.0;
    let mut total = 0.0;
    for c in costs {
        total += weight * c;
        weight *= discount;
    }
    total
}

pub fn truncation_bound(discount: f64, horizon: usize, cost_bound: f64) -> f64 {
    discount.powi(horizon as i32) * cost_bound / (1.0 - discount)
}

/// Runs `policy` in closed loop for `horizon` steps from a hidden state drawn
/// from `b0`, tracking the exact belief. Costs are realized `g(i, u, j)`.
pub fn simulate_policy(
    model: &dyn Pomdp,
    policy: &mut dyn Policy,
    b0: &Belief,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    b0.check_dim(model)?;
    let mut rng = stream(seed, &[]);
    let mut state = b0.sample_state(&mut rng);
    let mut belief = b0.clone();
    let mut steps = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let u = policy.control(&belief);
        check_control(model, u)?;
        let (next, z, cost) = model.sample(state, u, &mut rng);
        let updated = belief_update(model, &belief, u, z)?;
        steps.push(Step {
            state,
            belief: std::mem::replace(&mut belief, updated),
            control: u,
            observation: z,
            cost,
        });
        state = next;
    }
    let alpha = model.discount();
    let discounted_cost = discounted_sum(steps.iter().map(|s| s.cost), alpha);
    Ok(Trajectory {
        steps,
        discount: alpha,
        discounted_cost,
        truncation_bound: truncation_bound(alpha, horizon, model.cost_bound()),
    })
}

/// Tabulated model. Tensors are row-major: transition and cost `[i][u][j]`,
/// observation `[j][u][z]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseModel {
    n: usize,
    controls: usize,
    observations: usize,
    discount: f64,
    transition: Vec<f64>,
    observation: Vec<f64>,
    cost: Vec<f64>,
    expected_cost: Vec<f64>,
}

impl DenseModel {
    pub fn new(
        n: usize,
        controls: usize,
        observations: usize,
        discount: f64,
        transition: Vec<f64>,
        observation: Vec<f64>,
        cost: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 || controls == 0 || observations == 0 {
            return Err(Error::InvalidModel(
                "empty state, control, or observation set".into(),
            ));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::InvalidModel(format!(
                "discount {discount} outside (0, 1)"
            )));
        }
        let tlen = n
            .checked_mul(controls)
            .and_then(|x| x.checked_mul(n))
            .filter(|&x| x <= EXACT_SCAN_LIMIT)
            .ok_or_else(|| {
                Error::InvalidModel("transition tensor too large for dense storage".into())
            })?;
        if transition.len() != tlen || cost.len() != tlen {
            return Err(Error::InvalidModel(
                "transition or cost tensor has wrong length".into(),
            ));
        }
        if observation.len() != n * controls * observations {
            return Err(Error::InvalidModel(
                "observation tensor has wrong length".into(),
            ));
        }
        check_rows(&transition, n, "transition")?;
        check_rows(&observation, observations, "observation")?;
        if cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidModel("non-finite cost".into()));
        }
        let expected_cost = transition
            .chunks(n)
            .zip(cost.chunks(n))
            .map(|(p, g)| p.iter().zip(g).map(|(p, g)| p * g).sum())
            .collect();
        Ok(DenseModel {
            n,
            controls,
            observations,
            discount,
            transition,
            observation,
            cost,
            expected_cost,
        })
    }

    /// Tabulates any model. Fails when the tensors exceed dense limits.
    pub fn from_model(model: &dyn Pomdp) -> Result<Self> {
        let (n, nu, nz) = (
            model.num_states(),
            model.num_controls(),
            model.num_observations(),
        );
        if n.saturating_mul(nu).saturating_mul(n.max(nz)) > EXACT_SCAN_LIMIT {
            return Err(Error::CapacityExceeded {
                what: "dense tabulation",
                required: (n as u128) * (nu as u128) * (n.max(nz) as u128),
                limit: EXACT_SCAN_LIMIT as u128,
            });
        }
        let mut transition = Vec::with_capacity(n * nu * n);
        let mut cost = Vec::with_capacity(n * nu * n);
        for i in 0..n {
            for u in 0..nu {
                for j in 0..n {
                    transition.push(model.transition(i, u, j));
                    cost.push(model.cost(i, u, j));
                }
            }
        }
        let mut observation = Vec::with_capacity(n * nu * nz);
        for j in 0..n {
            for u in 0..nu {
                for z in 0..nz {
                    observation.push(model.observation(z, j, u));
                }
            }
        }
        DenseModel::new(n, nu, nz, model.discount(), transition, observation, cost)
    }

    /// Rows drawn uniformly from the simplex, costs uniform on `[0, 1)`.
    pub fn random(
        n: usize,
        controls: usize,
        observations: usize,
        discount: f64,
        rng: &mut SimRng,
    ) -> Result<Self> {
        let row = |width: usize, rng: &mut SimRng| -> Vec<f64> {
            let w: Vec<f64> = (0..width).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        };
        let transition = (0..n * controls).flat_map(|_| row(n, rng)).collect();
        let observation = (0..n * controls)
            .flat_map(|_| row(observations, rng))
            .collect();
        let cost = (0..n * controls * n).map(|_| rng.gen::<f64>()).collect();
        DenseModel::new(
            n,
            controls,
            observations,
            discount,
            transition,
            observation,
            cost,
        )
    }

    pub fn transition_row(&self, i: usize, u: usize) -> &[f64] {
        let start = (i * self.controls + u) * self.n;
        &self.transition[start..start + self.n]
    }

    pub fn observation_row(&self, j: usize, u: usize) -> &[f64] {
        let start = (j * self.controls + u) * self.observations;
        &self.observation[start..start + self.observations]
    }

    pub fn with_discount(mut self, discount: f64) -> Result<Self> {
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::InvalidModel(format!(
                "discount {discount} outside (0, 1)"
            )));
        }
        self.discount = discount;
        Ok(self)
    }

    pub(crate) fn tensors(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.transition, &self.observation, &self.cost)
    }
}

fn check_rows(table: &[f64], width: usize, name: &str) -> Result<()> {
    for (r, row) in table.chunks(width).enumerate() {
        if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidModel(format!(
                "{name} row {r} has a negative entry"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidModel(format!("{name} row {r} sums to {sum}")));
        }
    }
    Ok(())
}

impl Pomdp for DenseModel {
    fn num_states(&self) -> usize {
        self.n
    }
    fn num_controls(&self) -> usize {
        self.controls
    }
    fn num_observations(&self) -> usize {
        self.observations
    }
    fn discount(&self) -> f64 {
        self.discount
    }
    fn transition(&self, i: usize, u: usize, j: usize) -> f64 {
        self.transition[(i * self.controls + u) * self.n + j]
    }
    fn observation(&self, z: usize, j: usize, u: usize) -> f64 {
        self.observation[(j * self.controls + u) * self.observations + z]
    }
    fn cost(&self, i: usize, u: usize, j: usize) -> f64 {
        self.cost[(i * self.controls + u) * self.n + j]
    }
    fn expected_cost(&self, i: usize, u: usize) -> f64 {
        self.expected_cost[i * self.controls + u]
    }
    fn predict(&self, belief: &[f64], u: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, &bi) in belief.iter().enumerate() {
            if bi == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(self.transition_row(i, u)) {
                *o += bi * p;
            }
        }
    }
    fn sample_next_state(&self, i: usize, u: usize, rng: &mut SimRng) -> usize {
        sample_slice(self.transition_row(i, u), rng)
    }
    fn sample_observation(&self, j: usize, u: usize, rng: &mut SimRng) -> usize {
        sample_slice(self.observation_row(j, u), rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two states, two controls, two observations. Control 1 resets to state
    /// 0; observation 1 is impossible in state 0.
    fn toy() -> DenseModel {
        DenseModel::new(
            2,
            2,
            2,
            0.9,
            vec![0.7, 0.3, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0, 0.0, 0.4, 0.6, 0.4, 0.6],
            vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 0.5, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let err = DenseModel::new(1, 1, 1, 0.5, vec![0.9], vec![1.0], vec![0.0]);
        assert!(matches!(err, Err(Error::InvalidModel(_))));
        let err = DenseModel::new(1, 1, 1, 1.0, vec![1.0], vec![1.0], vec![0.0]);
        assert!(matches!(err, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn single_state_update_is_identity() {
        let m = DenseModel::new(1, 1, 2, 0.5, vec![1.0], vec![0.3, 0.7], vec![1.0]).unwrap();
        let b = Belief::point_mass(1, 0);
        assert_eq!(belief_update(&m, &b, 0, 1).unwrap().probs(), &[1.0]);
    }

    #[test]
    fn impossible_observation_is_reported() {
        let m = toy();
        // Control 1 lands in state 0 where observation 1 never occurs.
        let b = Belief::uniform(2);
        assert!(matches!(
            belief_update(&m, &b, 1, 1),
            Err(Error::ZeroLikelihood {
                control: 1,
                observation: 1
            })
        ));
    }

    #[test]
    fn update_matches_hand_computation() {
        let m = toy();
        let b = Belief::new(vec![0.5, 0.5]).unwrap();
        // prior after transition: (0.35, 0.65); likelihood of z=0: (1.0, 0.4)
        let post = belief_update(&m, &b, 0, 0).unwrap();
        let w = [0.35, 0.65 * 0.4];
        let s = w[0] + w[1];
        assert!((post.probs()[0] - w[0] / s).abs() < 1e-15);
        assert!((post.probs()[1] - w[1] / s).abs() < 1e-15);
    }

    #[test]
    fn stage_cost_and_observation_probability() {
        let m = toy();
        let b = Belief::new(vec![0.25, 0.75]).unwrap();
        assert!((expected_stage_cost(&m, &b, 0) - 0.75 * 2.0).abs() < 1e-15);
        assert!((expected_stage_cost(&m, &b, 1) - (0.25 * 1.0 + 0.75 * 0.5)).abs() < 1e-15);
        let dist = observation_distribution(&m, &b, 0);
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((observation_probability(&m, &b, 0, 1) - dist[1]).abs() < 1e-15);
    }

    #[test]
    fn belief_validation() {
        assert!(Belief::new(vec![0.5, 0.6]).is_err());
        assert!(Belief::new(vec![-0.1, 1.1]).is_err());
        assert!(Belief::new(vec![]).is_err());
        let b: Belief = serde_json::from_str("[0.25, 0.75]").unwrap();
        assert_eq!(b.probs(), &[0.25, 0.75]);
        assert!(serde_json::from_str::<Belief>("[0.25, 0.5]").is_err());
    }

    #[test]
    fn horizon_one_single_state_cost() {
        let m = DenseModel::new(1, 1, 1, 0.5, vec![1.0], vec![1.0], vec![1.0]).unwrap();
        let t = simulate_policy(&m, &mut |_: &Belief| 0, &Belief::point_mass(1, 0), 1, 3).unwrap();
        assert_eq!(t.discounted_cost, 1.0);
        assert!(simulate_policy(&m, &mut |_: &Belief| 0, &Belief::point_mass(1, 0), 0, 3).is_err());
    }

    #[test]
    fn simulation_is_seed_deterministic() {
        let m = toy();
        let b0 = Belief::uniform(2);
        let mut pol = |b: &Belief| usize::from(b.probs()[1] > 0.5);
        let a = simulate_policy(&m, &mut pol, &b0, 50, 11).unwrap();
        let b = simulate_policy(&m, &mut pol, &b0, 50, 11).unwrap();
        assert_eq!(a, b);
        assert!((a.discounted_cost - a.recompute_discounted_cost()).abs() < 1e-9);
        assert!(a.truncation_bound > 0.0);
    }
}
