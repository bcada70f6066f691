//! Intrusion recovery for a service replicated over `K` nodes.
//!
//! State `i` and control `u` are bitmasks over the replicas: bit `l` of `i`
//! is set when replica `l` is compromised, bit `l` of `u` when replica `l`
//! is recovered. A recovered replica is safe after the step. A compromised
//! replica that is not recovered stays compromised. A safe replica that is
//! not recovered is compromised with probability
//! `min{rate · (1 + N_l(i)), 1}`, where `N_l(i)` counts its compromised
//! neighbors in the current state. Replicas move independently given `i`.
//!
//! Each replica emits an alert count drawn from a distribution that depends
//! on whether it is compromised after the transition. The joint observation
//! packs the per-replica counts as base-`S` digits, replica 0 least
//! significant, where `S` is the alert support.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::FeatureSpace;
use crate::pomdp::{sample_slice, DenseModel, Pomdp, PROB_TOL};
use crate::rng::SimRng;
use crate::{Error, Result};

/// Beta-binomial pmf over `0..=trials`.
///
/// Uses `pmf(0) = Π_{t<n} (b + t) / (a + b + t)` and the ratio
/// `pmf(k+1) / pmf(k) = (n − k)(k + a) / ((k + 1)(n − k − 1 + b))`.
pub fn betabin_pmf(trials: u32, a: f64, b: f64) -> Result<Vec<f64>> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Beta-binomial shape ({a}, {b})"
        )));
    }
    let n = trials as f64;
    let mut pmf = Vec::with_capacity(trials as usize + 1);
    let mut p: f64 = (0..trials)
        .map(|t| (b + t as f64) / (a + b + t as f64))
        .product();
    pmf.push(p);
    for k in 0..trials {
        let k = k as f64;
        p *= (n - k) * (k + a) / ((k + 1.0) * (n - k - 1.0 + b));
        pmf.push(p);
    }
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|x| *x /= total);
    Ok(pmf)
}

/// Per-replica alert distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum AlertDistribution {
    BetaBinomial { trials: u32, a: f64, b: f64 },
    Pmf { probs: Vec<f64> },
}

impl AlertDistribution {
    pub fn pmf(&self) -> Result<Vec<f64>> {
        match self {
            AlertDistribution::BetaBinomial { trials, a, b } => betabin_pmf(*trials, *a, *b),
            AlertDistribution::Pmf { probs } => {
                let sum: f64 = probs.iter().sum();
                if probs.is_empty()
                    || probs.iter().any(|p| !(*p >= 0.0))
                    || (sum - 1.0).abs() > PROB_TOL
                {
                    return Err(Error::InvalidArgument(format!("alert pmf {probs:?}")));
                }
                Ok(probs.clone())
            }
        }
    }
}

fn default_rate() -> f64 {
    0.2
}
fn default_intrusion_weight() -> f64 {
    2.0
}
fn default_recovery_weight() -> f64 {
    1.0
}
fn default_discount() -> f64 {
    0.99
}
fn default_compromised() -> AlertDistribution {
    AlertDistribution::BetaBinomial {
        trials: 7,
        a: 1.0,
        b: 0.7,
    }
}
fn default_safe() -> AlertDistribution {
    AlertDistribution::BetaBinomial {
        trials: 7,
        a: 0.7,
        b: 3.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryParams {
    pub replicas: usize,
    /// Neighbor lists; `None` is the complete graph.
    #[serde(default)]
    pub adjacency: Option<Vec<Vec<usize>>>,
    #[serde(default = "default_rate")]
    pub base_compromise_rate: f64,
    #[serde(default = "default_compromised")]
    pub obs_compromised: AlertDistribution,
    #[serde(default = "default_safe")]
    pub obs_safe: AlertDistribution,
    /// Charged per compromised replica left running.
    #[serde(default = "default_intrusion_weight")]
    pub intrusion_cost_weight: f64,
    /// Charged per safe replica that is recovered.
    #[serde(default = "default_recovery_weight")]
    pub recovery_cost_weight: f64,
    /// Charged per compromised replica that is recovered.
    #[serde(default)]
    pub restoration_cost: f64,
    #[serde(default = "default_discount")]
    pub discount: f64,
}

impl RecoveryParams {
    /// Defaults on the complete graph over `replicas` nodes.
    pub fn new(replicas: usize) -> Self {
        RecoveryParams {
            replicas,
            adjacency: None,
            base_compromise_rate: default_rate(),
            obs_compromised: default_compromised(),
            obs_safe: default_safe(),
            intrusion_cost_weight: default_intrusion_weight(),
            recovery_cost_weight: default_recovery_weight(),
            restoration_cost: 0.0,
            discount: default_discount(),
        }
    }

    /// Neighbor bitmask of each replica.
    fn neighbor_masks(&self) -> Result<Vec<usize>> {
        let k = self.replicas;
        match &self.adjacency {
            None => Ok((0..k).map(|l| ((1usize << k) - 1) & !(1 << l)).collect()),
            Some(lists) => {
                if lists.len() != k {
                    return Err(Error::InvalidArgument(format!(
                        "adjacency has {} rows for {k} replicas",
                        lists.len()
                    )));
                }
                let mut masks = vec![0usize; k];
                for (l, nbrs) in lists.iter().enumerate() {
                    for &m in nbrs {
                        if m >= k || m == l {
                            return Err(Error::InvalidArgument(format!(
                                "bad neighbor {m} of replica {l}"
                            )));
                        }
                        masks[l] |= 1 << m;
                    }
                }
                for l in 0..k {
                    for m in 0..k {
                        if (masks[l] >> m) & 1 != (masks[m] >> l) & 1 {
                            return Err(Error::InvalidArgument(format!(
                                "adjacency not symmetric at ({l}, {m})"
                            )));
                        }
                    }
                }
                Ok(masks)
            }
        }
    }
}

/// Above this many `(i, u, j)` entries the transition table is not cached.
const TRANSITION_CACHE_LIMIT: usize = 1 << 22;
/// Largest `K` with a tabulated observation space that fits in `usize`
/// arithmetic comfortably.
const MAX_REPLICAS: usize = 16;

/// Factored recovery model.
#[derive(Clone, Debug)]
pub struct RecoveryModel {
    replicas: usize,
    neighbors: Vec<usize>,
    rate: f64,
    support: usize,
    /// `[safe, compromised]` alert pmfs.
    alerts: [Vec<f64>; 2],
    intrusion: f64,
    recovery: f64,
    restoration: f64,
    discount: f64,
    transitions: Option<Vec<f64>>,
    /// `g(i, u)` indexed `i · n + u`, when cached.
    costs: Option<Vec<f64>>,
}

impl RecoveryModel {
    pub fn new(params: &RecoveryParams) -> Result<Self> {
        let k = params.replicas;
        if k == 0 || k > MAX_REPLICAS {
            return Err(Error::InvalidArgument(format!(
                "replica count {k} outside 1..={MAX_REPLICAS}"
            )));
        }
        if !(params.discount > 0.0 && params.discount < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "discount {}",
                params.discount
            )));
        }
        if !(0.0..=1.0).contains(&params.base_compromise_rate) {
            return Err(Error::InvalidArgument(format!(
                "rate {}",
                params.base_compromise_rate
            )));
        }
        let safe = params.obs_safe.pmf()?;
        let compromised = params.obs_compromised.pmf()?;
        if safe.len() != compromised.len() {
            return Err(Error::InvalidArgument(
                "alert distributions differ in support".into(),
            ));
        }
        let support = safe.len();
        if (support as f64).powi(k as i32) > usize::MAX as f64 / 2.0 {
            return Err(Error::CapacityExceeded {
                what: "observation space",
                required: (support as u128).saturating_pow(k as u32),
                limit: usize::MAX as u128 / 2,
            });
        }
        let mut model = RecoveryModel {
            replicas: k,
            neighbors: params.neighbor_masks()?,
            rate: params.base_compromise_rate,
            support,
            alerts: [safe, compromised],
            intrusion: params.intrusion_cost_weight,
            recovery: params.recovery_cost_weight,
            restoration: params.restoration_cost,
            discount: params.discount,
            transitions: None,
            costs: None,
        };
        let n = 1usize << k;
        if n * n * n <= TRANSITION_CACHE_LIMIT {
            let mut table = vec![0.0; n * n * n];
            for i in 0..n {
                for u in 0..n {
                    for j in 0..n {
                        table[(i * n + u) * n + j] = model.factored_transition(i, u, j);
                    }
                }
            }
            model.transitions = Some(table);
        }
        if n * n <= TRANSITION_CACHE_LIMIT {
            let costs = (0..n * n)
                .map(|k| model.factored_cost(k / n, k % n))
                .collect();
            model.costs = Some(costs);
        }
        Ok(model)
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    /// Probability that replica `l` is compromised after `(i, u)`.
    pub fn compromise_probability(&self, i: usize, u: usize, l: usize) -> f64 {
        if (u >> l) & 1 == 1 {
            0.0
        } else if (i >> l) & 1 == 1 {
            1.0
        } else {
            let compromised_neighbors = (i & self.neighbors[l]).count_ones() as f64;
            (self.rate * (1.0 + compromised_neighbors)).min(1.0)
        }
    }

    fn factored_transition(&self, i: usize, u: usize, j: usize) -> f64 {
        (0..self.replicas)
            .map(|l| {
                let p = self.compromise_probability(i, u, l);
                if (j >> l) & 1 == 1 {
                    p
                } else {
                    1.0 - p
                }
            })
            .product()
    }

    /// Alert count of replica `l` in joint observation `z`.
    pub fn alert(&self, z: usize, l: usize) -> usize {
        z / self.support.pow(l as u32) % self.support
    }

    /// Per-replica alert pmf for a safe (`false`) or compromised replica.
    pub fn alert_pmf(&self, compromised: bool) -> &[f64] {
        &self.alerts[usize::from(compromised)]
    }

    fn stage_cost(&self, i: usize, u: usize) -> f64 {
        match &self.costs {
            Some(c) => c[(i << self.replicas) + u],
            None => self.factored_cost(i, u),
        }
    }

    fn factored_cost(&self, i: usize, u: usize) -> f64 {
        (0..self.replicas)
            .map(|l| match ((i >> l) & 1 == 1, (u >> l) & 1 == 1) {
                (true, false) => self.intrusion,
                (false, true) => self.recovery,
                (true, true) => self.restoration,
                (false, false) => 0.0,
            })
            .sum()
    }
}

impl Pomdp for RecoveryModel {
    fn num_states(&self) -> usize {
        1 << self.replicas
    }
    fn num_controls(&self) -> usize {
        1 << self.replicas
    }
    fn num_observations(&self) -> usize {
        self.support.pow(self.replicas as u32)
    }
    fn discount(&self) -> f64 {
        self.discount
    }

    fn transition(&self, i: usize, u: usize, j: usize) -> f64 {
        match &self.transitions {
            Some(t) => {
                let n = self.num_states();
                t[(i * n + u) * n + j]
            }
            None => self.factored_transition(i, u, j),
        }
    }

    fn observation(&self, z: usize, j: usize, _u: usize) -> f64 {
        (0..self.replicas)
            .map(|l| self.alerts[(j >> l) & 1][self.alert(z, l)])
            .product()
    }

    fn cost(&self, i: usize, u: usize, _j: usize) -> f64 {
        self.stage_cost(i, u)
    }

    fn expected_cost(&self, i: usize, u: usize) -> f64 {
        self.stage_cost(i, u)
    }

    fn predict(&self, belief: &[f64], u: usize, out: &mut [f64]) {
        let n = self.num_states();
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, &bi) in belief.iter().enumerate() {
            if bi == 0.0 {
                continue;
            }
            match &self.transitions {
                Some(t) => {
                    let row = &t[(i * n + u) * n..(i * n + u + 1) * n];
                    for (o, &p) in out.iter_mut().zip(row) {
                        *o += bi * p;
                    }
                }
                None => {
                    // Product measure over replicas, expanded one bit at a time.
                    let mut row = vec![0.0; n];
                    row[0] = bi;
                    for l in 0..self.replicas {
                        let p = self.compromise_probability(i, u, l);
                        for j in 0..(1 << l) {
                            row[j | (1 << l)] = row[j] * p;
                            row[j] *= 1.0 - p;
                        }
                    }
                    for (o, r) in out.iter_mut().zip(row) {
                        *o += r;
                    }
                }
            }
        }
    }

    fn likelihoods(&self, z: usize, _u: usize, out: &mut [f64]) {
        out[0] = 1.0;
        let mut rest = z;
        for l in 0..self.replicas {
            let a = rest % self.support;
            rest /= self.support;
            let (safe, comp) = (self.alerts[0][a], self.alerts[1][a]);
            for j in 0..(1 << l) {
                out[j | (1 << l)] = out[j] * comp;
                out[j] *= safe;
            }
        }
    }

    fn sample_next_state(&self, i: usize, u: usize, rng: &mut SimRng) -> usize {
        (0..self.replicas).fold(0, |j, l| {
            let p = self.compromise_probability(i, u, l);
            if rng.gen::<f64>() < p {
                j | (1 << l)
            } else {
                j
            }
        })
    }

    fn sample_observation(&self, j: usize, _u: usize, rng: &mut SimRng) -> usize {
        let mut z = 0;
        let mut place = 1;
        for l in 0..self.replicas {
            z += place * sample_slice(&self.alerts[(j >> l) & 1], rng);
            place *= self.support;
        }
        z
    }

    fn cost_bound(&self) -> f64 {
        let per = self
            .intrusion
            .abs()
            .max(self.recovery.abs())
            .max(self.restoration.abs());
        per * self.replicas as f64
    }
}

/// Largest replica count materialized as dense tensors.
pub const DENSE_REPLICA_LIMIT: usize = 2;

/// Dense tensors for `K ≤ 2`, the factored evaluator otherwise.
pub fn build_recovery_pomdp(params: &RecoveryParams) -> Result<Box<dyn Pomdp>> {
    let model = RecoveryModel::new(params)?;
    if params.replicas <= DENSE_REPLICA_LIMIT {
        Ok(Box::new(DenseModel::from_model(&model)?))
    } else {
        Ok(Box::new(model))
    }
}

/// Changes applied to the model parameters at the switch step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDelta {
    #[serde(default)]
    pub base_compromise_rate: Option<f64>,
    #[serde(default)]
    pub obs_safe: Option<AlertDistribution>,
    #[serde(default)]
    pub obs_compromised: Option<AlertDistribution>,
    /// Mixes the (possibly replaced) safe alert pmf toward the compromised
    /// one with this weight.
    #[serde(default)]
    pub safe_mix_toward_compromised: Option<f64>,
}

impl ParamsDelta {
    pub fn identity() -> Self {
        ParamsDelta::default()
    }

    /// Safe alerts drift toward the compromised profile with weight 0.3.
    pub fn noisy_alerts() -> Self {
        ParamsDelta {
            safe_mix_toward_compromised: Some(0.3),
            ..ParamsDelta::default()
        }
    }

    pub fn apply(&self, params: &RecoveryParams) -> Result<RecoveryParams> {
        let mut out = params.clone();
        if let Some(rate) = self.base_compromise_rate {
            out.base_compromise_rate = rate;
        }
        if let Some(d) = &self.obs_safe {
            out.obs_safe = d.clone();
        }
        if let Some(d) = &self.obs_compromised {
            out.obs_compromised = d.clone();
        }
        if let Some(w) = self.safe_mix_toward_compromised {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidArgument(format!("mixing weight {w}")));
            }
            let safe = out.obs_safe.pmf()?;
            let comp = out.obs_compromised.pmf()?;
            if safe.len() != comp.len() {
                return Err(Error::InvalidArgument(
                    "alert distributions differ in support".into(),
                ));
            }
            out.obs_safe = AlertDistribution::Pmf {
                probs: safe
                    .iter()
                    .zip(&comp)
                    .map(|(s, c)| (1.0 - w) * s + w * c)
                    .collect(),
            };
        }
        Ok(out)
    }
}

fn default_delta() -> ParamsDelta {
    ParamsDelta::noisy_alerts()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSwitch {
    pub switch_step: usize,
    #[serde(default = "default_delta")]
    pub delta: ParamsDelta,
}

/// Parameters in force at step `k`: the originals before the switch step,
/// the changed ones from it on.
pub fn apply_scenario_switch(
    params: &RecoveryParams,
    switch: &ScenarioSwitch,
    k: usize,
) -> Result<RecoveryParams> {
    if k < switch.switch_step {
        Ok(params.clone())
    } else {
        switch.delta.apply(params)
    }
}

/// Feature `y` is the bitmask over zones with bit `v` set iff some replica
/// in zone `v` is compromised.
pub fn zone_feature_space(params: &RecoveryParams, zones: &[Vec<usize>]) -> Result<FeatureSpace> {
    let k = params.replicas;
    let mut zone_of = vec![usize::MAX; k];
    for (v, zone) in zones.iter().enumerate() {
        if zone.is_empty() {
            return Err(Error::InvalidArgument(format!("zone {v} is empty")));
        }
        for &l in zone {
            if l >= k || zone_of[l] != usize::MAX {
                return Err(Error::InvalidArgument(format!(
                    "replica {l} out of range or in two zones"
                )));
            }
            zone_of[l] = v;
        }
    }
    if let Some(l) = zone_of.iter().position(|&v| v == usize::MAX) {
        return Err(Error::InvalidArgument(format!("replica {l} is in no zone")));
    }
    let assignment = (0..1usize << k)
        .map(|i| {
            (0..k)
                .filter(|&l| (i >> l) & 1 == 1)
                .fold(0, |y, l| y | (1 << zone_of[l]))
        })
        .collect();
    FeatureSpace::from_assignment(assignment, 1 << zones.len())
}
