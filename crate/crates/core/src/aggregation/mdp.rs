//! The aggregate MDP over representative feature beliefs and its solver.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::FeatureSpace;
use super::simplex::RepresentativeSet;
use crate::pomdp::{sample_slice, stage_cost_of, Pomdp};
use crate::rng::{stream, SimRng};
use crate::{Error, Result};

/// Observation spaces up to this size are summed exactly by default.
pub const EXACT_OBSERVATION_LIMIT: usize = 100_000;
/// Observation draws per `(q̃, u)` pair in sampled mode by default.
pub const DEFAULT_SAMPLES: usize = 10_000;
/// Default cap on `|Q̃| · |U|`.
pub const DEFAULT_PAIR_BUDGET: u128 = 50_000_000;
pub const DEFAULT_VI_THRESHOLD: f64 = 0.1;
pub const DEFAULT_MAX_SWEEPS: usize = 1_000_000;
/// Row-sum tolerance for sampled constructions.
pub const SAMPLED_ROW_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ConstructionMode {
    Exact,
    Sampled { samples: usize },
}

impl ConstructionMode {
    /// Exact when the observation space is small enough, sampled otherwise.
    pub fn auto(num_observations: usize) -> Self {
        if num_observations <= EXACT_OBSERVATION_LIMIT {
            ConstructionMode::Exact
        } else {
            ConstructionMode::Sampled {
                samples: DEFAULT_SAMPLES,
            }
        }
    }

    fn row_tolerance(self) -> f64 {
        match self {
            ConstructionMode::Exact => crate::pomdp::PROB_TOL,
            ConstructionMode::Sampled { .. } => SAMPLED_ROW_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// `r⋆`, one value per representative.
    pub values: Vec<f64>,
    /// `π⋆`, one control per representative.
    pub policy: Vec<usize>,
    pub sweeps: usize,
    /// Sup-norm change of the final sweep.
    pub last_change: f64,
}

/// Finite MDP on `Q̃`. Transition rows are stored CSR-style with row index
/// `q̃ · |U| + u` and ascending column indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Artifact", into = "Artifact")]
pub struct AggregateMdp {
    features: FeatureSpace,
    representatives: RepresentativeSet,
    num_controls: usize,
    discount: f64,
    mode: ConstructionMode,
    row_ptr: Vec<usize>,
    columns: Vec<u32>,
    probs: Vec<f64>,
    stage_cost: Vec<f64>,
    solution: Option<Solution>,
}

/// Options for [`build_aggregate_mdp`].
#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    /// `None` picks [`ConstructionMode::auto`].
    pub mode: Option<ConstructionMode>,
    pub seed: u64,
    pub pair_budget: u128,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            mode: None,
            seed: 0,
            pair_budget: DEFAULT_PAIR_BUDGET,
        }
    }
}

struct Scratch {
    belief: Vec<f64>,
    predicted: Vec<f64>,
    likelihood: Vec<f64>,
    feature: Vec<f64>,
    beta: Vec<u32>,
}

impl Scratch {
    fn new(n: usize, m: usize) -> Self {
        Scratch {
            belief: vec![0.0; n],
            predicted: vec![0.0; n],
            likelihood: vec![0.0; n],
            feature: vec![0.0; m],
            beta: vec![0; m],
        }
    }

    /// `p̂(z | b, u)` and the index of `Φ(F(b, u, z))`, given
    /// `self.predicted` already holds the prediction for `(b, u)`.
    fn branch(
        &mut self,
        model: &dyn Pomdp,
        features: &FeatureSpace,
        reps: &RepresentativeSet,
        u: usize,
        z: usize,
    ) -> Option<(f64, usize)> {
        model.likelihoods(z, u, &mut self.likelihood);
        let mut norm = 0.0;
        for (l, &p) in self.likelihood.iter_mut().zip(&self.predicted) {
            *l *= p;
            norm += *l;
        }
        if !(norm > 0.0) {
            return None;
        }
        self.likelihood.iter_mut().for_each(|l| *l /= norm);
        features.feature_belief_into(&self.likelihood, &mut self.feature);
        reps.nearest_composition(&self.feature, &mut self.beta);
        Some((norm, reps.rank(&self.beta)))
    }
}

/// Builds the aggregate MDP: for each representative `q̃` and control `u`,
/// with `b` the disaggregation of `q̃`, the stage cost is `ĝ(b, u)` and
/// the transition to `q̃'` collects `p̂(z | b, u)` over every `z` with
/// `Φ(F(b, u, z)) = q̃'`. Sampled mode estimates the same row from draws
/// `z ~ p̂(· | b, u)`.
pub fn build_aggregate_mdp(
    model: &dyn Pomdp,
    features: FeatureSpace,
    representatives: RepresentativeSet,
    options: BuildOptions,
) -> Result<AggregateMdp> {
    let n = model.num_states();
    let nu = model.num_controls();
    let nz = model.num_observations();
    if features.num_states() != n {
        return Err(Error::InvalidArgument(format!(
            "feature space covers {} states, model has {n}",
            features.num_states()
        )));
    }
    if representatives.dim() != features.num_features() {
        return Err(Error::InvalidArgument(format!(
            "representatives live on {} features, feature space has {}",
            representatives.dim(),
            features.num_features()
        )));
    }
    let pairs = representatives.len() as u128 * nu as u128;
    if pairs > options.pair_budget {
        return Err(Error::CapacityExceeded {
            what: "aggregate state-control pairs",
            required: pairs,
            limit: options.pair_budget,
        });
    }
    let mode = options.mode.unwrap_or_else(|| ConstructionMode::auto(nz));
    if let ConstructionMode::Sampled { samples } = mode {
        if samples == 0 {
            return Err(Error::InvalidArgument(
                "sampled construction needs at least one draw".into(),
            ));
        }
    }
    let m = features.num_features();
    let rows: Vec<(f64, Vec<(u32, f64)>)> = (0..representatives.len() * nu)
        .into_par_iter()
        .map_init(
            || Scratch::new(n, m),
            |s, row| {
                let (q, u) = (row / nu, row % nu);
                let point = representatives.point(q);
                s.belief
                    .copy_from_slice(features.disaggregate(&point).probs());
                let cost = stage_cost_of(model, &s.belief, u);
                model.predict(&s.belief, u, &mut s.predicted);
                let mut acc: HashMap<usize, f64> = HashMap::new();
                match mode {
                    ConstructionMode::Exact => {
                        for z in 0..nz {
                            if let Some((w, k)) = s.branch(model, &features, &representatives, u, z)
                            {
                                *acc.entry(k).or_default() += w;
                            }
                        }
                    }
                    ConstructionMode::Sampled { samples } => {
                        let mut rng = stream(options.seed, &[q as u64, u as u64]);
                        let mut cache: HashMap<usize, usize> = HashMap::new();
                        let w = 1.0 / samples as f64;
                        for _ in 0..samples {
                            let z = draw_observation(model, &s.predicted, u, &mut rng);
                            let k = match cache.get(&z) {
                                Some(&k) => k,
                                None => {
                                    let (_, k) = s
                                        .branch(model, &features, &representatives, u, z)
                                        .expect("sampled observations have positive probability");
                                    cache.insert(z, k);
                                    k
                                }
                            };
                            *acc.entry(k).or_default() += w;
                        }
                    }
                }
                let mut entries: Vec<(u32, f64)> =
                    acc.into_iter().map(|(k, p)| (k as u32, p)).collect();
                entries.sort_unstable_by_key(|e| e.0);
                (cost, entries)
            },
        )
        .collect();

    let mut row_ptr = Vec::with_capacity(rows.len() + 1);
    let mut columns = Vec::new();
    let mut probs = Vec::new();
    let mut stage_cost = Vec::with_capacity(rows.len());
    row_ptr.push(0);
    for (cost, entries) in rows {
        stage_cost.push(cost);
        for (k, p) in entries {
            columns.push(k);
            probs.push(p);
        }
        row_ptr.push(columns.len());
    }
    let mdp = AggregateMdp {
        features,
        representatives,
        num_controls: nu,
        discount: model.discount(),
        mode,
        row_ptr,
        columns,
        probs,
        stage_cost,
        solution: None,
    };
    mdp.check_rows()?;
    Ok(mdp)
}

/// `j ~ predicted`, then `z ~ p(· | j, u)`.
fn draw_observation(model: &dyn Pomdp, predicted: &[f64], u: usize, rng: &mut SimRng) -> usize {
    let j = sample_slice(predicted, rng);
    model.sample_observation(j, u, rng)
}

impl AggregateMdp {
    pub fn features(&self) -> &FeatureSpace {
        &self.features
    }

    pub fn representatives(&self) -> &RepresentativeSet {
        &self.representatives
    }

    pub fn num_states(&self) -> usize {
        self.representatives.len()
    }

    pub fn num_controls(&self) -> usize {
        self.num_controls
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn mode(&self) -> ConstructionMode {
        self.mode
    }

    pub fn solution(&self) -> Option<&Solution> {
        self.solution.as_ref()
    }

    /// `Ĝ[q̃][u]`.
    pub fn stage_cost(&self, q: usize, u: usize) -> f64 {
        self.stage_cost[q * self.num_controls + u]
    }

    /// Nonzero entries `(q̃', P[q̃][u][q̃'])` in ascending `q̃'`.
    pub fn row(&self, q: usize, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = q * self.num_controls + u;
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.columns[span.clone()]
            .iter()
            .zip(&self.probs[span])
            .map(|(&k, &p)| (k as usize, p))
    }

    /// `P[q̃][u][q̃']`.
    pub fn transition(&self, q: usize, u: usize, to: usize) -> f64 {
        self.row(q, u)
            .find(|&(k, _)| k == to)
            .map_or(0.0, |(_, p)| p)
    }

    pub fn nonzeros(&self) -> usize {
        self.probs.len()
    }

    fn check_rows(&self) -> Result<()> {
        let tol = self.mode.row_tolerance();
        for q in 0..self.num_states() {
            for u in 0..self.num_controls {
                let sum: f64 = self.row(q, u).map(|(_, p)| p).sum();
                if (sum - 1.0).abs() > tol {
                    return Err(Error::InvalidModel(format!(
                        "aggregate row ({q}, {u}) sums to {sum}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `min_u [Ĝ(q̃, u) + α Σ P r]` and its smallest minimizer.
    fn backup(&self, q: usize, r: &[f64]) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for u in 0..self.num_controls {
            let future: f64 = self.row(q, u).map(|(k, p)| p * r[k]).sum();
            let v = self.stage_cost(q, u) + self.discount * future;
            if v < best.0 {
                best = (v, u);
            }
        }
        best
    }

    /// `‖T r − r‖∞`.
    pub fn bellman_residual(&self, r: &[f64]) -> f64 {
        (0..self.num_states())
            .into_par_iter()
            .map(|q| (self.backup(q, r).0 - r[q]).abs())
            .reduce(|| 0.0, f64::max)
    }

    /// Jacobi value iteration from `r = 0` until the sup-norm change of a
    /// sweep is at most `threshold`. The policy is greedy with respect to
    /// the returned values.
    pub fn value_iteration(&mut self, threshold: f64, max_sweeps: usize) -> Result<&Solution> {
        if !(threshold > 0.0) {
            return Err(Error::InvalidArgument(format!("threshold {threshold}")));
        }
        let nq = self.num_states();
        let mut r = vec![0.0; nq];
        let mut next = vec![0.0; nq];
        let mut sweeps = 0;
        let mut change = f64::INFINITY;
        while change > threshold {
            if sweeps == max_sweeps {
                return Err(Error::NonConvergence {
                    iterations: sweeps,
                    last_change: change,
                });
            }
            next.par_iter_mut()
                .enumerate()
                .for_each(|(q, v)| *v = self.backup(q, &r).0);
            change = r
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            std::mem::swap(&mut r, &mut next);
            sweeps += 1;
        }
        let policy = (0..nq)
            .into_par_iter()
            .map(|q| self.backup(q, &r).1)
            .collect();
        self.solution = Some(Solution {
            values: r,
            policy,
            sweeps,
            last_change: change,
        });
        Ok(self.solution.as_ref().expect("just solved"))
    }
}

/// Serialized form of an [`AggregateMdp`].
#[derive(Serialize, Deserialize)]
struct Artifact {
    num_features: usize,
    resolution: u32,
    num_controls: usize,
    discount: f64,
    mode: ConstructionMode,
    features: FeatureSpace,
    representatives: RepresentativeSet,
    row_ptr: Vec<usize>,
    columns: Vec<u32>,
    probs: Vec<f64>,
    stage_cost: Vec<f64>,
    solution: Option<Solution>,
}

impl From<AggregateMdp> for Artifact {
    fn from(m: AggregateMdp) -> Self {
        Artifact {
            num_features: m.features.num_features(),
            resolution: m.representatives.resolution(),
            num_controls: m.num_controls,
            discount: m.discount,
            mode: m.mode,
            features: m.features,
            representatives: m.representatives,
            row_ptr: m.row_ptr,
            columns: m.columns,
            probs: m.probs,
            stage_cost: m.stage_cost,
            solution: m.solution,
        }
    }
}

impl TryFrom<Artifact> for AggregateMdp {
    type Error = Error;
    fn try_from(a: Artifact) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidModel(format!("aggregate artifact: {msg}"));
        if a.features.num_features() != a.num_features
            || a.representatives.dim() != a.num_features
            || a.representatives.resolution() != a.resolution
        {
            return Err(bad("header disagrees with the feature space or grid"));
        }
        let nq = a.representatives.len();
        let rows = nq * a.num_controls;
        if a.row_ptr.len() != rows + 1
            || a.row_ptr[0] != 0
            || a.row_ptr.windows(2).any(|w| w[0] > w[1])
            || a.row_ptr[rows] != a.columns.len()
            || a.columns.len() != a.probs.len()
            || a.stage_cost.len() != rows
        {
            return Err(bad("table shapes are inconsistent"));
        }
        if a.columns.iter().any(|&k| k as usize >= nq) {
            return Err(bad("column index out of range"));
        }
        if !(a.discount > 0.0 && a.discount < 1.0) {
            return Err(bad("discount outside (0, 1)"));
        }
        if let Some(s) = &a.solution {
            if s.values.len() != nq
                || s.policy.len() != nq
                || s.policy.iter().any(|&u| u >= a.num_controls)
            {
                return Err(bad("solution shape"));
            }
        }
        let mdp = AggregateMdp {
            features: a.features,
            representatives: a.representatives,
            num_controls: a.num_controls,
            discount: a.discount,
            mode: a.mode,
            row_ptr: a.row_ptr,
            columns: a.columns,
            probs: a.probs,
            stage_cost: a.stage_cost,
            solution: a.solution,
        };
        mdp.check_rows()?;
        Ok(mdp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::DenseModel;

    fn single_state(cost: f64, discount: f64) -> DenseModel {
        DenseModel::new(1, 1, 1, discount, vec![1.0], vec![1.0], vec![cost]).unwrap()
    }

    fn build(model: &dyn Pomdp, rho: u32, mode: Option<ConstructionMode>) -> AggregateMdp {
        let n = model.num_states();
        build_aggregate_mdp(
            model,
            FeatureSpace::identity(n),
            RepresentativeSet::enumerate(n, rho).unwrap(),
            BuildOptions {
                mode,
                ..BuildOptions::default()
            },
        )
        .unwrap()
    }

    /// Fully observed two-state chain.
    fn observed_chain() -> DenseModel {
        let t = vec![0.9, 0.1, 0.0, 1.0, 0.5, 0.5, 1.0, 0.0];
        let o = vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let g = vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 1.0, 1.0];
        DenseModel::new(2, 2, 2, 0.9, t, o, g).unwrap()
    }

    #[test]
    fn single_state_self_loop() {
        let mut mdp = build(&single_state(1.0, 0.5), 1, None);
        assert_eq!(mdp.num_states(), 1);
        assert_eq!(mdp.row(0, 0).collect::<Vec<_>>(), vec![(0, 1.0)]);
        assert_eq!(mdp.stage_cost(0, 0), 1.0);
        let sol = mdp.value_iteration(1e-12, DEFAULT_MAX_SWEEPS).unwrap();
        assert!((sol.values[0] - 2.0).abs() < 1e-11);
        let sol = build(&single_state(1.0, 0.5), 1, None)
            .value_iteration(DEFAULT_VI_THRESHOLD, DEFAULT_MAX_SWEEPS)
            .unwrap()
            .clone();
        assert!((sol.values[0] - 2.0).abs() <= DEFAULT_VI_THRESHOLD);
    }

    #[test]
    fn observed_chain_rows() {
        let mdp = build(&observed_chain(), 2, None);
        // Representatives (0,1), (½,½), (1,0); fully observed, so every
        // successor is a vertex.
        assert_eq!(mdp.num_states(), 3);
        assert_eq!(mdp.row(2, 0).collect::<Vec<_>>(), vec![(0, 0.1), (2, 0.9)]);
        assert_eq!(mdp.row(1, 1).collect::<Vec<_>>(), vec![(0, 0.5), (2, 0.5)]);
        assert_eq!(mdp.stage_cost(1, 0), 1.0);
        assert_eq!(mdp.stage_cost(2, 1), 1.0);
        assert_eq!(mdp.transition(0, 0, 1), 0.0);
    }

    #[test]
    fn value_iteration_is_monotone_and_caps() {
        let mut mdp = build(&observed_chain(), 3, None);
        let err = mdp.clone().value_iteration(1e-12, 5).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 5, .. }));
        let mut r = vec![0.0; mdp.num_states()];
        for _ in 0..40 {
            let next: Vec<f64> = (0..mdp.num_states()).map(|q| mdp.backup(q, &r).0).collect();
            assert!(next.iter().zip(&r).all(|(a, b)| a >= b));
            r = next;
        }
        let sol = mdp
            .value_iteration(1e-6, DEFAULT_MAX_SWEEPS)
            .unwrap()
            .clone();
        assert!(mdp.bellman_residual(&sol.values) <= 1e-6);
    }

    #[test]
    fn sampled_rows_approach_exact() {
        let model = observed_chain();
        let exact = build(&model, 4, None);
        let sampled = build(
            &model,
            4,
            Some(ConstructionMode::Sampled { samples: 100_000 }),
        );
        for q in 0..exact.num_states() {
            for u in 0..2 {
                for k in 0..exact.num_states() {
                    let d = (exact.transition(q, u, k) - sampled.transition(q, u, k)).abs();
                    assert!(d < 0.01, "({q},{u},{k}) {d}");
                }
                assert_eq!(exact.stage_cost(q, u), sampled.stage_cost(q, u));
            }
        }
    }

    #[test]
    fn capacity_and_shape_errors() {
        let model = observed_chain();
        let err = build_aggregate_mdp(
            &model,
            FeatureSpace::identity(2),
            RepresentativeSet::enumerate(2, 10).unwrap(),
            BuildOptions {
                pair_budget: 5,
                ..BuildOptions::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::CapacityExceeded { required: 22, .. }));
        assert!(build_aggregate_mdp(
            &model,
            FeatureSpace::identity(3),
            RepresentativeSet::enumerate(3, 1).unwrap(),
            BuildOptions::default()
        )
        .is_err());
    }

    #[test]
    fn artifact_round_trip() {
        let mut mdp = build(&observed_chain(), 3, None);
        mdp.value_iteration(1e-3, DEFAULT_MAX_SWEEPS).unwrap();
        let text = serde_json::to_string(&mdp).unwrap();
        let back: AggregateMdp = serde_json::from_str(&text).unwrap();
        assert_eq!(back, mdp);
        let broken = text.replacen("\"discount\":0.9", "\"discount\":1.5", 1);
        assert!(serde_json::from_str::<AggregateMdp>(&broken).is_err());
    }
}
