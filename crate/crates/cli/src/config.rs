//! Experiment configuration.
//!
//! Every section except `model` is optional. Unknown fields are rejected.

use std::path::{Path, PathBuf};

use beliefctl_core::aggregation::{
    ConstructionMode, DEFAULT_CAPACITY, DEFAULT_MAX_SWEEPS, DEFAULT_PAIR_BUDGET,
    DEFAULT_VI_THRESHOLD,
};
use beliefctl_core::particle::{EstimatorKind, DEFAULT_PARTICLES};
use beliefctl_core::recovery::{RecoveryParams, ScenarioSwitch};
use beliefctl_core::rollout::RolloutConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Above this many states the default estimator is the particle filter.
pub const EXACT_FILTER_STATE_LIMIT: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub aggregation: AggregationSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default = "default_rollout")]
    pub rollout: RolloutConfig,
    #[serde(default)]
    pub evaluation: EvaluationSpec,
    #[serde(default)]
    pub scenario: Option<ScenarioSwitch>,
    #[serde(default)]
    pub bound: BoundSpec,
    #[serde(default)]
    pub adaptation: Option<AdaptationSpec>,
    #[serde(default)]
    pub counts: CountSpec,
    /// Previously solved bundle for `evaluate`; solved in-process if absent.
    #[serde(default)]
    pub bundle: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Recovery(RecoveryParams),
    /// JSON model document, relative to the config file.
    Path(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum FeatureSpec {
    Identity,
    /// Recovery models only: one feature per subset of compromised zones.
    Zones {
        zones: Vec<Vec<usize>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregationSpec {
    #[serde(default = "default_features")]
    pub features: FeatureSpec,
    #[serde(default = "default_resolution")]
    pub resolution: u32,
    /// Exact or sampled; chosen from the observation count if absent.
    #[serde(default)]
    pub construction: Option<ConstructionMode>,
    #[serde(default = "default_capacity")]
    pub capacity: u128,
    #[serde(default = "default_pair_budget")]
    pub pair_budget: u128,
}

impl Default for AggregationSpec {
    fn default() -> Self {
        AggregationSpec {
            features: default_features(),
            resolution: default_resolution(),
            construction: None,
            capacity: DEFAULT_CAPACITY,
            pair_budget: DEFAULT_PAIR_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            threshold: DEFAULT_VI_THRESHOLD,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Base,
    Rollout,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Base => "base",
            PolicyKind::Rollout => "rollout",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSpec {
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Point mass on state 0 if absent.
    #[serde(default)]
    pub initial_belief: Option<Vec<f64>>,
    /// Exact up to 256 states, particles beyond, if absent.
    #[serde(default)]
    pub estimator: Option<EstimatorKind>,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
}

impl Default for EvaluationSpec {
    fn default() -> Self {
        EvaluationSpec {
            episodes: default_episodes(),
            horizon: default_horizon(),
            initial_belief: None,
            estimator: None,
            policies: default_policies(),
        }
    }
}

impl EvaluationSpec {
    pub fn estimator_for(&self, num_states: usize) -> EstimatorKind {
        self.estimator
            .unwrap_or(if num_states <= EXACT_FILTER_STATE_LIMIT {
                EstimatorKind::Exact
            } else {
                EstimatorKind::Particle {
                    particles: DEFAULT_PARTICLES,
                }
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    #[serde(default = "default_bound_resolutions")]
    pub resolutions: Vec<u32>,
    #[serde(default = "default_oracle_resolution")]
    pub oracle_resolution: u32,
    /// Solver threshold for the oracle and every swept bundle; the solver
    /// section's threshold if absent.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Upper bound on the probe count; probes are the finest uniform grid
    /// on the belief simplex that fits.
    #[serde(default = "default_probes")]
    pub probes: usize,
}

impl Default for BoundSpec {
    fn default() -> Self {
        BoundSpec {
            resolutions: default_bound_resolutions(),
            oracle_resolution: default_oracle_resolution(),
            threshold: None,
            probes: default_probes(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub lookahead: usize,
    pub horizon: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationSpec {
    /// Best-known cost after the switch.
    pub j1: f64,
    /// Compute budgets in increasing order.
    #[serde(default = "default_budgets")]
    pub budgets: Vec<Budget>,
    /// The evaluation section's values if absent.
    #[serde(default)]
    pub episodes: Option<usize>,
    #[serde(default)]
    pub horizon: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountSpec {
    #[serde(default = "default_count_features")]
    pub features: Vec<usize>,
    #[serde(default = "default_count_resolutions")]
    pub resolutions: Vec<u32>,
}

impl Default for CountSpec {
    fn default() -> Self {
        CountSpec {
            features: default_count_features(),
            resolutions: default_count_resolutions(),
        }
    }
}

fn default_rollout() -> RolloutConfig {
    RolloutConfig::new(1, 10)
}
fn default_features() -> FeatureSpec {
    FeatureSpec::Identity
}
fn default_resolution() -> u32 {
    1
}
fn default_capacity() -> u128 {
    DEFAULT_CAPACITY
}
fn default_pair_budget() -> u128 {
    DEFAULT_PAIR_BUDGET
}
fn default_threshold() -> f64 {
    DEFAULT_VI_THRESHOLD
}
fn default_max_sweeps() -> usize {
    DEFAULT_MAX_SWEEPS
}
fn default_episodes() -> usize {
    1000
}
fn default_horizon() -> usize {
    500
}
fn default_policies() -> Vec<PolicyKind> {
    vec![PolicyKind::Base, PolicyKind::Rollout]
}
fn default_bound_resolutions() -> Vec<u32> {
    (1..=10).collect()
}
fn default_oracle_resolution() -> u32 {
    200
}
fn default_probes() -> usize {
    1001
}
fn default_budgets() -> Vec<Budget> {
    [(1, 0), (1, 5), (1, 10), (2, 10), (2, 20)]
        .into_iter()
        .map(|(lookahead, horizon)| Budget { lookahead, horizon })
        .collect()
}
fn default_count_features() -> Vec<usize> {
    vec![2, 4, 8]
}
fn default_count_resolutions() -> Vec<u32> {
    (1..=8).collect()
}

/// A parsed config with its source bytes, kept for hashing and for
/// resolving relative paths.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub bytes: Vec<u8>,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config = parse(&bytes)?;
        Ok(LoadedConfig {
            config,
            bytes,
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

pub fn parse(bytes: &[u8]) -> Result<ExperimentConfig, CliError> {
    let config: ExperimentConfig =
        serde_json::from_slice(bytes).map_err(|e| CliError::Config(e.to_string()))?;
    validate(&config)?;
    Ok(config)
}

fn validate(c: &ExperimentConfig) -> Result<(), CliError> {
    let fail = |m: &str| Err(CliError::Config(m.to_string()));
    if c.aggregation.resolution == 0 {
        return fail("aggregation.resolution must be at least 1");
    }
    if !(c.solver.threshold > 0.0) {
        return fail("solver.threshold must be positive");
    }
    if c.bound.threshold.is_some_and(|t| !(t > 0.0)) {
        return fail("bound.threshold must be positive");
    }
    if c.bound.resolutions.contains(&0) || c.bound.oracle_resolution == 0 {
        return fail("bound resolutions must be at least 1");
    }
    if c.counts.features.contains(&0) || c.counts.resolutions.contains(&0) {
        return fail("counts entries must be at least 1");
    }
    if let Some(a) = &c.adaptation {
        if !a.j1.is_finite() {
            return fail("adaptation.j1 must be finite");
        }
        if a.budgets.iter().any(|b| b.lookahead == 0) {
            return fail("adaptation budgets need lookahead at least 1");
        }
    }
    let needs_recovery =
        matches!(c.aggregation.features, FeatureSpec::Zones { .. }) || c.scenario.is_some();
    if needs_recovery && !matches!(c.model, ModelSpec::Recovery(_)) {
        return fail("zone features and scenario switches need a recovery model");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = parse(br#"{"model": {"recovery": {"replicas": 1}}}"#).unwrap();
        assert_eq!(c.solver.threshold, 0.1);
        assert_eq!(c.rollout.num_sims, 20);
        assert_eq!((c.rollout.lookahead, c.rollout.horizon), (1, 10));
        assert_eq!(c.evaluation.episodes, 1000);
        assert_eq!(c.evaluation.horizon, 500);
        assert_eq!(c.evaluation.estimator_for(2), EstimatorKind::Exact);
        assert_eq!(
            c.evaluation.estimator_for(1024),
            EstimatorKind::Particle { particles: 50 }
        );
        let ModelSpec::Recovery(p) = &c.model else {
            panic!()
        };
        assert_eq!(p.discount, 0.99);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"model": {"recovery": {"replicas": 1}}, "extra": 1}"#,
            r#"{"model": {"recovery": {"replicas": 1}}, "solver": {"threshold": 0}}"#,
            r#"{"model": {"recovery": {"replicas": 1}}, "adaptation": {}}"#,
            r#"{"model": {"path": "m.json"}, "aggregation": {"features": {"kind": "zones", "zones": [[0]]}}}"#,
            r#"{"model": {"recovery": {"replicas": 1, "colour": 2}}}"#,
            r#"not json"#,
        ] {
            assert!(
                matches!(parse(text.as_bytes()), Err(CliError::Config(_))),
                "{text}"
            );
        }
    }
}
