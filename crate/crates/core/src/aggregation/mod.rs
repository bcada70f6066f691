//! Two-stage belief aggregation.
//!
//! States are grouped into feature states ([`FeatureSpace`]), feature
//! beliefs are snapped to a uniform simplex grid ([`RepresentativeSet`]),
//! and the resulting finite MDP ([`AggregateMdp`]) is solved offline. The
//! solved MDP induces the base policy `μ(b) = π⋆(Φ(b))` and the cost
//! approximation `J̃(b) = r⋆(Φ(b))` ([`BasePolicyBundle`]).

mod bundle;
mod features;
mod mdp;
mod simplex;

pub use bundle::{
    epsilon_and_bound, oracle_cost_function, solve_bundle, BasePolicyBundle, BoundReport,
};
pub use features::FeatureSpace;
pub use mdp::{
    build_aggregate_mdp, AggregateMdp, BuildOptions, ConstructionMode, Solution,
    DEFAULT_MAX_SWEEPS, DEFAULT_PAIR_BUDGET, DEFAULT_SAMPLES, DEFAULT_VI_THRESHOLD,
    EXACT_OBSERVATION_LIMIT, SAMPLED_ROW_TOL,
};
pub use simplex::{representative_count, RepresentativeSet, DEFAULT_CAPACITY, TIE_TOL};
