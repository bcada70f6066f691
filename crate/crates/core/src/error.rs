use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("observation {observation} has zero likelihood under control {control}")]
    ZeroLikelihood { control: usize, observation: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("capacity exceeded: {what} requires {required}, limit is {limit}")]
    CapacityExceeded {
        what: &'static str,
        required: u128,
        limit: u128,
    },

    #[error(
        "value iteration did not converge after {iterations} sweeps (last change {last_change})"
    )]
    NonConvergence { iterations: usize, last_change: f64 },

    #[error("lookahead tree requires {required} nodes, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("adaptation metric undefined: J0 equals J1 ({0})")]
    MetricUndefined(f64),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
