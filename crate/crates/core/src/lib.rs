//! Belief-state control for finite partially observable decision problems.
//!
//! The crate is organized bottom-up:
//!
//! - [`pomdp`]: the model abstraction, beliefs, exact Bayes filtering, and
//!   closed-loop simulation.
//! - [`particle`]: a bootstrap particle filter with systematic resampling.
//! - [`aggregation`]: feature spaces, the simplex grid of representative
//!   feature beliefs, the aggregate MDP, value iteration, and error-bound
//!   diagnostics.
//! - [`rollout`]: online lookahead with base-policy rollouts.
//! - [`recovery`]: the replicated-service intrusion-recovery model.
//! - [`evaluation`]: Monte Carlo policy evaluation.
//! - [`document`]: JSON model documents.

pub mod aggregation;
pub mod document;
mod error;
pub mod evaluation;
pub mod particle;
pub mod pomdp;
pub mod recovery;
pub mod rng;
pub mod rollout;

pub use error::{Error, Result};
pub use pomdp::{Belief, DenseModel, Policy, Pomdp, Trajectory};
