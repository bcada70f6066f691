//! Bootstrap particle filter.
//!
//! Each update propagates every particle through the transition kernel,
//! weights it by the observation likelihood, and draws a fresh set of the
//! same size by systematic resampling (one uniform offset, stride `1/M`).
//! The empirical measure of the particles is the belief estimate.
//!
//! When every propagated particle has zero likelihood the update keeps the
//! propagated set unweighted and flags the step as degenerate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::pomdp::{belief_update, Belief, Pomdp};
use crate::rng::SimRng;
use crate::{Error, Result};

/// Particle count used when none is configured.
pub const DEFAULT_PARTICLES: usize = 50;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticleSet {
    particles: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParticleUpdate {
    pub set: ParticleSet,
    /// All weights were zero; `set` holds the propagated particles.
    pub degenerate: bool,
}

impl ParticleSet {
    pub fn from_particles(particles: Vec<usize>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::InvalidArgument(
                "particle set must be nonempty".into(),
            ));
        }
        Ok(ParticleSet { particles })
    }

    /// `count` i.i.d. draws from `b0`.
    pub fn init(b0: &Belief, count: usize, rng: &mut SimRng) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidArgument(
                "particle count must be at least 1".into(),
            ));
        }
        let particles = (0..count).map(|_| b0.sample_state(rng)).collect();
        Ok(ParticleSet { particles })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[usize] {
        &self.particles
    }

    pub fn update(
        &self,
        model: &dyn Pomdp,
        u: usize,
        z: usize,
        rng: &mut SimRng,
    ) -> ParticleUpdate {
        let propagated: Vec<usize> = self
            .particles
            .iter()
            .map(|&i| model.sample_next_state(i, u, rng))
            .collect();
        let weights: Vec<f64> = propagated
            .iter()
            .map(|&j| model.observation(z, j, u))
            .collect();
        match systematic_resample(&weights, self.len(), rng) {
            Some(idx) => ParticleUpdate {
                set: ParticleSet {
                    particles: idx.into_iter().map(|k| propagated[k]).collect(),
                },
                degenerate: false,
            },
            None => ParticleUpdate {
                set: ParticleSet {
                    particles: propagated,
                },
                degenerate: true,
            },
        }
    }

    /// Empirical measure `b̂(j) = #{s : ĵ_s = j} / M`.
    pub fn belief(&self, n: usize) -> Result<Belief> {
        let mut counts = vec![0usize; n];
        for &p in &self.particles {
            *counts.get_mut(p).ok_or_else(|| {
                Error::InvalidArgument(format!("particle {p} outside {n} states"))
            })? += 1;
        }
        let m = self.len() as f64;
        Belief::new(counts.into_iter().map(|c| c as f64 / m).collect())
    }
}

/// Systematic resampling: returns `count` indices into `weights`, or `None`
/// when the weights sum to zero. Index `k` appears either `⌊count·w_k⌋` or
/// `⌈count·w_k⌉` times, where `w` are the normalized weights.
pub fn systematic_resample(weights: &[f64], count: usize, rng: &mut SimRng) -> Option<Vec<usize>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let stride = total / count as f64;
    let mut pointer = rng.gen::<f64>() * stride;
    let mut out = Vec::with_capacity(count);
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last_positive = k;
        cumulative += w;
        while out.len() < count && pointer < cumulative {
            out.push(k);
            pointer += stride;
        }
    }
    // Rounding can leave the final pointer a hair past the cumulative total.
    out.resize(count, last_positive);
    Some(out)
}

/// Pluggable belief estimator: exact recursion or particle approximation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EstimatorKind {
    Exact,
    Particle { particles: usize },
}

#[derive(Clone, Debug)]
pub enum BeliefFilter {
    Exact(Belief),
    Particle {
        set: ParticleSet,
        n: usize,
        degenerate_steps: usize,
    },
}

impl BeliefFilter {
    pub fn new(kind: EstimatorKind, b0: &Belief, rng: &mut SimRng) -> Result<Self> {
        Ok(match kind {
            EstimatorKind::Exact => BeliefFilter::Exact(b0.clone()),
            EstimatorKind::Particle { particles } => BeliefFilter::Particle {
                set: ParticleSet::init(b0, particles, rng)?,
                n: b0.len(),
                degenerate_steps: 0,
            },
        })
    }

    pub fn belief(&self) -> Belief {
        match self {
            BeliefFilter::Exact(b) => b.clone(),
            BeliefFilter::Particle { set, n, .. } => {
                set.belief(*n).expect("particles are valid state indices")
            }
        }
    }

    pub fn update(
        &mut self,
        model: &dyn Pomdp,
        u: usize,
        z: usize,
        rng: &mut SimRng,
    ) -> Result<()> {
        match self {
            BeliefFilter::Exact(b) => *b = belief_update(model, b, u, z)?,
            BeliefFilter::Particle {
                set,
                degenerate_steps,
                ..
            } => {
                let next = set.update(model, u, z, rng);
                *degenerate_steps += usize::from(next.degenerate);
                *set = next.set;
            }
        }
        Ok(())
    }
}
