//! First aggregation stage: states to feature states.
//!
//! Every state belongs to exactly one feature state (the subsets `I_y`
//! partition the state space), so aggregation probabilities are the 0/1
//! membership `φ_jy`. Disaggregation rows `d_y·` are distributions supported
//! on `I_y`, uniform unless given explicitly.

use serde::{Deserialize, Serialize};

use crate::pomdp::{Belief, PROB_TOL};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeatureSpaceDoc", into = "FeatureSpaceDoc")]
pub struct FeatureSpace {
    num_features: usize,
    state_to_feature: Vec<usize>,
    /// Sparse rows `(state, d_y,state)`.
    disaggregation: Vec<Vec<(usize, f64)>>,
}

impl FeatureSpace {
    /// Each state is its own feature state.
    pub fn identity(n: usize) -> Self {
        FeatureSpace {
            num_features: n,
            state_to_feature: (0..n).collect(),
            disaggregation: (0..n).map(|i| vec![(i, 1.0)]).collect(),
        }
    }

    /// Feature space from a total state → feature assignment, with uniform
    /// disaggregation over each `I_y`.
    pub fn from_assignment(state_to_feature: Vec<usize>, num_features: usize) -> Result<Self> {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_features];
        for (i, &y) in state_to_feature.iter().enumerate() {
            members
                .get_mut(y)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "state {i} maps to feature {y} ≥ {num_features}"
                    ))
                })?
                .push(i);
        }
        if let Some(y) = members.iter().position(Vec::is_empty) {
            return Err(Error::InvalidArgument(format!(
                "feature {y} has no member states"
            )));
        }
        let disaggregation = members
            .into_iter()
            .map(|m| {
                let w = 1.0 / m.len() as f64;
                m.into_iter().map(|i| (i, w)).collect()
            })
            .collect();
        Ok(FeatureSpace {
            num_features,
            state_to_feature,
            disaggregation,
        })
    }

    /// Replaces the disaggregation rows. Each row must be a distribution
    /// supported on the members of its feature.
    pub fn with_disaggregation(mut self, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != self.num_features {
            return Err(Error::InvalidArgument(
                "one disaggregation row per feature".into(),
            ));
        }
        for (y, row) in rows.iter().enumerate() {
            let mut sum = 0.0;
            for &(i, d) in row {
                if self.state_to_feature.get(i) != Some(&y) {
                    return Err(Error::InvalidArgument(format!("d[{y}][{i}] outside I_{y}")));
                }
                if !(d >= 0.0) {
                    return Err(Error::InvalidArgument(format!("d[{y}][{i}] = {d}")));
                }
                sum += d;
            }
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidArgument(format!(
                    "disaggregation row {y} sums to {sum}"
                )));
            }
        }
        self.disaggregation = rows;
        Ok(self)
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_states(&self) -> usize {
        self.state_to_feature.len()
    }

    pub fn feature_of(&self, state: usize) -> usize {
        self.state_to_feature[state]
    }

    pub fn is_identity(&self) -> bool {
        self.num_features == self.num_states()
            && self
                .state_to_feature
                .iter()
                .enumerate()
                .all(|(i, &y)| i == y)
    }

    /// `φ_jy`.
    pub fn aggregation_prob(&self, j: usize, y: usize) -> f64 {
        if self.state_to_feature[j] == y {
            1.0
        } else {
            0.0
        }
    }

    /// `d_yi`.
    pub fn disaggregation_prob(&self, y: usize, i: usize) -> f64 {
        self.disaggregation[y]
            .iter()
            .find(|(s, _)| *s == i)
            .map_or(0.0, |(_, d)| *d)
    }

    /// `q(y) = Σ_i b(i) φ_iy`.
    pub fn feature_belief(&self, b: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.num_features];
        self.feature_belief_into(b, &mut q);
        q
    }

    pub fn feature_belief_into(&self, b: &[f64], q: &mut [f64]) {
        q.iter_mut().for_each(|v| *v = 0.0);
        for (&bi, &y) in b.iter().zip(&self.state_to_feature) {
            q[y] += bi;
        }
    }

    /// `b(i) = Σ_y q(y) d_yi`.
    pub fn disaggregate(&self, q: &[f64]) -> Belief {
        let mut b = vec![0.0; self.num_states()];
        for (row, &qy) in self.disaggregation.iter().zip(q) {
            if qy == 0.0 {
                continue;
            }
            for &(i, d) in row {
                b[i] += qy * d;
            }
        }
        Belief::from_normalized(b)
    }
}

#[derive(Serialize, Deserialize)]
struct FeatureSpaceDoc {
    num_features: usize,
    state_to_feature: Vec<usize>,
    disaggregation: Vec<Vec<(usize, f64)>>,
}

impl TryFrom<FeatureSpaceDoc> for FeatureSpace {
    type Error = Error;
    fn try_from(doc: FeatureSpaceDoc) -> Result<Self> {
        FeatureSpace::from_assignment(doc.state_to_feature, doc.num_features)?
            .with_disaggregation(doc.disaggregation)
    }
}

impl From<FeatureSpace> for FeatureSpaceDoc {
    fn from(fs: FeatureSpace) -> Self {
        FeatureSpaceDoc {
            num_features: fs.num_features,
            state_to_feature: fs.state_to_feature,
            disaggregation: fs.disaggregation,
        }
    }
}
