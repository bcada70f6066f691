//! JSON model documents.
//!
//! A document carries `n`, `controls`, `observations`, and `discount`, plus
//! either dense `transition` `[i][u][j]`, `observation` `[j][u][z]`, and
//! `cost` `[i][u][j]` arrays, or a `generator` reference naming a factored
//! model and its parameters.

use serde::{Deserialize, Serialize};

use crate::pomdp::{DenseModel, Pomdp};
use crate::recovery::{build_recovery_pomdp, RecoveryParams};
use crate::{Error, Result};

type Tensor = Vec<Vec<Vec<f64>>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub n: usize,
    pub controls: usize,
    pub observations: usize,
    pub discount: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Tensor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Tensor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<Tensor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum GeneratorRef {
    Recovery(RecoveryParams),
}

impl ModelDocument {
    pub fn from_dense(model: &DenseModel) -> Self {
        let (n, nu, nz) = (
            model.num_states(),
            model.num_controls(),
            model.num_observations(),
        );
        let (t, o, g) = model.tensors();
        let nest = |flat: &[f64], outer: usize, width: usize| -> Tensor {
            flat.chunks(nu * width)
                .take(outer)
                .map(|block| block.chunks(width).map(<[f64]>::to_vec).collect())
                .collect()
        };
        ModelDocument {
            n,
            controls: nu,
            observations: nz,
            discount: model.discount(),
            transition: Some(nest(t, n, n)),
            observation: Some(nest(o, n, nz)),
            cost: Some(nest(g, n, n)),
            generator: None,
        }
    }

    pub fn generated(params: RecoveryParams) -> Result<Self> {
        let model = build_recovery_pomdp(&params)?;
        Ok(ModelDocument {
            n: model.num_states(),
            controls: model.num_controls(),
            observations: model.num_observations(),
            discount: model.discount(),
            transition: None,
            observation: None,
            cost: None,
            generator: Some(GeneratorRef::Recovery(params)),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn flatten(t: &Tensor, outer: usize, middle: usize, width: usize, name: &str) -> Result<Vec<f64>> {
    let shaped = t.len() == outer
        && t.iter()
            .all(|m| m.len() == middle && m.iter().all(|r| r.len() == width));
    if !shaped {
        return Err(Error::InvalidModel(format!(
            "{name} must have shape [{outer}][{middle}][{width}]"
        )));
    }
    Ok(t.iter().flatten().flatten().copied().collect())
}

/// Builds the model a document describes and checks its header.
pub fn load_model(doc: &ModelDocument) -> Result<Box<dyn Pomdp>> {
    let model: Box<dyn Pomdp> = match (&doc.transition, &doc.observation, &doc.cost, &doc.generator)
    {
        (Some(t), Some(o), Some(g), None) => {
            let (n, nu, nz) = (doc.n, doc.controls, doc.observations);
            Box::new(DenseModel::new(
                n,
                nu,
                nz,
                doc.discount,
                flatten(t, n, nu, n, "transition")?,
                flatten(o, n, nu, nz, "observation")?,
                flatten(g, n, nu, n, "cost")?,
            )?)
        }
        (None, None, None, Some(GeneratorRef::Recovery(params))) => build_recovery_pomdp(params)?,
        _ => {
            return Err(Error::InvalidModel(
                "a model document needs either all dense tensors or a generator".into(),
            ))
        }
    };
    let header = (doc.n, doc.controls, doc.observations);
    let actual = (
        model.num_states(),
        model.num_controls(),
        model.num_observations(),
    );
    if header != actual || (doc.discount - model.discount()).abs() > 0.0 {
        return Err(Error::InvalidModel(format!(
            "header {header:?} α={} disagrees with the model {actual:?} α={}",
            doc.discount,
            model.discount()
        )));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recovery::RecoveryModel;

    #[test]
    fn dense_round_trip() {
        let m =
            DenseModel::from_model(&RecoveryModel::new(&RecoveryParams::new(1)).unwrap()).unwrap();
        let doc = ModelDocument::from_dense(&m);
        assert_eq!(doc.transition.as_ref().unwrap()[0][0], vec![0.8, 0.2]);
        let back = load_model(&ModelDocument::from_json(&doc.to_json().unwrap()).unwrap()).unwrap();
        let back = DenseModel::from_model(back.as_ref()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn generator_reference() {
        let text = r#"{"n": 4, "controls": 4, "observations": 64, "discount": 0.99,
                       "generator": {"name": "recovery", "params": {"replicas": 2}}}"#;
        let model = load_model(&ModelDocument::from_json(text).unwrap()).unwrap();
        assert_eq!(model.num_observations(), 64);
        let doc = ModelDocument::generated(RecoveryParams::new(3)).unwrap();
        assert_eq!((doc.n, doc.observations), (8, 512));
        assert!(load_model(&ModelDocument::from_json(&doc.to_json().unwrap()).unwrap()).is_ok());
    }

    #[test]
    fn malformed_documents() {
        let wrong_header = r#"{"n": 3, "controls": 4, "observations": 64, "discount": 0.99,
                               "generator": {"name": "recovery", "params": {"replicas": 2}}}"#;
        assert!(load_model(&ModelDocument::from_json(wrong_header).unwrap()).is_err());
        let ragged = r#"{"n": 1, "controls": 1, "observations": 1, "discount": 0.5,
                         "transition": [[[1.0, 0.0]]], "observation": [[[1.0]]], "cost": [[[0.0]]]}"#;
        assert!(load_model(&ModelDocument::from_json(ragged).unwrap()).is_err());
        let neither = r#"{"n": 1, "controls": 1, "observations": 1, "discount": 0.5}"#;
        assert!(load_model(&ModelDocument::from_json(neither).unwrap()).is_err());
        assert!(ModelDocument::from_json(
            r#"{"n": 1, "controls": 1, "observations": 1, "discount": 0.5, "x": 1}"#
        )
        .is_err());
    }
}
