//! Trained-model wrapper and versioned JSON persistence.
//!
//! Saved files are the per-model document with two extra keys: `model`
//! (`"dt"` or `"knn"`) and an optional `training` record describing the split
//! the model was fitted on.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dtree::{TreeDocument, TreeModel, TREE_FORMAT_VERSION};
use crate::knn::{KnnDocument, KnnModel, KNN_FORMAT_VERSION};
use crate::weather_data::SplitSpec;
use crate::{DomeState, Error, Result};

pub trait Classifier {
    fn predict(&self, features: &[f64]) -> Result<DomeState>;
}

impl Classifier for TreeModel {
    fn predict(&self, features: &[f64]) -> Result<DomeState> {
        TreeModel::predict(self, features)
    }
}

impl Classifier for KnnModel {
    fn predict(&self, features: &[f64]) -> Result<DomeState> {
        KnnModel::predict(self, features)
    }
}

/// Adapts a closure into a [`Classifier`].
pub struct FnClassifier<F>(pub F);

impl<F> Classifier for FnClassifier<F>
where
    F: Fn(&[f64]) -> Result<DomeState>,
{
    fn predict(&self, features: &[f64]) -> Result<DomeState> {
        (self.0)(features)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dt,
    Knn,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dt => "dt",
            ModelKind::Knn => "knn",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dt" => Ok(ModelKind::Dt),
            "knn" => Ok(ModelKind::Knn),
            other => Err(Error::InvalidConfig(format!(
                "unknown model kind `{other}`"
            ))),
        }
    }
}

/// Where a saved model came from: the split used and dataset sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub split: SplitSpec,
    pub n_dataset: usize,
    pub n_train: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Tree(TreeModel),
    Knn(KnnModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Tree(_) => ModelKind::Dt,
            Model::Knn(_) => ModelKind::Knn,
        }
    }
}

impl Classifier for Model {
    fn predict(&self, features: &[f64]) -> Result<DomeState> {
        match self {
            Model::Tree(m) => m.predict(features),
            Model::Knn(m) => m.predict(features),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: Model,
    pub training: Option<TrainingRecord>,
}

impl SavedModel {
    pub fn to_json(&self) -> Result<String> {
        let (kind, body) = match &self.model {
            Model::Tree(m) => ("dt", serde_json::to_value(TreeDocument::from(m))?),
            Model::Knn(m) => ("knn", serde_json::to_value(KnnDocument::from(m))?),
        };
        let Value::Object(fields) = body else {
            unreachable!("model documents serialize as objects")
        };
        let mut doc = Map::new();
        doc.insert("model".into(), Value::from(kind));
        doc.extend(fields);
        if let Some(training) = &self.training {
            doc.insert("training".into(), serde_json::to_value(training)?);
        }
        Ok(serde_json::to_string(&Value::Object(doc))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let Value::Object(mut doc) = value else {
            return Err(Error::MalformedModel("expected a JSON object".into()));
        };
        let kind = doc
            .remove("model")
            .and_then(|v| v.as_str().map(str::to_owned))
            .ok_or_else(|| Error::MalformedModel("missing `model` kind".into()))?;
        let training = match doc.remove("training") {
            Some(v) => Some(serde_json::from_value(v)?),
            None => None,
        };
        let version = doc
            .get("version")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::MalformedModel("missing `version`".into()))?;
        let supported = match kind.as_str() {
            "dt" => TREE_FORMAT_VERSION,
            "knn" => KNN_FORMAT_VERSION,
            other => {
                return Err(Error::MalformedModel(format!(
                    "unknown model kind `{other}`"
                )))
            }
        };
        if version != u64::from(supported) {
            return Err(Error::VersionMismatch {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                supported,
            });
        }
        let body = Value::Object(doc);
        let model = match kind.as_str() {
            "dt" => Model::Tree(serde_json::from_value::<TreeDocument>(body)?.try_into()?),
            _ => Model::Knn(serde_json::from_value::<KnnDocument>(body)?.try_into()?),
        };
        Ok(Self { model, training })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
