//! Run configuration: reference defaults, overlaid by an optional config
//! file, overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use domepilot_core::dtree::{Criterion, TreeConfig};
use domepilot_core::knn::Scaling;
use domepilot_core::model::ModelKind;
use domepilot_core::pipeline::{KChoice, TrainSpec, DEFAULT_CITY};
use domepilot_core::weather_data::SplitSpec;
use serde::{Deserialize, Serialize};

/// Optional settings shared by the config file and the flags. Every field
/// left as `None` falls through to the layer below.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub city: Option<String>,
    pub table: Option<PathBuf>,
    pub model: Option<ModelKind>,
    pub max_leaves: Option<usize>,
    pub min_samples_leaf: Option<usize>,
    pub criterion: Option<Criterion>,
    #[serde(default, deserialize_with = "k_from_int_or_str")]
    pub k: Option<KChoice>,
    pub scaling: Option<Scaling>,
    pub test_frac: Option<f64>,
    pub seed: Option<u64>,
    pub sha256: Option<String>,
}

fn k_from_int_or_str<'de, D>(d: D) -> std::result::Result<Option<KChoice>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(u64),
        Text(String),
    }
    let raw = match Raw::deserialize(d)? {
        Raw::Int(n) => n.to_string(),
        Raw::Text(s) => s,
    };
    raw.parse().map(Some).map_err(serde::de::Error::custom)
}

impl Settings {
    /// Reads a flat `key = value` file. Keys use the flag names with
    /// underscores, e.g. `test_frac = 0.3`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// `self` with any field set in `over` replaced.
    pub fn overlay(self, over: Settings) -> Settings {
        Settings {
            city: over.city.or(self.city),
            table: over.table.or(self.table),
            model: over.model.or(self.model),
            max_leaves: over.max_leaves.or(self.max_leaves),
            min_samples_leaf: over.min_samples_leaf.or(self.min_samples_leaf),
            criterion: over.criterion.or(self.criterion),
            k: over.k.or(self.k),
            scaling: over.scaling.or(self.scaling),
            test_frac: over.test_frac.or(self.test_frac),
            seed: over.seed.or(self.seed),
            sha256: over.sha256.or(self.sha256),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Prepare,
    Train,
    Evaluate,
    Simulate,
    Predict,
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub city: String,
    pub model_kind: ModelKind,
    pub tree: TreeConfig,
    pub k: KChoice,
    pub scaling: Scaling,
    pub split: SplitSpec,
    pub condition_table_path: Option<PathBuf>,
    pub expected_sha256: Option<String>,
}

impl RunConfig {
    /// Reference defaults for `kind`.
    pub fn defaults(command: CommandKind, kind: ModelKind) -> Self {
        let spec = TrainSpec::defaults(kind);
        Self {
            command,
            city: DEFAULT_CITY.to_string(),
            model_kind: kind,
            tree: spec.tree,
            k: spec.k,
            scaling: spec.scaling,
            split: spec.split,
            condition_table_path: None,
            expected_sha256: None,
        }
    }

    /// Applies `settings` on top of `self`. The model kind is not changed
    /// here; pick it before choosing the defaults.
    pub fn apply(mut self, settings: &Settings) -> Result<Self> {
        if let Some(city) = &settings.city {
            self.city = city.clone();
        }
        if let Some(table) = &settings.table {
            self.condition_table_path = Some(table.clone());
        }
        if let Some(n) = settings.max_leaves {
            self.tree.max_leaf_nodes = n;
        }
        if let Some(n) = settings.min_samples_leaf {
            self.tree.min_samples_leaf = n;
        }
        if let Some(c) = settings.criterion {
            self.tree.criterion = c;
        }
        if let Some(k) = settings.k {
            self.k = k;
        }
        if let Some(s) = settings.scaling {
            self.scaling = s;
        }
        if let Some(f) = settings.test_frac {
            self.split.test_fraction = f;
        }
        if let Some(seed) = settings.seed {
            self.split.seed = seed;
            self.tree.seed = seed;
        }
        if let Some(hash) = &settings.sha256 {
            self.expected_sha256 = Some(hash.to_ascii_lowercase());
        }
        self.split.validate()?;
        self.tree.validate()?;
        Ok(self)
    }

    pub fn train_spec(&self) -> TrainSpec {
        TrainSpec {
            kind: self.model_kind,
            tree: self.tree,
            k: self.k,
            scaling: self.scaling,
            split: self.split,
        }
    }
}
