//! End-to-end steps shared by the command-line tool and the test suites:
//! prepare a labeled dataset, train a model on a seeded split, and evaluate
//! it on the held-out part of the same split.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::dtree::{train_tree, TreeConfig};
use crate::eval::{evaluate, EvalReport};
use crate::knn::{default_k, train_knn, Scaling};
use crate::model::{Classifier, Model, ModelKind, SavedModel, TrainingRecord};
use crate::weather_data::{
    filter_city, parse_dataset, split, to_samples, ConditionTable, LabeledSample, SplitSpec,
};
use crate::{Error, Result};

pub const DEFAULT_CITY: &str = "Al Madina";

/// Row counts from raw CSV to labeled samples.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub rows_read: usize,
    pub rejected: usize,
    pub rejected_by_field: BTreeMap<String, usize>,
    pub city: String,
    pub city_matches: usize,
    /// Rows in the city subset identical to an earlier row. Counted, not removed.
    pub duplicates: usize,
    pub unmapped: usize,
    pub unmapped_conditions: BTreeMap<String, usize>,
    pub labeled: usize,
    pub open: usize,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub samples: Vec<LabeledSample>,
    pub report: CleaningReport,
}

pub fn prepare<R: Read>(reader: R, city: &str, table: &ConditionTable) -> Result<Prepared> {
    if city.trim().is_empty() {
        return Err(Error::InvalidConfig("city name must not be empty".into()));
    }
    let (observations, parsed) = parse_dataset(reader)?;
    let subset = filter_city(&observations, city);
    let mut seen = HashSet::new();
    let duplicates = subset
        .iter()
        .filter(|o| !seen.insert(format!("{o:?}")))
        .count();
    let (samples, labels) = to_samples(&subset, table);
    let report = CleaningReport {
        rows_read: parsed.rows_read,
        rejected: parsed.rejected,
        rejected_by_field: parsed.rejected_by_field,
        city: city.to_string(),
        city_matches: subset.len(),
        duplicates,
        unmapped: labels.unmapped,
        unmapped_conditions: labels.unmapped_conditions,
        labeled: labels.labeled,
        open: labels.open,
    };
    Ok(Prepared { samples, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum KChoice {
    /// Odd floor of the square root of the full dataset size.
    Auto,
    Fixed(usize),
}

impl std::fmt::Display for KChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KChoice::Auto => f.write_str("auto"),
            KChoice::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl From<KChoice> for String {
    fn from(k: KChoice) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for KChoice {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl std::str::FromStr for KChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KChoice::Auto);
        }
        s.parse::<usize>()
            .ok()
            .filter(|&k| k > 0)
            .map(KChoice::Fixed)
            .ok_or_else(|| {
                Error::InvalidConfig(format!("k must be `auto` or a positive integer, got `{s}`"))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSpec {
    pub kind: ModelKind,
    pub tree: TreeConfig,
    pub k: KChoice,
    pub scaling: Scaling,
    pub split: SplitSpec,
}

impl TrainSpec {
    /// Reference defaults: the tree holds out 33% with seed 324 and a
    /// 50-leaf budget; k-NN holds out 30% with seed 101, automatic k and
    /// unscaled features.
    pub fn defaults(kind: ModelKind) -> Self {
        let split = match kind {
            ModelKind::Dt => SplitSpec {
                test_fraction: 0.33,
                seed: 324,
            },
            ModelKind::Knn => SplitSpec {
                test_fraction: 0.30,
                seed: 101,
            },
        };
        Self {
            kind,
            tree: TreeConfig::default(),
            k: KChoice::Auto,
            scaling: Scaling::None,
            split,
        }
    }
}

/// Resolves `choice` for a dataset of `n_dataset` rows of which `n_train`
/// are used for training.
pub fn resolve_k(choice: KChoice, n_dataset: usize, n_train: usize) -> usize {
    match choice {
        KChoice::Fixed(k) => k,
        KChoice::Auto => {
            let k = default_k(n_dataset);
            if k <= n_train {
                k
            } else {
                default_k(n_train)
            }
        }
    }
}

pub fn train(samples: &[LabeledSample], spec: &TrainSpec) -> Result<SavedModel> {
    let (train_set, _) = split(samples, &spec.split)?;
    let model = match spec.kind {
        ModelKind::Dt => Model::Tree(train_tree(&train_set, &spec.tree)?),
        ModelKind::Knn => {
            let k = resolve_k(spec.k, samples.len(), train_set.len());
            Model::Knn(train_knn(&train_set, k, spec.scaling)?)
        }
    };
    Ok(SavedModel {
        model,
        training: Some(TrainingRecord {
            split: spec.split,
            n_dataset: samples.len(),
            n_train: train_set.len(),
        }),
    })
}

pub fn model_label(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Dt => "Decision Tree",
        ModelKind::Knn => "k-NN",
    }
}

/// Evaluates `model` on the test side of `split` applied to `samples`.
pub fn evaluate_on_split(
    model: &Model,
    samples: &[LabeledSample],
    split_spec: &SplitSpec,
) -> Result<EvalReport> {
    let (_, test) = split(samples, split_spec)?;
    evaluate(model_label(model.kind()), |x| model.predict(x), &test)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "city,date,time,temp,wind,humidity,barometer,visibility,weather\n\
        Al Madina,2017-01-01,00:00,21,0,0.33,1020.0,16,Clear\n\
        Al Madina,2017-01-01,00:00,21,0,0.33,1020.0,16,Clear\n\
        Al Madina,2017-01-01,01:00,19,9,0.35,1020.0,16,Volcanic ash\n\
        Al Madina,2017-01-01,02:00,oops,11,0.37,1020.0,16,Clear\n\
        Jeddah,2017-01-01,02:00,30,11,0.60,1010.0,10,Clear\n\
        Al Madina,2017-01-01,03:00,18,7,0.40,1019.0,16,Sandstorm\n";

    #[test]
    fn prepare_counts() {
        let p = prepare(CSV.as_bytes(), "al madina", &ConditionTable::builtin()).unwrap();
        let r = &p.report;
        assert_eq!(r.rows_read, 6);
        assert_eq!(r.rejected, 1);
        assert_eq!(r.city_matches, 4);
        assert_eq!(r.duplicates, 1);
        assert_eq!(r.unmapped, 1);
        assert_eq!(r.labeled, 3);
        assert_eq!(r.open, 2);
        assert_eq!(p.samples.len(), 3);
        assert!(prepare(CSV.as_bytes(), " ", &ConditionTable::builtin()).is_err());
    }

    #[test]
    fn k_resolution() {
        assert_eq!(resolve_k(KChoice::Auto, 19964, 13975), 141);
        assert_eq!(resolve_k(KChoice::Fixed(8), 100, 70), 8);
        assert_eq!(resolve_k(KChoice::Auto, 10, 2), 1);
        assert_eq!("auto".parse::<KChoice>().unwrap(), KChoice::Auto);
        assert_eq!("15".parse::<KChoice>().unwrap(), KChoice::Fixed(15));
        assert!("x".parse::<KChoice>().is_err());
        assert!("0".parse::<KChoice>().is_err());
        assert_eq!(
            serde_json::to_string(&KChoice::Fixed(141)).unwrap(),
            "\"141\""
        );
        assert_eq!(
            serde_json::from_str::<KChoice>("\"auto\"").unwrap(),
            KChoice::Auto
        );
    }

    #[test]
    fn reference_defaults() {
        let dt = TrainSpec::defaults(ModelKind::Dt);
        assert_eq!(dt.tree.max_leaf_nodes, 50);
        assert_eq!(dt.tree.seed, 324);
        assert_eq!((dt.split.test_fraction, dt.split.seed), (0.33, 324));
        let knn = TrainSpec::defaults(ModelKind::Knn);
        assert_eq!(knn.k, KChoice::Auto);
        assert_eq!(knn.scaling, Scaling::None);
        assert_eq!((knn.split.test_fraction, knn.split.seed), (0.30, 101));
    }
}
