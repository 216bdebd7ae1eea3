//! Brute-force k-nearest-neighbours classifier.

use serde::{Deserialize, Serialize};

use crate::weather_data::LabeledSample;
use crate::{features_from_slice, DomeState, Error, Features, Result, FEATURE_COUNT};

pub const KNN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    #[default]
    None,
    Standardize,
}

impl std::str::FromStr for Scaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Scaling::None),
            "standardize" => Ok(Scaling::Standardize),
            other => Err(Error::InvalidConfig(format!("unknown scaling `{other}`"))),
        }
    }
}

/// Per-feature standardization statistics. A zero `std` marks a constant
/// feature that contributes nothing to distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: f64,
    pub std: f64,
}

impl FeatureStats {
    pub fn is_constant(&self) -> bool {
        self.std == 0.0
    }

    fn scale(&self, v: f64) -> f64 {
        if self.is_constant() {
            0.0
        } else {
            (v - self.mean) / self.std
        }
    }
}

/// How coordinates are transformed before measuring distance.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Raw,
    Standardized(Vec<FeatureStats>),
}

impl Metric {
    fn project(&self, x: &[f64]) -> Features {
        let mut out = [0.0; FEATURE_COUNT];
        match self {
            Metric::Raw => out.copy_from_slice(x),
            Metric::Standardized(stats) => {
                for ((o, &v), s) in out.iter_mut().zip(x).zip(stats) {
                    *o = s.scale(v);
                }
            }
        }
        out
    }
}

/// Largest odd integer not above `sqrt(n)`, at least 1.
pub fn default_k(n: usize) -> usize {
    let root = n.isqrt();
    if root == 0 {
        1
    } else if root.is_multiple_of(2) {
        root - 1
    } else {
        root
    }
}

/// Euclidean distance between two feature vectors after `metric`'s transform.
pub fn distance(a: &[f64], b: &[f64], metric: &Metric) -> Result<f64> {
    let a = features_from_slice(a)?;
    let b = features_from_slice(b)?;
    Ok(euclidean(&metric.project(&a), &metric.project(&b)))
}

fn euclidean(a: &Features, b: &Features) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    train_features: Vec<Features>,
    train_labels: Vec<DomeState>,
    k: usize,
    metric: Metric,
    projected: Vec<Features>,
}

fn standardization(features: &[Features]) -> Vec<FeatureStats> {
    let n = features.len() as f64;
    (0..FEATURE_COUNT)
        .map(|j| {
            let mean = features.iter().map(|f| f[j]).sum::<f64>() / n;
            let var = features.iter().map(|f| (f[j] - mean).powi(2)).sum::<f64>() / n;
            // Identical values are constant even when the float variance is not exactly 0.
            let constant = features.iter().all(|f| f[j] == features[0][j]);
            FeatureStats {
                mean,
                std: if constant { 0.0 } else { var.sqrt() },
            }
        })
        .collect()
}

pub fn train_knn(samples: &[LabeledSample], k: usize, scaling: Scaling) -> Result<KnnModel> {
    let features: Vec<Features> = samples.iter().map(|s| s.features).collect();
    let labels: Vec<DomeState> = samples.iter().map(|s| s.label).collect();
    let metric = match scaling {
        Scaling::None => Metric::Raw,
        Scaling::Standardize if samples.is_empty() => Metric::Standardized(Vec::new()),
        Scaling::Standardize => Metric::Standardized(standardization(&features)),
    };
    KnnModel::from_parts(features, labels, k, metric)
}

impl KnnModel {
    pub fn from_parts(
        train_features: Vec<Features>,
        train_labels: Vec<DomeState>,
        k: usize,
        metric: Metric,
    ) -> Result<Self> {
        let n = train_features.len();
        if k == 0 || k > n {
            return Err(Error::InvalidK { k, n });
        }
        if train_labels.len() != n {
            return Err(Error::MalformedModel(format!(
                "{n} feature rows but {} labels",
                train_labels.len()
            )));
        }
        if let Metric::Standardized(stats) = &metric {
            if stats.len() != FEATURE_COUNT
                || stats
                    .iter()
                    .any(|s| !s.mean.is_finite() || !s.std.is_finite() || s.std < 0.0)
            {
                return Err(Error::MalformedModel(
                    "bad standardization statistics".into(),
                ));
            }
        }
        let projected = train_features.iter().map(|f| metric.project(f)).collect();
        Ok(Self {
            train_features,
            train_labels,
            k,
            metric,
            projected,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn scaling(&self) -> Scaling {
        match self.metric {
            Metric::Raw => Scaling::None,
            Metric::Standardized(_) => Scaling::Standardize,
        }
    }

    pub fn train_features(&self) -> &[Features] {
        &self.train_features
    }

    pub fn train_labels(&self) -> &[DomeState] {
        &self.train_labels
    }

    pub fn len(&self) -> usize {
        self.train_features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_features.is_empty()
    }

    /// Indices of the `k` nearest training points, nearest first. Equal
    /// distances are ordered by training index.
    pub fn neighbors(&self, query: &[f64]) -> Result<Vec<usize>> {
        let q = self.metric.project(&features_from_slice(query)?);
        let mut ranked: Vec<(f64, usize)> = self
            .projected
            .iter()
            .enumerate()
            .map(|(i, p)| (euclidean(&q, p), i))
            .collect();
        let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < ranked.len() {
            ranked.select_nth_unstable_by(self.k - 1, by_key);
            ranked.truncate(self.k);
        }
        ranked.sort_unstable_by(by_key);
        Ok(ranked.into_iter().map(|(_, i)| i).collect())
    }

    /// Majority label among the `k` nearest neighbours; an even split closes.
    pub fn predict(&self, query: &[f64]) -> Result<DomeState> {
        let neighbors = self.neighbors(query)?;
        let open = neighbors
            .iter()
            .filter(|&&i| self.train_labels[i].is_open())
            .count();
        Ok(DomeState::from_bool(2 * open > neighbors.len()))
    }
}

/// On-disk form: `{version, k, scaling, stats?, data}` where each data row is
/// the six features followed by the label.
#[derive(Debug, Serialize, Deserialize)]
pub struct KnnDocument {
    pub version: u32,
    pub k: usize,
    pub scaling: Scaling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<Vec<FeatureStats>>,
    pub data: Vec<[f64; FEATURE_COUNT + 1]>,
}

impl From<&KnnModel> for KnnDocument {
    fn from(model: &KnnModel) -> Self {
        let data = model
            .train_features
            .iter()
            .zip(&model.train_labels)
            .map(|(f, l)| {
                let mut row = [0.0; FEATURE_COUNT + 1];
                row[..FEATURE_COUNT].copy_from_slice(f);
                row[FEATURE_COUNT] = f64::from(l.as_u8());
                row
            })
            .collect();
        let stats = match &model.metric {
            Metric::Raw => None,
            Metric::Standardized(s) => Some(s.clone()),
        };
        Self {
            version: KNN_FORMAT_VERSION,
            k: model.k,
            scaling: model.scaling(),
            stats,
            data,
        }
    }
}

impl TryFrom<KnnDocument> for KnnModel {
    type Error = Error;

    fn try_from(doc: KnnDocument) -> Result<Self> {
        if doc.version != KNN_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: doc.version,
                supported: KNN_FORMAT_VERSION,
            });
        }
        let mut features = Vec::with_capacity(doc.data.len());
        let mut labels = Vec::with_capacity(doc.data.len());
        for (i, row) in doc.data.iter().enumerate() {
            let mut f = [0.0; FEATURE_COUNT];
            f.copy_from_slice(&row[..FEATURE_COUNT]);
            features.push(f);
            let label = match row[FEATURE_COUNT] {
                0.0 => DomeState::Close,
                1.0 => DomeState::Open,
                l => {
                    return Err(Error::MalformedModel(format!("row {i} has label {l}")));
                }
            };
            labels.push(label);
        }
        let metric = match (doc.scaling, doc.stats) {
            (Scaling::None, None) => Metric::Raw,
            (Scaling::Standardize, Some(stats)) => Metric::Standardized(stats),
            (Scaling::None, Some(_)) => {
                return Err(Error::MalformedModel("stats given without scaling".into()))
            }
            (Scaling::Standardize, None) => {
                return Err(Error::MalformedModel("standardize requires stats".into()))
            }
        };
        KnnModel::from_parts(features, labels, doc.k, metric)
    }
}
