//! Binary classification metrics with `Open` as the positive class.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::weather_data::LabeledSample;
use crate::{DomeState, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn correct(&self) -> usize {
        self.tp + self.tn
    }

    /// True-label count of `class`.
    pub fn support(&self, class: DomeState) -> usize {
        match class {
            DomeState::Open => self.tp + self.fn_,
            DomeState::Close => self.tn + self.fp,
        }
    }

    /// The same matrix seen with `Close` as the positive class.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }

    fn oriented(&self, positive: DomeState) -> Self {
        match positive {
            DomeState::Open => *self,
            DomeState::Close => self.swapped(),
        }
    }

    fn nonempty(&self) -> Result<()> {
        if self.total() == 0 {
            Err(Error::EmptyEvaluation)
        } else {
            Ok(())
        }
    }

    /// Writes the matrix as CSV with actual classes as rows.
    pub fn to_csv(&self) -> String {
        format!(
            "actual,predicted_0,predicted_1\n0,{},{}\n1,{},{}\n",
            self.tn, self.fp, self.fn_, self.tp
        )
    }
}

fn check_pair(predictions: &[DomeState], labels: &[DomeState]) -> Result<()> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    Ok(())
}

pub fn confusion(predictions: &[DomeState], labels: &[DomeState]) -> Result<ConfusionMatrix> {
    check_pair(predictions, labels)?;
    let mut m = ConfusionMatrix::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (DomeState::Open, DomeState::Open) => m.tp += 1,
            (DomeState::Close, DomeState::Close) => m.tn += 1,
            (DomeState::Open, DomeState::Close) => m.fp += 1,
            (DomeState::Close, DomeState::Open) => m.fn_ += 1,
        }
    }
    Ok(m)
}

/// `(TP + TN) / (TP + TN + FP + FN)`
pub fn accuracy(m: &ConfusionMatrix) -> Result<f64> {
    m.nonempty()?;
    Ok(m.correct() as f64 / m.total() as f64)
}

/// Harmonic mean of precision and recall for `positive`. Defined as 0 when
/// precision and recall are both 0 or undefined.
pub fn f1(m: &ConfusionMatrix, positive: DomeState) -> Result<f64> {
    m.nonempty()?;
    let o = m.oriented(positive);
    // 2PR/(P+R) reduces to 2TP/(2TP+FP+FN), which avoids 0/0 on empty classes.
    let denom = 2 * o.tp + o.fp + o.fn_;
    if o.tp == 0 || denom == 0 {
        return Ok(0.0);
    }
    Ok((2 * o.tp) as f64 / denom as f64)
}

/// Precision and recall for `positive`, `None` where the ratio is 0/0.
pub fn precision_recall(m: &ConfusionMatrix, positive: DomeState) -> (Option<f64>, Option<f64>) {
    let o = m.oriented(positive);
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    (ratio(o.tp, o.tp + o.fp), ratio(o.tp, o.tp + o.fn_))
}

/// Support-weighted mean of the two per-class F1 scores.
pub fn weighted_f1(m: &ConfusionMatrix) -> Result<f64> {
    m.nonempty()?;
    Ok(support_weighted(
        [f1(m, DomeState::Close)?, f1(m, DomeState::Open)?],
        [m.support(DomeState::Close), m.support(DomeState::Open)],
    ))
}

/// `(s0 * v0 + s1 * v1) / (s0 + s1)`, indexed by class.
pub fn support_weighted(values: [f64; 2], supports: [usize; 2]) -> f64 {
    let total = (supports[0] + supports[1]) as f64;
    (supports[0] as f64 / total) * values[0] + (supports[1] as f64 / total) * values[1]
}

/// Mean squared difference between predicted and true 0/1 values.
pub fn mse(predictions: &[DomeState], labels: &[DomeState]) -> Result<f64> {
    check_pair(predictions, labels)?;
    let sum: u64 = predictions
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let d = i64::from(p.as_u8()) - i64::from(y.as_u8());
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64 / predictions.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_id: String,
    pub n_test: usize,
    pub matrix: ConfusionMatrix,
    pub accuracy: f64,
    pub f1_class1: f64,
    pub f1_class0: f64,
    pub weighted_f1: f64,
    pub mse: f64,
    /// Classes whose F1 fell back to 0 because the class was neither
    /// predicted nor present.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate_f1: Vec<DomeState>,
}

impl EvalReport {
    pub fn from_predictions(
        model_id: impl Into<String>,
        predictions: &[DomeState],
        labels: &[DomeState],
    ) -> Result<Self> {
        let matrix = confusion(predictions, labels)?;
        let degenerate_f1 = [DomeState::Open, DomeState::Close]
            .into_iter()
            .filter(|&c| {
                let o = matrix.oriented(c);
                o.tp + o.fp + o.fn_ == 0
            })
            .collect();
        Ok(Self {
            model_id: model_id.into(),
            n_test: matrix.total(),
            matrix,
            accuracy: accuracy(&matrix)?,
            f1_class1: f1(&matrix, DomeState::Open)?,
            f1_class0: f1(&matrix, DomeState::Close)?,
            weighted_f1: weighted_f1(&matrix)?,
            mse: mse(predictions, labels)?,
            degenerate_f1,
        })
    }

    /// Aligned table with columns F1->1, F1->0, weighted F1, MSE, accuracy.
    pub fn to_table(&self) -> String {
        render_table(std::slice::from_ref(self))
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table())
    }
}

/// Formats `v` with three significant digits.
pub fn sig3(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.3}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (2 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Renders several reports as one table, one model per row.
pub fn render_table(reports: &[EvalReport]) -> String {
    let name_width = reports
        .iter()
        .map(|r| r.model_id.len())
        .chain(["model".len()])
        .max()
        .unwrap_or(5);
    let mut out = format!(
        "{:<name_width$}  {:>8}  {:>8}  {:>11}  {:>8}  {:>8}\n",
        "model", "F1->1", "F1->0", "weighted F1", "MSE", "accuracy"
    );
    for r in reports {
        out.push_str(&format!(
            "{:<name_width$}  {:>8}  {:>8}  {:>11}  {:>8}  {:>8}\n",
            r.model_id,
            sig3(r.f1_class1),
            sig3(r.f1_class0),
            sig3(r.weighted_f1),
            sig3(r.mse),
            sig3(r.accuracy)
        ));
    }
    out
}

/// Runs `predict` over every test sample and assembles a report. Predictions
/// are computed in parallel; the result does not depend on evaluation order.
pub fn evaluate<F>(model_id: &str, predict: F, test: &[LabeledSample]) -> Result<EvalReport>
where
    F: Fn(&[f64]) -> Result<DomeState> + Sync,
{
    if test.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let predictions = test
        .par_iter()
        .enumerate()
        .map(|(index, s)| {
            predict(&s.features).map_err(|e| Error::Prediction {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<DomeState> = test.iter().map(|s| s.label).collect();
    EvalReport::from_predictions(model_id, &predictions, &labels)
}
