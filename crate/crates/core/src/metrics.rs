//! Confusion-matrix metrics: accuracy, balanced accuracy, macro F1,
//! multiclass Matthews correlation, per-class recall, and run aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns are predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub class_order: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn new(class_order: Vec<usize>) -> Self {
        let c = class_order.len();
        Self {
            counts: vec![vec![0; c]; c],
            class_order,
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if counts.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("confusion matrix must be square".into()));
        }
        Ok(Self {
            counts,
            class_order: (0..c).collect(),
        })
    }

    pub fn from_labels(truth: &[usize], predicted: &[usize], class_order: Vec<usize>) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Shape(format!(
                "{} true labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut cm = Self::new(class_order);
        for (&t, &p) in truth.iter().zip(predicted) {
            let (i, j) = (cm.index_of(t)?, cm.index_of(p)?);
            cm.counts[i][j] += 1;
        }
        Ok(cm)
    }

    fn index_of(&self, class: usize) -> Result<usize> {
        self.class_order
            .iter()
            .position(|&c| c == class)
            .ok_or_else(|| Error::Data(format!("class {class} is not in the class order")))
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    fn col_sums(&self) -> Vec<u64> {
        (0..self.num_classes())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    fn non_empty(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::Metric("confusion matrix is empty".into())),
            t => Ok(t as f64),
        }
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    Ok(cm.trace() as f64 / cm.non_empty()?)
}

/// Recall per class (diagonal over row sum).
pub fn per_class_accuracy(cm: &ConfusionMatrix) -> Result<Vec<f64>> {
    cm.non_empty()?;
    cm.row_sums()
        .iter()
        .enumerate()
        .map(|(i, &row)| {
            if row == 0 {
                Err(Error::Metric(format!(
                    "class {} has no true samples",
                    cm.class_order[i]
                )))
            } else {
                Ok(cm.counts[i][i] as f64 / row as f64)
            }
        })
        .collect()
}

pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let recalls = per_class_accuracy(cm)?;
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

/// Unweighted mean of per-class F1. Classes never seen nor predicted are
/// skipped.
pub fn f1_macro(cm: &ConfusionMatrix) -> Result<f64> {
    cm.non_empty()?;
    let rows = cm.row_sums();
    let cols = cm.col_sums();
    let scores: Vec<f64> = (0..cm.num_classes())
        .filter(|&i| rows[i] + cols[i] > 0)
        .map(|i| 2.0 * cm.counts[i][i] as f64 / (rows[i] + cols[i]) as f64)
        .collect();
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Multiclass MCC in covariance form; 0 when either marginal is constant.
pub fn mcc(cm: &ConfusionMatrix) -> Result<f64> {
    let s = cm.non_empty()?;
    let c = cm.trace() as f64;
    let t = cm.row_sums();
    let p = cm.col_sums();
    let pt: f64 = t.iter().zip(&p).map(|(&a, &b)| a as f64 * b as f64).sum();
    let pp: f64 = p.iter().map(|&v| (v as f64).powi(2)).sum();
    let tt: f64 = t.iter().map(|&v| (v as f64).powi(2)).sum();
    let denom = ((s * s - pp) * (s * s - tt)).sqrt();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((c * s - pt) / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub acc: f64,
    pub bacc: f64,
    pub f1_macro: f64,
    pub mcc: f64,
    pub per_class_acc: Vec<f64>,
}

impl TaskMetrics {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        Ok(Self {
            acc: accuracy(cm)?,
            bacc: balanced_accuracy(cm)?,
            f1_macro: f1_macro(cm)?,
            mcc: mcc(cm)?,
            per_class_acc: per_class_accuracy(cm)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_seed: u64,
    pub activity: TaskMetrics,
    pub orientation: TaskMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Arithmetic mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }

    /// `mean±std` in percent with one decimal.
    pub fn percent(&self) -> String {
        format!("{:.1}±{:.1}", self.mean * 100.0, self.std * 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub acc: MeanStd,
    pub bacc: MeanStd,
    pub f1_macro: MeanStd,
    pub mcc: MeanStd,
    pub per_class_acc: Vec<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub activity: TaskSummary,
    pub orientation: TaskSummary,
}

fn summarize<'a>(tasks: impl Iterator<Item = &'a TaskMetrics> + Clone) -> TaskSummary {
    let field = |f: fn(&TaskMetrics) -> f64| MeanStd::of(&tasks.clone().map(f).collect::<Vec<_>>());
    let classes = tasks.clone().map(|t| t.per_class_acc.len()).min().unwrap_or(0);
    TaskSummary {
        acc: field(|t| t.acc),
        bacc: field(|t| t.bacc),
        f1_macro: field(|t| t.f1_macro),
        mcc: field(|t| t.mcc),
        per_class_acc: (0..classes)
            .map(|c| MeanStd::of(&tasks.clone().map(|t| t.per_class_acc[c]).collect::<Vec<_>>()))
            .collect(),
    }
}

pub fn aggregate(reports: &[RunReport]) -> Result<Summary> {
    if reports.is_empty() {
        return Err(Error::Metric("no run reports to aggregate".into()));
    }
    Ok(Summary {
        runs: reports.len(),
        activity: summarize(reports.iter().map(|r| &r.activity)),
        orientation: summarize(reports.iter().map(|r| &r.orientation)),
    })
}
