use serde::{Deserialize, Serialize};
use xai_core::metrics;

/// Classification scores; precision, recall and F1 are macro averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
}

pub fn compute_metrics(predictions: &[usize], labels: &[usize], n_classes: usize) -> Metrics {
    assert_eq!(predictions.len(), labels.len(), "predictions and labels differ in length");
    let m = metrics::macro_scores(labels, predictions, n_classes);
    Metrics {
        accuracy: metrics::accuracy(labels, predictions),
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        mcc: metrics::mcc(labels, predictions, n_classes),
    }
}

/// Left-aligned names, right-aligned values.
pub fn table(rows: &[(&str, String)]) -> String {
    let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let v = rows.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    rows.iter().map(|(k, val)| format!("{k:<w$}  {val:>v$}\n")).collect()
}
