//! Classification metrics over label vectors.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// `confusion[t][p]` counts rows with true class `t` predicted as `p`.
pub fn confusion(truth: &[usize], pred: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (&t, &p) in truth.iter().zip(pred) {
        m[t][p] += 1;
    }
    m
}

pub fn accuracy(truth: &[usize], pred: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = truth.iter().zip(pred).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Macro averages over the classes that occur in either vector. A class with
/// an empty denominator contributes 0.
pub fn macro_scores(truth: &[usize], pred: &[usize], n_classes: usize) -> MacroScores {
    let cm = confusion(truth, pred, n_classes);
    let (mut p, mut r, mut f, mut seen) = (0.0, 0.0, 0.0, 0usize);
    for c in 0..n_classes {
        let tp = cm[c][c] as f64;
        let actual: usize = cm[c].iter().sum();
        let predicted: usize = cm.iter().map(|row| row[c]).sum();
        if actual == 0 && predicted == 0 {
            continue;
        }
        seen += 1;
        let pc = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        let rc = if actual > 0 { tp / actual as f64 } else { 0.0 };
        p += pc;
        r += rc;
        f += if pc + rc > 0.0 { 2.0 * pc * rc / (pc + rc) } else { 0.0 };
    }
    if seen == 0 {
        return MacroScores { precision: 0.0, recall: 0.0, f1: 0.0 };
    }
    let s = seen as f64;
    MacroScores {
        precision: p / s,
        recall: r / s,
        f1: f / s,
    }
}

pub fn macro_f1(truth: &[usize], pred: &[usize], n_classes: usize) -> f64 {
    macro_scores(truth, pred, n_classes).f1
}

/// Multiclass Matthews correlation; 0 when either marginal is degenerate.
pub fn mcc(truth: &[usize], pred: &[usize], n_classes: usize) -> f64 {
    let cm = confusion(truth, pred, n_classes);
    let s = truth.len() as f64;
    let c: f64 = (0..n_classes).map(|k| cm[k][k] as f64).sum();
    let t: Vec<f64> = (0..n_classes).map(|k| cm[k].iter().sum::<usize>() as f64).collect();
    let p: Vec<f64> = (0..n_classes).map(|k| cm.iter().map(|row| row[k]).sum::<usize>() as f64).collect();
    let tp: f64 = t.iter().zip(&p).map(|(a, b)| a * b).sum();
    let num = c * s - tp;
    let den = math::sqrt(s * s - p.iter().map(|v| v * v).sum::<f64>()) * math::sqrt(s * s - t.iter().map(|v| v * v).sum::<f64>());
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}
