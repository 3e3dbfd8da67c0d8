//! Model-agnostic attributions: permutation importance and interventional
//! Shapley values (exact for few features, permutation-sampled otherwise).

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};
use crate::math;
use crate::metrics;
use crate::model::Classifier;
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

/// Largest feature count for exact Shapley enumeration.
pub const MAX_EXACT_FEATURES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMetric {
    Accuracy,
    MacroF1,
}

impl ScoreMetric {
    pub fn score(self, truth: &[usize], pred: &[usize], n_classes: usize) -> f64 {
        match self {
            ScoreMetric::Accuracy => metrics::accuracy(truth, pred),
            ScoreMetric::MacroF1 => metrics::macro_f1(truth, pred, n_classes),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: usize,
    /// Mean drop in score over repeats.
    pub mean: f64,
    pub std: f64,
}

/// Score drop when one column is shuffled, for every column of `data`.
/// Repeat `r` of feature `f` uses its own seed so results do not depend on
/// evaluation order.
pub fn permutation_importance(
    model: &impl Classifier,
    data: &Dataset,
    metric: ScoreMetric,
    n_repeats: usize,
    seed: u64,
) -> Result<Vec<ImportanceEntry>> {
    (0..data.n_features())
        .map(|f| permutation_importance_feature(model, data, metric, n_repeats, seed, f))
        .collect()
}

pub fn permutation_importance_feature(
    model: &impl Classifier,
    data: &Dataset,
    metric: ScoreMetric,
    n_repeats: usize,
    seed: u64,
    feature: usize,
) -> Result<ImportanceEntry> {
    if feature >= data.n_features() {
        return Err(Error::InvalidFeature {
            feature,
            n_features: data.n_features(),
        });
    }
    if n_repeats == 0 {
        return Err(Error::InvalidConfig("permutation importance needs at least one repeat".into()));
    }
    let c = data.n_classes().max(model.n_classes());
    let base = metric.score(&data.labels, &model.predict(&data.features), c);
    let col = data.features.column(feature);
    let mut drops = Vec::with_capacity(n_repeats);
    for r in 0..n_repeats {
        let mut rng = seeded(derive_seed(derive_seed(seed, feature as u64), r as u64));
        let mut shuffled = col.clone();
        shuffled.shuffle(&mut rng);
        let mut x = data.features.clone();
        for (i, v) in shuffled.into_iter().enumerate() {
            x.set(i, feature, v);
        }
        drops.push(base - metric.score(&data.labels, &model.predict(&x), c));
    }
    Ok(ImportanceEntry {
        feature,
        mean: math::mean(&drops),
        std: math::std_dev(&drops),
    })
}

/// Shapley values of every output of a model at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyValues {
    /// `[features, outputs]`.
    pub phi: Matrix,
    /// Expected output over the background (empty coalition).
    pub base: Vec<f64>,
    /// Output at the explained point (full coalition).
    pub full: Vec<f64>,
    /// Standard error of each estimate when sampled.
    pub std_error: Option<Matrix>,
}

impl ShapleyValues {
    pub fn for_output(&self, c: usize) -> Vec<f64> {
        self.phi.column(c)
    }
}

/// Mean model output when features in `mask` come from `x` and the rest
/// from each background row.
fn coalition_value(model: &impl Classifier, x: &[f64], background: &Matrix, in_coalition: &[bool]) -> Vec<f64> {
    let mut rows = background.clone();
    for i in 0..rows.rows {
        for (v, (&keep, xv)) in rows.row_mut(i).iter_mut().zip(in_coalition.iter().zip(x)) {
            if keep {
                *v = *xv;
            }
        }
    }
    let p = model.predict_proba(&rows);
    let mut out = vec![0.0; p.cols];
    for row in p.iter_rows() {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    let n = p.rows as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

fn check_inputs(model: &impl Classifier, x: &[f64], background: &Matrix) -> Result<()> {
    if x.len() != model.n_features() || background.cols != x.len() {
        return Err(Error::shape(&[model.n_features()], &[x.len()]));
    }
    if background.rows == 0 {
        return Err(Error::EmptySample);
    }
    Ok(())
}

/// Exact interventional Shapley values by enumerating every coalition.
pub fn shapley_exact(model: &impl Classifier, x: &[f64], background: &Matrix) -> Result<ShapleyValues> {
    check_inputs(model, x, background)?;
    let k = x.len();
    if k > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures(k));
    }
    let c = model.n_classes();
    let n_masks = 1usize << k;
    let values: Vec<Vec<f64>> = (0..n_masks)
        .map(|mask| {
            let inc: Vec<bool> = (0..k).map(|i| mask >> i & 1 == 1).collect();
            coalition_value(model, x, background, &inc)
        })
        .collect();
    // weight for a coalition of size s not containing i: s!(k-s-1)!/k!
    let mut fact = vec![1.0f64; k + 1];
    for i in 1..=k {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = Matrix::zeros(k, c);
    for mask in 0..n_masks {
        let s = (mask as u32).count_ones() as usize;
        for i in 0..k {
            if mask >> i & 1 == 1 {
                continue;
            }
            let w = fact[s] * fact[k - s - 1] / fact[k];
            let with = &values[mask | 1 << i];
            let without = &values[mask];
            for (o, (a, b)) in phi.row_mut(i).iter_mut().zip(with.iter().zip(without)) {
                *o += w * (a - b);
            }
        }
    }
    Ok(ShapleyValues {
        phi,
        base: values[0].clone(),
        full: values[n_masks - 1].clone(),
        std_error: None,
    })
}

/// Shapley values averaged over the given feature orders. Each order
/// telescopes from the empty to the full coalition, so the estimate always
/// sums to `full - base`.
pub fn shapley_over_orders(model: &impl Classifier, x: &[f64], background: &Matrix, orders: &[Vec<usize>]) -> Result<ShapleyValues> {
    check_inputs(model, x, background)?;
    if orders.is_empty() {
        return Err(Error::InvalidConfig("sampled Shapley needs at least one permutation".into()));
    }
    let k = x.len();
    let c = model.n_classes();
    let base = coalition_value(model, x, background, &vec![false; k]);
    let full = coalition_value(model, x, background, &vec![true; k]);
    let mut sum = Matrix::zeros(k, c);
    let mut sum_sq = Matrix::zeros(k, c);
    for order in orders {
        if order.len() != k {
            return Err(Error::shape(&[k], &[order.len()]));
        }
        let mut inc = vec![false; k];
        let mut prev = base.clone();
        for (step, &i) in order.iter().enumerate() {
            inc[i] = true;
            let next = if step + 1 == k {
                full.clone()
            } else {
                coalition_value(model, x, background, &inc)
            };
            for o in 0..c {
                let d = next[o] - prev[o];
                sum.values[i * c + o] += d;
                sum_sq.values[i * c + o] += d * d;
            }
            prev = next;
        }
    }
    let n = orders.len() as f64;
    let phi = Matrix::new(k, c, sum.values.iter().map(|v| v / n).collect())?;
    let std_error = Matrix::new(
        k,
        c,
        sum.values
            .iter()
            .zip(&sum_sq.values)
            .map(|(s, q)| {
                let m = s / n;
                let var = (q / n - m * m).max(0.0);
                math::sqrt(var / n)
            })
            .collect(),
    )?;
    Ok(ShapleyValues {
        phi,
        base,
        full,
        std_error: Some(std_error),
    })
}

/// Shapley values estimated from `n_permutations` random feature orders.
pub fn shapley_sampled(
    model: &impl Classifier,
    x: &[f64],
    background: &Matrix,
    n_permutations: usize,
    seed: u64,
) -> Result<ShapleyValues> {
    let mut rng = seeded(seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let orders: Vec<Vec<usize>> = (0..n_permutations)
        .map(|_| {
            order.shuffle(&mut rng);
            order.clone()
        })
        .collect();
    shapley_over_orders(model, x, background, &orders)
}

/// Exact values when the feature count allows it, sampled otherwise.
pub fn shapley(
    model: &impl Classifier,
    x: &[f64],
    background: &Matrix,
    n_permutations: usize,
    seed: u64,
) -> Result<ShapleyValues> {
    if x.len() <= MAX_EXACT_FEATURES {
        shapley_exact(model, x, background)
    } else {
        shapley_sampled(model, x, background, n_permutations, seed)
    }
}

/// Global importance over a set of instances, each explained for its own
/// predicted class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalShap {
    /// Mean `|phi_i|`.
    pub gfi: Vec<f64>,
    /// Mean signed `phi_i`.
    pub mean_phi: Vec<f64>,
}

pub fn global_shap(
    model: &impl Classifier,
    rows: &Matrix,
    background: &Matrix,
    n_permutations: usize,
    seed: u64,
) -> Result<GlobalShap> {
    if rows.rows == 0 {
        return Err(Error::EmptySample);
    }
    let k = rows.cols;
    let mut gfi = vec![0.0; k];
    let mut mean_phi = vec![0.0; k];
    for (r, x) in rows.iter_rows().enumerate() {
        let sv = shapley(model, x, background, n_permutations, derive_seed(seed, r as u64))?;
        let c = math::argmax(&sv.full);
        for i in 0..k {
            let v = sv.phi.get(i, c);
            gfi[i] += v.abs();
            mean_phi[i] += v;
        }
    }
    let n = rows.rows as f64;
    gfi.iter_mut().for_each(|v| *v /= n);
    mean_phi.iter_mut().for_each(|v| *v /= n);
    Ok(GlobalShap { gfi, mean_phi })
}

/// Unweighted mean of per-model global importances.
pub fn stack(parts: &[GlobalShap]) -> Result<GlobalShap> {
    let Some(first) = parts.first() else {
        return Err(Error::EmptySample);
    };
    let k = first.gfi.len();
    if parts.iter().any(|p| p.gfi.len() != k || p.mean_phi.len() != k) {
        return Err(Error::MismatchedFeatureSpaces(parts.iter().map(|p| p.gfi.len()).collect()));
    }
    let n = parts.len() as f64;
    let mean = |f: fn(&GlobalShap) -> &Vec<f64>| -> Vec<f64> {
        (0..k).map(|i| parts.iter().map(|p| f(p)[i]).sum::<f64>() / n).collect()
    };
    Ok(GlobalShap {
        gfi: mean(|p| &p.gfi),
        mean_phi: mean(|p| &p.mean_phi),
    })
}

/// Global importance of each model on the same rows, then stacked.
pub fn stacked_shap<C: Classifier>(
    models: &[C],
    rows: &Matrix,
    background: &Matrix,
    n_permutations: usize,
    seed: u64,
) -> Result<GlobalShap> {
    let widths: Vec<usize> = models.iter().map(|m| m.n_features()).collect();
    if widths.iter().any(|&w| w != rows.cols) {
        return Err(Error::MismatchedFeatureSpaces(widths));
    }
    let parts = models
        .iter()
        .map(|m| global_shap(m, rows, background, n_permutations, seed))
        .collect::<Result<Vec<_>>>()?;
    stack(&parts)
}
