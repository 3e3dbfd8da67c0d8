//! Probing the black box: a self-attention layer over the input or the
//! embedding, relevance extraction from the attention diagonals, feature
//! ranking, and perturbation sensitivity.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{GradTape, Var};
use crate::blackbox::{column_ranges, CaeClassifier};
use crate::data::{Dataset, Matrix};
use crate::math;
use crate::model::Classifier;
use crate::optim::{adam_step, glorot_init, AdamConfig, AdamState};
use crate::rng::{derive_seed, normal, seeded};
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    Input,
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionHead {
    /// `[D, D]`.
    pub weight: Tensor,
    /// `[D]`.
    pub bias: Tensor,
}

/// Attention layer plus the two dense layers that carry it to the labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionProbe {
    pub placement: Placement,
    pub heads: Vec<AttentionHead>,
    pub hidden_w: Tensor,
    pub hidden_b: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
    /// Column ranges of the training inputs; the probe sees each column
    /// min-max mapped to `[0, 1]` (constant columns to 0.5).
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub placement: Placement,
    pub heads: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            placement: Placement::Embedding,
            heads: 1,
            hidden: 32,
            epochs: 30,
            batch_size: 64,
            lr: 1e-2,
            seed: 0,
        }
    }
}

impl AttentionProbe {
    pub fn init(placement: Placement, dim: usize, n_classes: usize, cfg: &ProbeConfig) -> Result<Self> {
        if cfg.heads == 0 || dim == 0 || cfg.hidden == 0 {
            return Err(Error::InvalidConfig("probe needs heads, width and hidden units >= 1".into()));
        }
        let heads = (0..cfg.heads)
            .map(|h| AttentionHead {
                weight: glorot_init(&[dim, dim], derive_seed(cfg.seed, h as u64)),
                bias: Tensor::zeros(&[dim]),
            })
            .collect();
        Ok(AttentionProbe {
            placement,
            heads,
            hidden_w: glorot_init(&[cfg.hidden, dim], derive_seed(cfg.seed, 1000)),
            hidden_b: Tensor::zeros(&[cfg.hidden]),
            out_w: glorot_init(&[n_classes, cfg.hidden], derive_seed(cfg.seed, 1001)),
            out_b: Tensor::zeros(&[n_classes]),
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
            losses: Vec::new(),
        })
    }

    /// Maps rows of the placement space into the probe's `[0, 1]` inputs.
    pub fn scale(&self, v: &Matrix) -> Matrix {
        let mut out = v.clone();
        for i in 0..out.rows {
            for ((x, lo), hi) in out.row_mut(i).iter_mut().zip(&self.lo).zip(&self.hi) {
                *x = if hi > lo { (*x - lo) / (hi - lo) } else { 0.5 };
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.heads[0].bias.len()
    }

    fn params(&self) -> Vec<&Tensor> {
        let mut v: Vec<&Tensor> = Vec::new();
        for h in &self.heads {
            v.push(&h.weight);
            v.push(&h.bias);
        }
        v.extend([&self.hidden_w, &self.hidden_b, &self.out_w, &self.out_b]);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v: Vec<&mut Tensor> = Vec::new();
        for h in &mut self.heads {
            v.push(&mut h.weight);
            v.push(&mut h.bias);
        }
        v.extend([&mut self.hidden_w, &mut self.hidden_b, &mut self.out_w, &mut self.out_b]);
        v
    }

    fn record(&self, tape: &mut GradTape, v: &Matrix) -> Result<(Vec<Var>, Var)> {
        let leaves: Vec<Var> = self.params().into_iter().map(|t| tape.leaf(t.clone())).collect();
        let input = tape.leaf(Tensor::new(vec![v.rows, v.cols], v.values.clone())?);
        let mut acc: Option<Var> = None;
        for h in 0..self.heads.len() {
            let a = tape.dense(input, leaves[2 * h], leaves[2 * h + 1])?;
            let s = tape.softmax_rows(a);
            let o = tape.mul(input, s)?;
            acc = Some(match acc {
                None => o,
                Some(prev) => tape.add(prev, o)?,
            });
        }
        let omega = tape.scale(acc.unwrap(), 1.0 / self.heads.len() as f64);
        let n = leaves.len();
        let h1 = tape.dense(omega, leaves[n - 4], leaves[n - 3])?;
        let h1 = tape.elu(h1);
        let logits = tape.dense(h1, leaves[n - 2], leaves[n - 1])?;
        Ok((leaves, logits))
    }
}

/// `(1/k) sum_heads V * softmax(W_h V + b_h)` applied row-wise.
pub fn attention_forward(probe: &AttentionProbe, v: &Matrix) -> Result<Matrix> {
    let d = probe.dim();
    if v.cols != d {
        return Err(Error::shape(&[d], &[v.cols]));
    }
    let k = probe.heads.len() as f64;
    let mut out = Matrix::zeros(v.rows, d);
    let mut a = vec![0.0; d];
    for (i, row) in v.iter_rows().enumerate() {
        let dst = out.row_mut(i);
        for head in &probe.heads {
            for (o, (wr, b)) in a.iter_mut().zip(head.weight.values.chunks(d).zip(&head.bias.values)) {
                *o = *b + wr.iter().zip(row).map(|(p, q)| p * q).sum::<f64>();
            }
            math::softmax_in_place(&mut a);
            for ((o, x), s) in dst.iter_mut().zip(row).zip(&a) {
                *o += x * s;
            }
        }
        for o in dst.iter_mut() {
            *o /= k;
        }
    }
    Ok(out)
}

/// Mean over heads of `softmax(diag(W_h))`.
pub fn extract_relevance(probe: &AttentionProbe) -> Vec<f64> {
    let d = probe.dim();
    let mut r = vec![0.0; d];
    for head in &probe.heads {
        let diag: Vec<f64> = (0..d).map(|i| head.weight.values[i * d + i]).collect();
        for (acc, s) in r.iter_mut().zip(math::softmax(&diag)) {
            *acc += s;
        }
    }
    let k = probe.heads.len() as f64;
    r.iter_mut().for_each(|v| *v /= k);
    r
}

/// Probe class probabilities for rows of the placement space.
pub fn probe_predict_proba(probe: &AttentionProbe, v: &Matrix) -> Result<Matrix> {
    if v.cols != probe.dim() {
        return Err(Error::shape(&[probe.dim()], &[v.cols]));
    }
    let mut tape = GradTape::new();
    let (_, logits) = probe.record(&mut tape, &probe.scale(v))?;
    let mut out = Matrix::new(v.rows, probe.out_b.len(), tape.value(logits).values.clone())?;
    for i in 0..out.rows {
        math::softmax_in_place(out.row_mut(i));
    }
    Ok(out)
}

/// Trains an attention probe on the labels of `dataset`. The black box is
/// only read: for embedding placement the probe sees its (frozen) encoder
/// output.
pub fn train_probe(model: &CaeClassifier, dataset: &Dataset, cfg: &ProbeConfig) -> Result<AttentionProbe> {
    let inputs = match cfg.placement {
        Placement::Input => dataset.features.clone(),
        Placement::Embedding => model.encode(&dataset.features)?,
    };
    train_probe_on(&inputs, &dataset.labels, dataset.n_classes(), cfg)
}

/// Trains a probe directly on rows `v` (already in the placement's space).
pub fn train_probe_on(v: &Matrix, labels: &[usize], n_classes: usize, cfg: &ProbeConfig) -> Result<AttentionProbe> {
    if v.rows == 0 {
        return Err(Error::EmptySample);
    }
    let mut probe = AttentionProbe::init(cfg.placement, v.cols, n_classes, cfg)?;
    let (lo, hi) = column_ranges(v);
    probe.lo = lo;
    probe.hi = hi;
    let v = &probe.scale(v);
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut states: Vec<AdamState> = probe.params().iter().map(|t| AdamState::zeros(t.len())).collect();
    let mut rng = seeded(derive_seed(cfg.seed, 0x5052_4f42));
    let mut order: Vec<usize> = (0..v.rows).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let x = v.select_rows(batch);
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let mut tape = GradTape::new();
            let (leaves, logits) = probe.record(&mut tape, &x)?;
            let loss = tape.softmax_cross_entropy(logits, &y)?;
            let lv = tape.scalar(loss);
            if !lv.is_finite() {
                return Err(Error::NonFiniteLoss(epoch));
            }
            total += lv * batch.len() as f64;
            let g = tape.backward(loss)?;
            for ((p, leaf), st) in probe.params_mut().into_iter().zip(&leaves).zip(&mut states) {
                adam_step(&mut p.values, &g.wrt(*leaf).values, st, &adam);
            }
        }
        probe.losses.push(total / v.rows as f64);
    }
    Ok(probe)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankingMethod {
    AttentionInput,
    AttentionEmbeddingChained,
    Sensitivity,
}

/// Relevance scores over the original input features with their descending
/// order (ties: lower index first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub scores: Vec<f64>,
    pub order: Vec<usize>,
    pub k_cut: usize,
    pub method: RankingMethod,
}

impl FeatureRanking {
    pub fn from_scores(scores: Vec<f64>, method: RankingMethod, k_cut: usize) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
            Ordering::Equal => a.cmp(&b),
            o => o,
        });
        FeatureRanking {
            k_cut: k_cut.min(scores.len()),
            scores,
            order,
            method,
        }
    }

    pub fn top(&self) -> &[usize] {
        &self.order[..self.k_cut]
    }

    /// 1-based rank of each feature.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.order.len()];
        for (pos, &f) in self.order.iter().enumerate() {
            r[f] = pos + 1;
        }
        r
    }
}

fn normalise(mut scores: Vec<f64>) -> Vec<f64> {
    let total: f64 = scores.iter().sum();
    if total > 0.0 && total.is_finite() {
        scores.iter_mut().for_each(|s| *s /= total);
    } else {
        let u = 1.0 / scores.len().max(1) as f64;
        scores.iter_mut().for_each(|s| *s = u);
    }
    scores
}

/// Ranking from an input-placement probe: the relevances are already over
/// the input features.
pub fn input_ranking(probe: &AttentionProbe, k_cut: usize) -> Result<FeatureRanking> {
    if probe.placement != Placement::Input {
        return Err(Error::InvalidConfig("input ranking needs an input-placement probe".into()));
    }
    Ok(FeatureRanking::from_scores(extract_relevance(probe), RankingMethod::AttentionInput, k_cut))
}

/// Chains embedding relevances `R` through a `K x M` mean-absolute Jacobian:
/// `score_i = sum_j R_j J[j, i]`, normalised to sum 1.
pub fn chain_relevance(relevance: &[f64], jacobian: &Matrix) -> Result<Vec<f64>> {
    if jacobian.rows != relevance.len() {
        return Err(Error::shape(&[relevance.len()], &[jacobian.rows]));
    }
    let mut scores = vec![0.0; jacobian.cols];
    for (r, row) in relevance.iter().zip(jacobian.iter_rows()) {
        for (s, j) in scores.iter_mut().zip(row) {
            *s += r * j;
        }
    }
    Ok(normalise(scores))
}

/// Input-feature ranking from an embedding-placement probe via the encoder's
/// mean absolute Jacobian over `sample`.
pub fn input_attribution(
    model: &CaeClassifier,
    probe: &AttentionProbe,
    sample: &Matrix,
    k_cut: usize,
) -> Result<FeatureRanking> {
    if probe.placement != Placement::Embedding {
        return Err(Error::InvalidConfig("input attribution needs an embedding-placement probe".into()));
    }
    if sample.rows == 0 {
        return Err(Error::EmptySample);
    }
    // canonical row order: the result must not depend on how rows were listed
    let mut idx: Vec<usize> = (0..sample.rows).collect();
    idx.sort_by(|&a, &b| {
        sample
            .row(a)
            .iter()
            .zip(sample.row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    let canonical = sample.select_rows(&idx);
    let jac = model.mean_abs_jacobian(&canonical)?;
    let scores = chain_relevance(&extract_relevance(probe), &jac)?;
    Ok(FeatureRanking::from_scores(scores, RankingMethod::AttentionEmbeddingChained, k_cut))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbScheme {
    /// `x_i += w * sigma_i * eps`, `eps ~ N(0, 1)`.
    GaussianNoise,
    /// Shuffle column `i`.
    Permute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEntry {
    pub feature: usize,
    /// MSE against one-hot labels after perturbation minus before.
    pub s: f64,
    /// Mean absolute probability shift of the two originally most probable classes.
    pub top2_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub w: f64,
    pub scheme: PerturbScheme,
    pub entries: Vec<SensitivityEntry>,
}

fn onehot_mse(probs: &Matrix, labels: &[usize]) -> f64 {
    let mut s = 0.0;
    for (row, &y) in probs.iter_rows().zip(labels) {
        for (c, p) in row.iter().enumerate() {
            let t = if c == y { 1.0 } else { 0.0 };
            s += (p - t) * (p - t);
        }
    }
    s / (probs.rows * probs.cols) as f64
}

fn top2(row: &[f64]) -> (usize, usize) {
    let first = math::argmax(row);
    let mut second = if first == 0 { 1.min(row.len() - 1) } else { 0 };
    for (i, &p) in row.iter().enumerate() {
        if i != first && p > row[second] {
            second = i;
        }
    }
    (first, second)
}

/// Predictions on unperturbed data, reusable across features.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityBaseline {
    pub probs: Matrix,
    pub mse: f64,
}

pub fn sensitivity_baseline(model: &impl Classifier, data: &Dataset) -> SensitivityBaseline {
    let probs = model.predict_proba(&data.features);
    let mse = onehot_mse(&probs, &data.labels);
    SensitivityBaseline { probs, mse }
}

/// Sensitivity of one feature. The perturbation stream is seeded from
/// `(seed, feature)` so a feature's result does not depend on scan order.
pub fn sensitivity(
    model: &impl Classifier,
    data: &Dataset,
    feature: usize,
    w: f64,
    scheme: PerturbScheme,
    seed: u64,
) -> Result<SensitivityEntry> {
    let base = sensitivity_baseline(model, data);
    sensitivity_with_baseline(model, data, &base, feature, w, scheme, seed)
}

pub fn sensitivity_with_baseline(
    model: &impl Classifier,
    data: &Dataset,
    base: &SensitivityBaseline,
    feature: usize,
    w: f64,
    scheme: PerturbScheme,
    seed: u64,
) -> Result<SensitivityEntry> {
    let m = data.n_features();
    if feature >= m {
        return Err(Error::InvalidFeature { feature, n_features: m });
    }
    if !(w >= 0.0 && w.is_finite()) {
        return Err(Error::InvalidConfig(format!("perturbation magnitude {w} must be >= 0")));
    }
    let mut x = data.features.clone();
    let mut rng = seeded(derive_seed(seed, feature as u64));
    match scheme {
        PerturbScheme::GaussianNoise => {
            let sigma = math::std_dev(&data.features.column(feature));
            for i in 0..x.rows {
                let eps = normal(&mut rng);
                let v = x.get(i, feature) + w * sigma * eps;
                x.set(i, feature, v);
            }
        }
        PerturbScheme::Permute => {
            let mut col = data.features.column(feature);
            col.shuffle(&mut rng);
            for (i, v) in col.into_iter().enumerate() {
                x.set(i, feature, v);
            }
        }
    }
    let probs = model.predict_proba(&x);
    let s = onehot_mse(&probs, &data.labels) - base.mse;
    let mut shift = 0.0;
    for (orig, new) in base.probs.iter_rows().zip(probs.iter_rows()) {
        let (a, b) = top2(orig);
        shift += ((new[a] - orig[a]).abs() + (new[b] - orig[b]).abs()) / 2.0;
    }
    Ok(SensitivityEntry {
        feature,
        s,
        top2_shift: shift / data.n_rows().max(1) as f64,
    })
}

/// Sensitivity of the ranking's top `k_cut` features, in ranking order.
pub fn validate_topk(
    model: &impl Classifier,
    data: &Dataset,
    ranking: &FeatureRanking,
    w: f64,
    scheme: PerturbScheme,
    seed: u64,
) -> Result<SensitivityReport> {
    let base = sensitivity_baseline(model, data);
    let entries = ranking
        .top()
        .iter()
        .map(|&f| sensitivity_with_baseline(model, data, &base, f, w, scheme, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityReport { w, scheme, entries })
}
