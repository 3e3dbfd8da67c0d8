//! Tree surrogates (single tree, random forest, extremely randomised trees)
//! fitted to black-box predictions, MDI importance and fidelity scoring.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::math;
use crate::model::Classifier;
use crate::rng::{derive_seed, seeded, SeededRng};
use crate::{Error, Result};

/// Gini impurity `sum p_k (1 - p_k)` of a class-count or proportion vector.
pub fn gini(dist: &[f64]) -> Result<f64> {
    let n: f64 = dist.iter().sum();
    if !(n > 0.0) || dist.iter().any(|&v| v < 0.0) {
        return Err(Error::EmptyNode);
    }
    Ok(dist.iter().map(|&c| (c / n) * (1.0 - c / n)).sum())
}

fn gini_counts(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n) * (c as f64 / n)).sum::<f64>()
}

fn gini_dist(dist: &[f64]) -> f64 {
    1.0 - dist.iter().map(|p| p * p).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafData {
    pub dist: Vec<f64>,
    pub n: usize,
}

/// Rows with `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        n: usize,
        dist: Vec<f64>,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        leaf: LeafData,
    },
}

impl TreeNode {
    pub fn n(&self) -> usize {
        match self {
            TreeNode::Split { n, .. } => *n,
            TreeNode::Leaf { leaf } => leaf.n,
        }
    }

    pub fn dist(&self) -> &[f64] {
        match self {
            TreeNode::Split { dist, .. } => dist,
            TreeNode::Leaf { leaf } => &leaf.dist,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
            TreeNode::Leaf { .. } => 0,
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
            TreeNode::Leaf { .. } => 1,
        }
    }

    pub fn leaf_for(&self, x: &[f64]) -> &LeafData {
        let mut node = self;
        loop {
            match node {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if x[*feature] < *threshold { left } else { right },
                TreeNode::Leaf { leaf } => return leaf,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaxFeatures {
    All,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Every midpoint between consecutive distinct values.
    Best,
    /// One uniform draw in `(min, max)` per candidate feature.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub thresholds: ThresholdMode,
}

impl TreeConfig {
    pub fn decision_tree() -> Self {
        TreeConfig {
            max_depth: Some(8),
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            thresholds: ThresholdMode::Best,
        }
    }

    pub fn forest(thresholds: ThresholdMode) -> Self {
        TreeConfig {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 2,
            max_features: MaxFeatures::Sqrt,
            thresholds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub n_features: usize,
    pub n_classes: usize,
    pub root: TreeNode,
}

impl Tree {
    pub fn predict_proba_row(&self, x: &[f64]) -> &[f64] {
        &self.root.leaf_for(x).dist
    }
}

struct Fitter<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    cfg: &'a TreeConfig,
    rng: SeededRng,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Fitter<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &r in rows {
            c[self.y[r]] += 1;
        }
        c
    }

    fn features(&mut self) -> Vec<usize> {
        let m = self.x.cols;
        let mut f: Vec<usize> = match self.cfg.max_features {
            MaxFeatures::All => (0..m).collect(),
            MaxFeatures::Sqrt => {
                let k = (math::sqrt(m as f64) as usize).clamp(1, m);
                sample(&mut self.rng, m, k).into_vec()
            }
        };
        f.sort_unstable();
        f
    }

    fn best_threshold(&self, rows: &[usize], feature: usize, best: &mut Option<Candidate>) {
        let mut vals: Vec<(f64, usize)> = rows.iter().map(|&r| (self.x.get(r, feature), self.y[r])).collect();
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = vals.len();
        let mut left = vec![0usize; self.n_classes];
        let mut right = self.counts(rows);
        let min_leaf = self.cfg.min_samples_leaf.max(1);
        for i in 0..n - 1 {
            left[vals[i].1] += 1;
            right[vals[i].1] -= 1;
            let (a, b) = (vals[i].0, vals[i + 1].0);
            if a == b || i + 1 < min_leaf || n - i - 1 < min_leaf {
                continue;
            }
            let nl = (i + 1) as f64;
            let imp = (nl * gini_counts(&left, i + 1) + (n as f64 - nl) * gini_counts(&right, n - i - 1)) / n as f64;
            if best.as_ref().is_none_or(|c| imp < c.impurity) {
                let mut t = a + (b - a) / 2.0;
                if !(a < t) {
                    t = b;
                }
                *best = Some(Candidate {
                    feature,
                    threshold: t,
                    impurity: imp,
                });
            }
        }
    }

    fn random_threshold(&mut self, rows: &[usize], feature: usize, best: &mut Option<Candidate>) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in rows {
            let v = self.x.get(r, feature);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !(lo < hi) {
            return;
        }
        let mut t = self.rng.gen_range(lo..hi);
        if !(lo < t) {
            t = hi;
        }
        let mut left = vec![0usize; self.n_classes];
        let mut right = vec![0usize; self.n_classes];
        for &r in rows {
            if self.x.get(r, feature) < t {
                left[self.y[r]] += 1;
            } else {
                right[self.y[r]] += 1;
            }
        }
        let nl: usize = left.iter().sum();
        let nr = rows.len() - nl;
        let min_leaf = self.cfg.min_samples_leaf.max(1);
        if nl < min_leaf || nr < min_leaf {
            return;
        }
        let imp = (nl as f64 * gini_counts(&left, nl) + nr as f64 * gini_counts(&right, nr)) / rows.len() as f64;
        if best.as_ref().is_none_or(|c| imp < c.impurity) {
            *best = Some(Candidate {
                feature,
                threshold: t,
                impurity: imp,
            });
        }
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> TreeNode {
        let counts = self.counts(&rows);
        let n = rows.len();
        let dist: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let stop = pure
            || n < self.cfg.min_samples_split.max(2)
            || n < 2 * self.cfg.min_samples_leaf.max(1)
            || self.cfg.max_depth.is_some_and(|d| depth >= d);
        if !stop {
            let mut best = None;
            for f in self.features() {
                match self.cfg.thresholds {
                    ThresholdMode::Best => self.best_threshold(&rows, f, &mut best),
                    ThresholdMode::Random => self.random_threshold(&rows, f, &mut best),
                }
            }
            if let Some(c) = best {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.into_iter().partition(|&i| self.x.get(i, c.feature) < c.threshold);
                let left = Box::new(self.grow(l, depth + 1));
                let right = Box::new(self.grow(r, depth + 1));
                return TreeNode::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    n,
                    dist,
                    left,
                    right,
                };
            }
        }
        TreeNode::Leaf {
            leaf: LeafData { dist, n },
        }
    }
}

fn check_xy(x: &Matrix, y: &[usize], n_classes: usize) -> Result<()> {
    if x.rows == 0 {
        return Err(Error::EmptyNode);
    }
    if y.len() != x.rows {
        return Err(Error::shape(&[x.rows], &[y.len()]));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidData(alloc::format!("label {bad} out of range for {n_classes} classes")));
    }
    Ok(())
}

/// Fits a tree on the given rows of `x` (repeats allowed).
pub fn fit_tree_on(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    rows: Vec<usize>,
    cfg: &TreeConfig,
    seed: u64,
) -> Result<Tree> {
    check_xy(x, y, n_classes)?;
    if rows.is_empty() {
        return Err(Error::EmptyNode);
    }
    let mut f = Fitter {
        x,
        y,
        n_classes,
        cfg,
        rng: seeded(seed),
    };
    let root = f.grow(rows, 0);
    Ok(Tree {
        n_features: x.cols,
        n_classes,
        root,
    })
}

pub fn fit_tree(x: &Matrix, y: &[usize], n_classes: usize, cfg: &TreeConfig, seed: u64) -> Result<Tree> {
    fit_tree_on(x, y, n_classes, (0..x.rows).collect(), cfg, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    Dt,
    Rf,
    Ert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub kind: SurrogateKind,
    pub n_trees: usize,
    pub tree: TreeConfig,
    pub seed: u64,
}

impl SurrogateConfig {
    pub fn new(kind: SurrogateKind, seed: u64) -> Self {
        let (n_trees, tree) = match kind {
            SurrogateKind::Dt => (1, TreeConfig::decision_tree()),
            SurrogateKind::Rf => (100, TreeConfig::forest(ThresholdMode::Best)),
            SurrogateKind::Ert => (100, TreeConfig::forest(ThresholdMode::Random)),
        };
        SurrogateConfig {
            kind,
            n_trees,
            tree,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub kind: SurrogateKind,
    pub n_features: usize,
    pub n_classes: usize,
    pub trees: Vec<Tree>,
}

/// Tree `t` of an ensemble. Each tree has its own seed so trees can be
/// grown in any order or in parallel.
pub fn fit_member(x: &Matrix, y: &[usize], n_classes: usize, cfg: &SurrogateConfig, t: usize) -> Result<Tree> {
    let seed = derive_seed(cfg.seed, t as u64);
    let rows = match cfg.kind {
        SurrogateKind::Rf => {
            let mut rng = seeded(derive_seed(seed, 0x424f_4f54));
            (0..x.rows).map(|_| rng.gen_range(0..x.rows)).collect()
        }
        _ => (0..x.rows).collect(),
    };
    fit_tree_on(x, y, n_classes, rows, &cfg.tree, seed)
}

pub fn assemble(kind: SurrogateKind, n_features: usize, n_classes: usize, trees: Vec<Tree>) -> SurrogateModel {
    SurrogateModel {
        kind,
        n_features,
        n_classes,
        trees,
    }
}

/// Fits a surrogate to `y`, normally the black box's predicted labels.
pub fn fit_surrogate(x: &Matrix, y: &[usize], n_classes: usize, cfg: &SurrogateConfig) -> Result<SurrogateModel> {
    if cfg.n_trees == 0 {
        return Err(Error::InvalidConfig("surrogate needs at least one tree".into()));
    }
    let trees = (0..cfg.n_trees)
        .map(|t| fit_member(x, y, n_classes, cfg, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(cfg.kind, x.cols, n_classes, trees))
}

impl Classifier for SurrogateModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (acc, v) in p.iter_mut().zip(t.predict_proba_row(x)) {
                *acc += v;
            }
        }
        let k = self.trees.len() as f64;
        p.iter_mut().for_each(|v| *v /= k);
        p
    }
}

fn mdi_acc(node: &TreeNode, total: f64, out: &mut [f64]) {
    if let TreeNode::Split {
        feature,
        n,
        dist,
        left,
        right,
        ..
    } = node
    {
        let (nl, nr) = (left.n() as f64, right.n() as f64);
        let nn = *n as f64;
        let dec = gini_dist(dist) - (nl * gini_dist(left.dist()) + nr * gini_dist(right.dist())) / nn;
        out[*feature] += nn / total * dec;
        mdi_acc(left, total, out);
        mdi_acc(right, total, out);
    }
}

/// Mean decrease in impurity per feature, averaged over trees and
/// normalised to sum 1 (uniform when no split reduces impurity).
pub fn mdi_importance(model: &SurrogateModel) -> Vec<f64> {
    let mut out = vec![0.0; model.n_features];
    for t in &model.trees {
        let mut per = vec![0.0; model.n_features];
        mdi_acc(&t.root, t.root.n() as f64, &mut per);
        let s: f64 = per.iter().sum();
        if s > 0.0 {
            for (o, p) in out.iter_mut().zip(&per) {
                *o += p / s;
            }
        }
    }
    let s: f64 = out.iter().sum();
    if s > 0.0 {
        out.iter_mut().for_each(|v| *v /= s);
    } else {
        let u = 1.0 / model.n_features.max(1) as f64;
        out.iter_mut().for_each(|v| *v = u);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Replace,
    Reject,
}

pub const DEFAULT_R2_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityScore {
    pub r_squared: f64,
    pub sse_surrogate: f64,
    pub sse_blackbox: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// `1 - sum (s_i - b_i)^2 / sum (b_i - mean b)^2` for surrogate outputs `s`
/// against black-box outputs `b`.
pub fn r_squared(surrogate: &[f64], blackbox: &[f64], threshold: f64) -> Result<FidelityScore> {
    if surrogate.len() != blackbox.len() {
        return Err(Error::shape(&[blackbox.len()], &[surrogate.len()]));
    }
    if blackbox.len() < 2 {
        return Err(Error::EmptySample);
    }
    let m = math::mean(blackbox);
    let sse_blackbox: f64 = blackbox.iter().map(|b| (b - m) * (b - m)).sum();
    if sse_blackbox == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sse_surrogate: f64 = surrogate.iter().zip(blackbox).map(|(s, b)| (s - b) * (s - b)).sum();
    let r2 = 1.0 - sse_surrogate / sse_blackbox;
    Ok(FidelityScore {
        r_squared: r2,
        sse_surrogate,
        sse_blackbox,
        threshold,
        verdict: if r2 >= threshold { Verdict::Replace } else { Verdict::Reject },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum R2Mode {
    /// Predicted class indices as numbers.
    ClassIndex,
    /// Probability each model gives to the black box's predicted class.
    Probability,
    /// Every entry of the `N x C` probability matrices.
    ProbabilityMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityBand {
    High,
    Medium,
    Low,
}

impl FidelityBand {
    pub fn of(score: f64) -> Self {
        if score >= 0.8 {
            FidelityBand::High
        } else if score >= 0.6 {
            FidelityBand::Medium
        } else {
            FidelityBand::Low
        }
    }
}

/// R² of surrogate against black-box outputs on the same rows, read from
/// their class-probability matrices.
pub fn fidelity(bb: &Matrix, sur: &Matrix, mode: R2Mode, threshold: f64) -> Result<FidelityScore> {
    if bb.rows != sur.rows || bb.cols != sur.cols {
        return Err(Error::shape(&[bb.rows, bb.cols], &[sur.rows, sur.cols]));
    }
    let bb_cls = || bb.iter_rows().map(math::argmax);
    let (b, s): (Vec<f64>, Vec<f64>) = match mode {
        R2Mode::ClassIndex => bb_cls().zip(sur.iter_rows()).map(|(a, row)| (a as f64, math::argmax(row) as f64)).unzip(),
        R2Mode::Probability => bb_cls().enumerate().map(|(i, c)| (bb.get(i, c), sur.get(i, c))).unzip(),
        R2Mode::ProbabilityMatrix => (bb.values.clone(), sur.values.clone()),
    };
    r_squared(&s, &b, threshold)
}
