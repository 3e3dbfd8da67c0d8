//! Tabular datasets: validation, standardisation, stratified splitting,
//! synthetic high-dimensional generation and top-k column reduction.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::probe::FeatureRanking;
use crate::rng::{normal, seeded};
use crate::{Error, Result};

/// Row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(Error::shape(&[rows, cols], &[values.len()]));
        }
        Ok(Matrix { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::shape(&[cols], &[r.len()]));
            }
            values.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            values,
        })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.cols + j] = v;
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            values,
        }
    }

    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        let mut values = Vec::with_capacity(self.rows * cols.len());
        for r in self.iter_rows() {
            values.extend(cols.iter().map(|&j| r[j]));
        }
        Matrix {
            rows: self.rows,
            cols: cols.len(),
            values,
        }
    }
}

/// Labeled tabular data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking every structural invariant.
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let d = Dataset {
            features,
            labels,
            feature_names,
            class_names,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.features.rows, self.features.cols);
        if n == 0 || m == 0 {
            return Err(Error::InvalidData(format!("need N >= 1 and M >= 1, got {n}x{m}")));
        }
        if self.class_names.len() < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 classes, got {}",
                self.class_names.len()
            )));
        }
        if self.labels.len() != n {
            return Err(Error::shape(&[n], &[self.labels.len()]));
        }
        if self.feature_names.len() != m {
            return Err(Error::shape(&[m], &[self.feature_names.len()]));
        }
        if let Some(pos) = self.features.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at row {}, column {}",
                pos / m,
                pos % m
            )));
        }
        let c = self.class_names.len();
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= c) {
            return Err(Error::InvalidData(format!("label {bad} outside {c} classes")));
        }
        let unique: BTreeSet<&str> = self.feature_names.iter().map(|s| s.as_str()).collect();
        if unique.len() != m {
            return Err(Error::InvalidData("feature names are not unique".into()));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.features.rows
    }

    pub fn n_features(&self) -> usize {
        self.features.cols
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Index of the most frequent class; ties go to the lower index.
    pub fn majority_class(&self) -> usize {
        let counts = self.class_counts();
        let mut best = 0;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = i;
            }
        }
        best
    }
}

/// Per-column standardisation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub means: Vec<f64>,
    /// Population standard deviations; a constant column records 0.
    pub std_devs: Vec<f64>,
}

impl ScalerParams {
    fn scale(&self, j: usize) -> f64 {
        if self.std_devs[j] > 0.0 {
            self.std_devs[j]
        } else {
            1.0
        }
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - self.means[j]) / self.scale(j);
        }
    }

    pub fn transform(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for i in 0..out.rows {
            self.transform_row(out.row_mut(i));
        }
        out
    }

    pub fn inverse_transform(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for i in 0..out.rows {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = *v * self.scale(j) + self.means[j];
            }
        }
        out
    }
}

/// Fits population-convention standardisation and applies it.
pub fn standardize(d: &Dataset) -> Result<(Dataset, ScalerParams)> {
    if d.n_rows() < 2 {
        return Err(Error::InvalidData("standardisation needs at least 2 rows".into()));
    }
    let m = d.n_features();
    let mut means = Vec::with_capacity(m);
    let mut std_devs = Vec::with_capacity(m);
    for j in 0..m {
        let col = d.features.column(j);
        let mu = math::mean(&col);
        let sd = math::std_dev(&col);
        means.push(mu);
        // floating noise on a constant column is still a constant column
        let constant = col.iter().all(|&v| v == col[0]);
        std_devs.push(if constant { 0.0 } else { sd });
    }
    let params = ScalerParams { means, std_devs };
    let mut out = d.clone();
    out.features = params.transform(&d.features);
    for (j, sd) in params.std_devs.iter().enumerate() {
        if *sd == 0.0 {
            for i in 0..out.n_rows() {
                out.features.set(i, j, 0.0);
            }
        }
    }
    Ok((out, params))
}

/// Row indices `(train, test)` of a stratified split, each ascending.
pub fn split_indices(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("test fraction {test_fraction} not in (0, 1)")));
    }
    let counts = d.class_counts();
    if let Some(class) = counts.iter().position(|&c| c == 1) {
        return Err(Error::DegenerateSplit { class });
    }
    let n = d.n_rows();
    let n_test = libm::round(n as f64 * test_fraction) as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidConfig(format!(
            "test fraction {test_fraction} of {n} rows leaves an empty partition"
        )));
    }
    let c = d.n_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &l) in d.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    // largest-remainder apportionment of the test rows across classes
    let mut quota: Vec<usize> = Vec::with_capacity(c);
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(c);
    for (k, rows) in by_class.iter().enumerate() {
        let exact = rows.len() as f64 * test_fraction;
        let base = (math::floor(exact) as usize).min(rows.len().saturating_sub(1));
        quota.push(base);
        remainders.push((exact - base as f64, k));
    }
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut assigned: usize = quota.iter().sum();
    let mut cursor = 0;
    let mut stalled = 0;
    while assigned < n_test && stalled < c {
        let k = remainders[cursor % c].1;
        cursor += 1;
        if quota[k] + 1 < by_class[k].len() {
            quota[k] += 1;
            assigned += 1;
            stalled = 0;
        } else {
            stalled += 1;
        }
    }
    if assigned < n_test {
        let class = (0..c).find(|&k| !by_class[k].is_empty() && quota[k] + 1 >= by_class[k].len()).unwrap_or(0);
        return Err(Error::DegenerateSplit { class });
    }
    let mut rng = seeded(seed);
    let mut train = Vec::with_capacity(n - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (k, rows) in by_class.iter_mut().enumerate() {
        rows.shuffle(&mut rng);
        test.extend_from_slice(&rows[..quota[k]]);
        train.extend_from_slice(&rows[quota[k]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified, seeded split into `(train, test)`.
pub fn split(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(d, test_fraction, seed)?;
    Ok((d.subset(&train), d.subset(&test)))
}

/// Synthetic data together with its ground-truth informative columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDataset {
    pub dataset: Dataset,
    /// Informative column indices, ascending.
    pub informative: Vec<usize>,
}

/// Class-conditional Gaussian data in a high-dimensional noise background.
///
/// Each informative column gives every class a distinct mean, evenly spaced in
/// `[-1, 1]` under a per-column random class permutation, plus
/// `noise_sigma * N(0, 1)`. The other columns are `N(0, 1)` noise. Labels are
/// drawn uniformly and the informative columns sit at random positions.
pub fn synth_highdim(
    n: usize,
    m_total: usize,
    m_informative: usize,
    classes: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<SynthDataset> {
    if n == 0 || m_total == 0 {
        return Err(Error::InvalidConfig("synth needs n >= 1 and m_total >= 1".into()));
    }
    if m_informative > m_total {
        return Err(Error::InvalidConfig(format!(
            "m_informative {m_informative} exceeds m_total {m_total}"
        )));
    }
    if classes < 2 {
        return Err(Error::InvalidConfig("synth needs at least 2 classes".into()));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise sigma {noise_sigma} must be >= 0")));
    }
    let mut rng = seeded(seed);
    let mut columns: Vec<usize> = (0..m_total).collect();
    columns.shuffle(&mut rng);
    let mut informative: Vec<usize> = columns[..m_informative].to_vec();
    informative.sort_unstable();

    // means[c][slot]
    let mut means = vec![vec![0.0; m_informative]; classes];
    for slot in 0..m_informative {
        let mut perm: Vec<usize> = (0..classes).collect();
        perm.shuffle(&mut rng);
        for (c, &p) in perm.iter().enumerate() {
            means[c][slot] = 2.0 * p as f64 / (classes - 1) as f64 - 1.0;
        }
    }
    let mut slot_of = vec![usize::MAX; m_total];
    for (slot, &col) in informative.iter().enumerate() {
        slot_of[col] = slot;
    }

    let mut labels = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * m_total);
    for _ in 0..n {
        let y = rng.gen_range(0..classes);
        labels.push(y);
        for &slot in &slot_of {
            let eps = normal(&mut rng);
            values.push(if slot == usize::MAX {
                eps
            } else {
                means[y][slot] + noise_sigma * eps
            });
        }
    }
    let dataset = Dataset::new(
        Matrix::new(n, m_total, values)?,
        labels,
        (0..m_total).map(|j| format!("f{j}")).collect(),
        (0..classes).map(|c| format!("c{c}")).collect(),
    )?;
    Ok(SynthDataset {
        dataset,
        informative,
    })
}

/// A dataset restricted to its top-ranked columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedDataset {
    pub base: Dataset,
    /// Original column indices of `base`'s columns, strictly increasing.
    pub selected_indices: Vec<usize>,
    /// The same columns in ranking order (most relevant first).
    pub rank_order: Vec<usize>,
}

impl ReducedDataset {
    /// Projects a full-width row onto the selected columns.
    pub fn project_row(&self, full: &[f64]) -> Vec<f64> {
        self.selected_indices.iter().map(|&j| full[j]).collect()
    }

    pub fn project(&self, full: &Matrix) -> Matrix {
        full.select_cols(&self.selected_indices)
    }
}

/// Keeps the `k` highest-ranked columns.
pub fn reduce_to_topk(d: &Dataset, ranking: &FeatureRanking, k: usize) -> Result<ReducedDataset> {
    let m = d.n_features();
    if k > m {
        return Err(Error::KTooLarge { k, available: m });
    }
    if ranking.scores.len() != m || ranking.order.len() != m {
        return Err(Error::shape(&[m], &[ranking.order.len()]));
    }
    let rank_order: Vec<usize> = ranking.order[..k].to_vec();
    let mut selected = rank_order.clone();
    selected.sort_unstable();
    let base = Dataset {
        features: d.features.select_cols(&selected),
        labels: d.labels.clone(),
        feature_names: selected.iter().map(|&j| d.feature_names[j].clone()).collect(),
        class_names: d.class_names.clone(),
    };
    Ok(ReducedDataset {
        base,
        selected_indices: selected,
        rank_order,
    })
}
