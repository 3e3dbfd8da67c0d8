//! Thread-parallel drivers over the core's per-item functions. Each item
//! carries its own derived seed and results are collected in item order, so
//! output does not depend on the thread count.

use rayon::prelude::*;
use xai_core::attribution::{self, GlobalShap, ImportanceEntry, ScoreMetric};
use xai_core::data::{Dataset, Matrix};
use xai_core::math::argmax;
use xai_core::probe::{self, FeatureRanking, PerturbScheme, SensitivityEntry, SensitivityReport};
use xai_core::rng::derive_seed;
use xai_core::surrogate::{self, SurrogateConfig, SurrogateModel};
use xai_core::{Classifier, Error};

use crate::error::{Result, XaiError};

/// Runs `f` on a pool of `threads` workers; 0 means one per core.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| XaiError::Usage(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn fit_surrogate(x: &Matrix, y: &[usize], n_classes: usize, cfg: &SurrogateConfig) -> Result<SurrogateModel> {
    if cfg.n_trees == 0 {
        return Err(Error::InvalidConfig("surrogate needs at least one tree".into()).into());
    }
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| surrogate::fit_member(x, y, n_classes, cfg, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(surrogate::assemble(cfg.kind, x.cols, n_classes, trees))
}

pub fn validate_topk<C: Classifier + Sync>(
    model: &C,
    data: &Dataset,
    ranking: &FeatureRanking,
    w: f64,
    scheme: PerturbScheme,
    seed: u64,
) -> Result<SensitivityReport> {
    let base = probe::sensitivity_baseline(model, data);
    let entries = ranking
        .top()
        .par_iter()
        .map(|&f| probe::sensitivity_with_baseline(model, data, &base, f, w, scheme, seed))
        .collect::<Result<Vec<SensitivityEntry>, _>>()?;
    Ok(SensitivityReport { w, scheme, entries })
}

/// Sensitivity of every feature, not just the ranked top.
pub fn sensitivity_all<C: Classifier + Sync>(
    model: &C,
    data: &Dataset,
    w: f64,
    scheme: PerturbScheme,
    seed: u64,
) -> Result<Vec<SensitivityEntry>> {
    let base = probe::sensitivity_baseline(model, data);
    Ok((0..data.n_features())
        .into_par_iter()
        .map(|f| probe::sensitivity_with_baseline(model, data, &base, f, w, scheme, seed))
        .collect::<Result<Vec<_>, _>>()?)
}

pub fn permutation_importance<C: Classifier + Sync>(
    model: &C,
    data: &Dataset,
    metric: ScoreMetric,
    n_repeats: usize,
    seed: u64,
) -> Result<Vec<ImportanceEntry>> {
    Ok((0..data.n_features())
        .into_par_iter()
        .map(|f| attribution::permutation_importance_feature(model, data, metric, n_repeats, seed, f))
        .collect::<Result<Vec<_>, _>>()?)
}

/// Same result as the sequential core routine, bit for bit.
pub fn global_shap<C: Classifier + Sync>(
    model: &C,
    rows: &Matrix,
    background: &Matrix,
    n_permutations: usize,
    seed: u64,
) -> Result<GlobalShap> {
    if rows.rows == 0 {
        return Err(Error::EmptySample.into());
    }
    let per_row = (0..rows.rows)
        .into_par_iter()
        .map(|r| {
            let sv = attribution::shapley(model, rows.row(r), background, n_permutations, derive_seed(seed, r as u64))?;
            Ok(sv.for_output(argmax(&sv.full)))
        })
        .collect::<Result<Vec<Vec<f64>>, Error>>()?;
    let k = rows.cols;
    let mut gfi = vec![0.0; k];
    let mut mean_phi = vec![0.0; k];
    for phi in &per_row {
        for i in 0..k {
            gfi[i] += phi[i].abs();
            mean_phi[i] += phi[i];
        }
    }
    let n = rows.rows as f64;
    gfi.iter_mut().for_each(|v| *v /= n);
    mean_phi.iter_mut().for_each(|v| *v /= n);
    Ok(GlobalShap { gfi, mean_phi })
}
