//! The threaded drivers must reproduce the sequential core routines exactly,
//! whatever the pool size.

use xai::parallel::{self, with_threads};
use xai_core::attribution::{self, ScoreMetric};
use xai_core::data::synth_highdim;
use xai_core::probe::{self, FeatureRanking, PerturbScheme, RankingMethod};
use xai_core::surrogate::{fit_surrogate, SurrogateConfig, SurrogateKind};
use xai_core::Classifier;

fn data() -> xai_core::data::Dataset {
    synth_highdim(240, 8, 4, 3, 0.8, 5).unwrap().dataset
}

#[test]
fn forests_match_sequential_fit() {
    let d = data();
    for kind in [SurrogateKind::Rf, SurrogateKind::Ert, SurrogateKind::Dt] {
        let mut cfg = SurrogateConfig::new(kind, 9);
        cfg.n_trees = cfg.n_trees.min(12);
        let seq = fit_surrogate(&d.features, &d.labels, 3, &cfg).unwrap();
        for t in [1, 2, 3] {
            let par = with_threads(t, || parallel::fit_surrogate(&d.features, &d.labels, 3, &cfg)).unwrap().unwrap();
            assert_eq!(par, seq, "{kind:?} threads={t}");
        }
    }
}

#[test]
fn attribution_drivers_match_sequential() {
    let d = data();
    let mut cfg = SurrogateConfig::new(SurrogateKind::Rf, 1);
    cfg.n_trees = 8;
    let model = fit_surrogate(&d.features, &d.labels, 3, &cfg).unwrap();
    let ranking = FeatureRanking::from_scores((0..8).map(|i| i as f64).collect(), RankingMethod::Sensitivity, 5);
    let seq_sens = probe::validate_topk(&model, &d, &ranking, 1.0, PerturbScheme::GaussianNoise, 3).unwrap();
    let seq_imp = attribution::permutation_importance(&model, &d, ScoreMetric::MacroF1, 3, 3).unwrap();
    let rows = d.features.select_rows(&[0, 10, 20, 30]);
    let bg = d.features.select_rows(&[1, 2, 3, 4, 5, 6]);
    let seq_shap = attribution::global_shap(&model, &rows, &bg, 16, 3).unwrap();
    let seq_all: Vec<_> = (0..8)
        .map(|f| probe::sensitivity(&model, &d, f, 0.5, PerturbScheme::Permute, 2).unwrap())
        .collect();
    for t in [1, 2, 4] {
        let (sens, imp, shap, all) = with_threads(t, || {
            (
                parallel::validate_topk(&model, &d, &ranking, 1.0, PerturbScheme::GaussianNoise, 3).unwrap(),
                parallel::permutation_importance(&model, &d, ScoreMetric::MacroF1, 3, 3).unwrap(),
                parallel::global_shap(&model, &rows, &bg, 16, 3).unwrap(),
                parallel::sensitivity_all(&model, &d, 0.5, PerturbScheme::Permute, 2).unwrap(),
            )
        })
        .unwrap();
        assert_eq!(sens, seq_sens);
        assert_eq!(imp, seq_imp);
        assert_eq!(shap, seq_shap);
        assert_eq!(all, seq_all);
    }
    assert_eq!(model.n_features(), 8);
}

#[test]
fn empty_shap_sample_is_an_error() {
    let d = data();
    let model = fit_surrogate(&d.features, &d.labels, 3, &SurrogateConfig::new(SurrogateKind::Dt, 0)).unwrap();
    let none = d.features.select_rows(&[]);
    assert!(parallel::global_shap(&model, &none, &d.features, 8, 0).is_err());
}
