use proptest::prelude::*;
use xai_core::attribution::{
    global_shap, permutation_importance, shapley_exact, shapley_over_orders, shapley_sampled, stacked_shap,
    ScoreMetric,
};
use xai_core::data::{synth_highdim, Dataset, Matrix};
use xai_core::surrogate::{fit_surrogate, SurrogateConfig, SurrogateKind};
use xai_core::{Classifier, FnClassifier};

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Mean output over the background with coalition `s` taken from `x`.
fn value(f: &impl Classifier, x: &[f64], bg: &Matrix, s: &[bool], c: usize) -> f64 {
    let mut total = 0.0;
    for row in bg.iter_rows() {
        let z: Vec<f64> = (0..x.len()).map(|i| if s[i] { x[i] } else { row[i] }).collect();
        total += f.predict_proba_row(&z)[c];
    }
    total / bg.rows as f64
}

/// Average marginal contribution over all k! orderings.
fn permutation_oracle(f: &impl Classifier, x: &[f64], bg: &Matrix, c: usize) -> Vec<f64> {
    let k = x.len();
    let perms = permutations(k);
    let mut phi = vec![0.0; k];
    for p in &perms {
        let mut s = vec![false; k];
        let mut prev = value(f, x, bg, &s, c);
        for &i in p {
            s[i] = true;
            let next = value(f, x, bg, &s, c);
            phi[i] += next - prev;
            prev = next;
        }
    }
    phi.iter().map(|v| v / perms.len() as f64).collect()
}

/// A small nonlinear two-output function with interactions.
fn wiggly(k: usize) -> FnClassifier<impl Fn(&[f64]) -> Vec<f64>> {
    FnClassifier::new(k, 2, move |x: &[f64]| {
        let a: f64 = x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v).sum::<f64>();
        let b = x.windows(2).map(|w| w[0] * w[1]).sum::<f64>() + libm::sin(x[0]);
        vec![libm::tanh(a / 4.0), b]
    })
}

prop_compose! {
    fn case()(k in 1usize..=6, nb in 1usize..4)
        (x in prop::collection::vec(-2.0f64..2.0, k), bg in prop::collection::vec(-2.0f64..2.0, k * nb),
         k in Just(k), nb in Just(nb)) -> (Vec<f64>, Matrix) {
        (x, Matrix::new(nb, k, bg).unwrap())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_matches_the_permutation_oracle((x, bg) in case()) {
        let f = wiggly(x.len());
        let sv = shapley_exact(&f, &x, &bg).unwrap();
        for c in 0..2 {
            let oracle = permutation_oracle(&f, &x, &bg, c);
            for (a, b) in sv.for_output(c).iter().zip(&oracle) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
            let total: f64 = sv.for_output(c).iter().sum();
            prop_assert!((total - (sv.full[c] - sv.base[c])).abs() <= 1e-9);
        }
    }

    #[test]
    fn all_orderings_once_reproduce_exact((x, bg) in case()) {
        let f = wiggly(x.len());
        let exact = shapley_exact(&f, &x, &bg).unwrap();
        let all = shapley_over_orders(&f, &x, &bg, &permutations(x.len())).unwrap();
        for (a, b) in exact.phi.values.iter().zip(&all.phi.values) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn symmetric_features_share_value_and_null_features_get_zero(a in -2.0f64..2.0, b in -2.0f64..2.0, z in -2.0f64..2.0) {
        // x0 and x1 enter symmetrically; x2 is never read
        let f = FnClassifier::new(3, 1, |x: &[f64]| vec![libm::exp(x[0] + x[1]) + x[0] * x[1]]);
        let x = [a, a, z];
        let bg = Matrix::new(2, 3, vec![b, b, 0.3, -b, -b, 1.7]).unwrap();
        let phi = shapley_exact(&f, &x, &bg).unwrap().for_output(0);
        prop_assert!((phi[0] - phi[1]).abs() <= 1e-12);
        prop_assert_eq!(phi[2], 0.0);
    }
}

#[test]
fn linear_two_feature_example() {
    let f = FnClassifier::new(2, 1, |x: &[f64]| vec![x[0] + 2.0 * x[1]]);
    let sv = shapley_exact(&f, &[1.0, 1.0], &Matrix::zeros(1, 2)).unwrap();
    assert_eq!(sv.for_output(0), vec![1.0, 2.0]);
    assert_eq!((sv.base[0], sv.full[0]), (0.0, 3.0));
}

#[test]
fn sampled_estimate_is_within_three_standard_errors() {
    let k = 5;
    let f = wiggly(k);
    let x = [0.7, -1.2, 0.4, 1.9, -0.3];
    let bg = Matrix::new(2, k, vec![0.1, 0.2, -0.5, 0.0, 1.0, -1.0, 0.4, 0.3, 0.8, -0.6]).unwrap();
    let exact = shapley_exact(&f, &x, &bg).unwrap();
    let est = shapley_sampled(&f, &x, &bg, 10_000, 42).unwrap();
    let se = est.std_error.as_ref().unwrap();
    for i in 0..k {
        for c in 0..2 {
            let diff = (est.phi.get(i, c) - exact.phi.get(i, c)).abs();
            assert!(diff <= 3.0 * se.get(i, c) + 1e-12, "feature {i} output {c}: {diff} vs se {}", se.get(i, c));
        }
    }
    assert_eq!(est, shapley_sampled(&f, &x, &bg, 10_000, 42).unwrap());
}

fn binary_data(n: usize) -> Dataset {
    // x0 is a balanced binary label copy, x1 is noise
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let y = i % 2;
        values.extend([y as f64, ((i * 7919) % 13) as f64]);
        labels.push(y);
    }
    Dataset::new(Matrix::new(n, 2, values).unwrap(), labels, vec!["a".into(), "b".into()], vec!["n".into(), "p".into()])
        .unwrap()
}

fn pass_through() -> FnClassifier<impl Fn(&[f64]) -> Vec<f64>> {
    FnClassifier::new(2, 2, |x: &[f64]| if x[0] >= 0.5 { vec![0.0, 1.0] } else { vec![1.0, 0.0] })
}

#[test]
fn pass_through_importance_drops_to_chance() {
    let d = binary_data(2000);
    let imp = permutation_importance(&pass_through(), &d, ScoreMetric::Accuracy, 5, 3).unwrap();
    // baseline accuracy is 1 and a shuffled copy is right half the time
    assert!((imp[0].mean - 0.5).abs() <= 0.05, "{}", imp[0].mean);
    assert_eq!((imp[1].mean, imp[1].std), (0.0, 0.0));
    assert_eq!(imp, permutation_importance(&pass_through(), &d, ScoreMetric::Accuracy, 5, 3).unwrap());
    let f1 = permutation_importance(&pass_through(), &d, ScoreMetric::MacroF1, 2, 3).unwrap();
    assert!(f1[0].mean > 0.4);
}

#[test]
fn constant_column_has_zero_importance() {
    let mut d = binary_data(100);
    for i in 0..100 {
        d.features.set(i, 1, 4.0);
    }
    let model = FnClassifier::new(2, 2, |x: &[f64]| {
        let p = 1.0 / (1.0 + libm::exp(-(x[0] - 0.5 + 0.1 * x[1])));
        vec![1.0 - p, p]
    });
    let imp = permutation_importance(&model, &d, ScoreMetric::Accuracy, 3, 0).unwrap();
    assert_eq!(imp[1].mean, 0.0);
}

#[test]
fn global_shap_examples() {
    let f = wiggly(3);
    let bg = Matrix::new(2, 3, vec![0.0, 0.5, -0.5, 1.0, -1.0, 0.2]).unwrap();
    let one = Matrix::new(1, 3, vec![0.3, 1.1, -0.8]).unwrap();
    let g = global_shap(&f, &one, &bg, 64, 0).unwrap();
    let sv = shapley_exact(&f, one.row(0), &bg).unwrap();
    let c = if sv.full[0] >= sv.full[1] { 0 } else { 1 };
    for i in 0..3 {
        assert_eq!(g.gfi[i], sv.phi.get(i, c).abs());
        assert_eq!(g.mean_phi[i], sv.phi.get(i, c));
    }
    let twice = Matrix::new(2, 3, [one.values.clone(), one.values.clone()].concat()).unwrap();
    let g2 = global_shap(&f, &twice, &bg, 64, 0).unwrap();
    for (a, b) in g.gfi.iter().zip(&g2.gfi) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn informative_features_dominate_global_shap() {
    let s = synth_highdim(300, 8, 2, 2, 0.3, 5).unwrap();
    let d = &s.dataset;
    let model = fit_surrogate(&d.features, &d.labels, 2, &SurrogateConfig::new(SurrogateKind::Dt, 5)).unwrap();
    let bg = d.features.select_rows(&(0..16).collect::<Vec<_>>());
    let rows = d.features.select_rows(&(100..140).collect::<Vec<_>>());
    let g = global_shap(&model, &rows, &bg, 64, 1).unwrap();
    let inf: f64 = s.informative.iter().map(|&i| g.gfi[i]).sum();
    let total: f64 = g.gfi.iter().sum();
    assert!(inf > 0.5 * total, "informative share {}", inf / total);
}

#[test]
fn stacking_identical_models_changes_nothing() {
    let s = synth_highdim(120, 4, 2, 2, 0.5, 9).unwrap();
    let d = &s.dataset;
    let dt = fit_surrogate(&d.features, &d.labels, 2, &SurrogateConfig::new(SurrogateKind::Dt, 1)).unwrap();
    let bg = d.features.select_rows(&[0, 1, 2, 3]);
    let rows = d.features.select_rows(&[10, 20, 30]);
    let single = global_shap(&dt, &rows, &bg, 64, 0).unwrap();
    let stacked = stacked_shap(&[dt.clone(), dt.clone(), dt], &rows, &bg, 64, 0).unwrap();
    for (a, b) in single.gfi.iter().zip(&stacked.gfi) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn stacking_with_an_inert_model_divides_by_three() {
    let s = synth_highdim(120, 4, 2, 2, 0.5, 9).unwrap();
    let d = &s.dataset;
    let bg = d.features.select_rows(&[0, 1, 2, 3]);
    let rows = d.features.select_rows(&[10, 20, 30]);
    let cfg = |kind, seed| SurrogateConfig { n_trees: 5, ..SurrogateConfig::new(kind, seed) };
    let a = fit_surrogate(&d.features, &d.labels, 2, &cfg(SurrogateKind::Rf, 1)).unwrap();
    let b = fit_surrogate(&d.features, &d.labels, 2, &cfg(SurrogateKind::Ert, 2)).unwrap();
    let flat: Vec<usize> = vec![0; d.n_rows()];
    let inert = fit_surrogate(&d.features, &flat, 2, &cfg(SurrogateKind::Rf, 3)).unwrap();
    let ga = global_shap(&a, &rows, &bg, 64, 0).unwrap();
    let gb = global_shap(&b, &rows, &bg, 64, 0).unwrap();
    let stacked = stacked_shap(&[a, b, inert], &rows, &bg, 64, 0).unwrap();
    for i in 0..4 {
        assert!((stacked.gfi[i] - (ga.gfi[i] + gb.gfi[i]) / 3.0).abs() < 1e-15);
    }
}
