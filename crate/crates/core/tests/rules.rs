use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xai_core::attribution::shapley_exact;
use xai_core::data::{synth_highdim, Matrix};
use xai_core::rules::{
    assemble_decision_list, counterfactual, explain_instance, extract_model_rules, extract_rules, filter_rules,
    list_confidence, list_fidelity, score_rule, whatif_remove_feature, Condition, CounterfactualConfig, DecisionList,
    ExplainConfig, Rule, RuleSource, RuleThresholds, ShapMethod,
};
use xai_core::surrogate::{
    assemble, fit_surrogate, fit_tree, LeafData, SurrogateConfig, SurrogateKind, SurrogateModel, Tree, TreeConfig,
    TreeNode,
};
use xai_core::{Classifier, Error, FnClassifier};

fn random_xy(seed: u64, n: usize, k: usize, c: usize) -> (Matrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Matrix::new(n, k, (0..n * k).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
    // labels follow a noisy axis-aligned pattern so trees have structure
    let y = (0..n)
        .map(|i| {
            let r = x.row(i);
            if rng.gen_bool(0.1) {
                rng.gen_range(0..c)
            } else {
                ((r[0] > 0.0) as usize + (r[k - 1] > 0.5) as usize) % c
            }
        })
        .collect();
    (x, y)
}

fn dt(x: &Matrix, y: &[usize], c: usize, depth: Option<usize>) -> SurrogateModel {
    let cfg = SurrogateConfig {
        tree: TreeConfig { max_depth: depth, ..TreeConfig::decision_tree() },
        ..SurrogateConfig::new(SurrogateKind::Dt, 0)
    };
    fit_surrogate(x, y, c, &cfg).unwrap()
}

fn scored(rules: &[Rule], x: &Matrix, y: &[usize]) -> Vec<Rule> {
    rules.iter().map(|r| score_rule(r, x, y)).collect()
}

fn rule(conditions: Vec<Condition>, class: usize, c: usize) -> Rule {
    let mut consequent = vec![0.0; c];
    consequent[class] = 1.0;
    Rule { conditions, consequent, class, support: 0.0, confidence: 0.0, coverage: 0, source: RuleSource { tree: 0, leaf: 0 } }
}

fn below(feature: usize, t: f64) -> Condition {
    Condition { feature, lower: None, upper: Some(t) }
}

fn above(feature: usize, t: f64) -> Condition {
    Condition { feature, lower: Some(t), upper: None }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tree_rules_are_exclusive_and_exhaustive(seed in any::<u64>(), max_len in prop::option::of(0usize..4)) {
        let (x, y) = random_xy(seed, 80, 3, 3);
        let cfg = SurrogateConfig { n_trees: 1, ..SurrogateConfig::new(SurrogateKind::Ert, seed) };
        let model = fit_surrogate(&x, &y, 3, &cfg).unwrap();
        let rules = extract_rules(&model.trees[0], 0, max_len);
        for r in &rules {
            prop_assert!((r.consequent.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            for (a, c) in r.conditions.iter().enumerate() {
                prop_assert!(r.conditions[a + 1..].iter().all(|d| d.feature != c.feature));
                if let (Some(l), Some(u)) = (c.lower, c.upper) {
                    prop_assert!(l < u);
                }
            }
            if let Some(m) = max_len {
                prop_assert!(r.len() <= m);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..500 {
            let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            prop_assert_eq!(rules.iter().filter(|r| r.covers(&p)).count(), 1);
        }
        for row in x.iter_rows() {
            prop_assert_eq!(rules.iter().filter(|r| r.covers(row)).count(), 1);
        }
    }

    #[test]
    fn filtering_is_a_monotone_subset(
        seed in any::<u64>(),
        t in (0.0f64..0.3, 0.0f64..1.0, 0usize..10),
        bump in (0.0f64..0.2, 0.0f64..0.3, 0usize..5),
    ) {
        let (x, y) = random_xy(seed, 60, 3, 2);
        let cfg = SurrogateConfig { n_trees: 4, ..SurrogateConfig::new(SurrogateKind::Rf, seed) };
        let rules = scored(&extract_model_rules(&fit_surrogate(&x, &y, 2, &cfg).unwrap(), None), &x, &y);
        let lo = RuleThresholds { min_support: t.0, min_confidence: t.1, min_coverage: t.2 };
        let hi = RuleThresholds {
            min_support: t.0 + bump.0,
            min_confidence: t.1 + bump.1,
            min_coverage: t.2 + bump.2,
        };
        let a = filter_rules(&rules, &lo);
        let b = filter_rules(&rules, &hi);
        let oracle: Vec<Rule> = rules
            .iter()
            .filter(|r| r.support >= lo.min_support && r.confidence >= lo.min_confidence && r.coverage >= lo.min_coverage)
            .cloned()
            .collect();
        prop_assert_eq!(&a, &oracle);
        prop_assert!(b.iter().all(|r| a.contains(r)));
        prop_assert!(b.len() <= a.len());
    }

    #[test]
    fn single_tree_list_is_fully_faithful(seed in any::<u64>(), depth in prop::option::of(1usize..6)) {
        let (x, y) = random_xy(seed, 70, 3, 3);
        let model = dt(&x, &y, 3, depth);
        let reference = model.predict(&x);
        let rules = scored(&extract_model_rules(&model, None), &x, &y);
        let list = assemble_decision_list(&rules, &x, &y, 3, &RuleThresholds::NONE).unwrap();
        prop_assert_eq!(list_fidelity(&list, &x, &reference), 1.0);
    }

    #[test]
    fn counterfactuals_really_flip_the_prediction(seed in any::<u64>()) {
        let (x, y) = random_xy(seed, 60, 3, 2);
        let model = dt(&x, &y, 2, Some(4));
        let rules = scored(&extract_model_rules(&model, None), &x, &y);
        let list = assemble_decision_list(&rules, &x, &y, 2, &RuleThresholds::NONE).unwrap();
        let cfg = CounterfactualConfig { budget: 2000, ..CounterfactualConfig::default() };
        for i in [0, 17, 33] {
            let row = x.row(i);
            if let Ok(cfs) = counterfactual(&model, row, &list.boundaries(), &x, &cfg) {
                let original = model.predict_row(row);
                for c in &cfs {
                    prop_assert_ne!(model.predict_row(&c.point), original);
                    prop_assert_eq!(c.class, model.predict_row(&c.point));
                    prop_assert!(c.touched <= 3 && c.touched == c.changes.len());
                }
            }
        }
    }
}

#[test]
fn extraction_examples() {
    let leaf = TreeNode::Leaf { leaf: LeafData { dist: vec![0.25, 0.75], n: 4 } };
    let tree = Tree { n_features: 1, n_classes: 2, root: leaf.clone() };
    let rules = extract_rules(&tree, 0, None);
    assert_eq!(rules.len(), 1);
    assert!(rules[0].conditions.is_empty());
    assert_eq!((rules[0].consequent.clone(), rules[0].class), (vec![0.25, 0.75], 1));

    let split = |feature, threshold, left, right| TreeNode::Split {
        feature,
        threshold,
        n: 4,
        dist: vec![0.5, 0.5],
        left: Box::new(left),
        right: Box::new(right),
    };
    let stump = Tree { n_features: 1, n_classes: 2, root: split(0, 2.5, leaf.clone(), leaf.clone()) };
    let r = extract_rules(&stump, 0, None);
    assert_eq!(r[0].conditions, vec![below(0, 2.5)]);
    assert_eq!(r[1].conditions, vec![above(0, 2.5)]);

    let nested = Tree {
        n_features: 1,
        n_classes: 2,
        root: split(0, 5.0, split(0, 2.0, leaf.clone(), leaf.clone()), leaf),
    };
    let r = extract_rules(&nested, 0, None);
    assert_eq!(r[0].conditions, vec![below(0, 2.0)]);
    assert_eq!(r[1].conditions, vec![Condition { feature: 0, lower: Some(2.0), upper: Some(5.0) }]);
}

#[test]
fn scoring_examples() {
    let x = Matrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    let y = [1, 1, 0, 1];
    let all = score_rule(&rule(vec![], 1, 2), &x, &y);
    assert_eq!((all.support, all.coverage, all.confidence), (1.0, 4, 0.75));
    let half = score_rule(&rule(vec![below(0, 1.5)], 1, 2), &x, &y);
    assert_eq!((half.support, half.confidence), (0.5, 1.0));
    let none = score_rule(&rule(vec![above(0, 9.0)], 1, 2), &x, &y);
    assert_eq!((none.support, none.confidence, none.coverage), (0.0, 0.0, 0));
}

#[test]
fn filter_examples() {
    let (x, y) = random_xy(3, 50, 2, 2);
    let rules = scored(&extract_model_rules(&dt(&x, &y, 2, Some(3)), None), &x, &y);
    assert_eq!(filter_rules(&rules, &RuleThresholds::NONE), rules);
    let impossible = RuleThresholds { min_confidence: 1.01, ..RuleThresholds::NONE };
    assert!(filter_rules(&rules, &impossible).is_empty());
}

#[test]
fn list_assembly_examples() {
    let x = Matrix::new(6, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    let everything = rule(vec![], 0, 2);
    let list = assemble_decision_list(&[everything.clone()], &x, &[0; 6], 2, &RuleThresholds::NONE).unwrap();
    assert_eq!(list.rules.len(), 1);
    assert_eq!(list.rules[0].conditions, everything.conditions);

    // the larger perfect rule wins the support tie-break
    let small = rule(vec![below(0, 2.5)], 0, 2);
    let large = rule(vec![above(0, 2.5)], 1, 2);
    let x7 = Matrix::new(7, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let y7 = [0, 0, 0, 1, 1, 1, 1];
    let list = assemble_decision_list(&[small, large], &x7, &y7, 2, &RuleThresholds::NONE).unwrap();
    assert_eq!(list.rules.iter().map(|r| r.class).collect::<Vec<_>>(), vec![1, 0]);
    assert_eq!(list.predict(&x7), y7.to_vec());

    // nothing admissible: default-only list predicting the majority
    let strict = RuleThresholds { min_coverage: 100, ..RuleThresholds::NONE };
    let list = assemble_decision_list(&[rule(vec![], 0, 2)], &x, &[1, 1, 1, 1, 0, 0], 2, &strict).unwrap();
    assert!(list.is_default_only());
    assert_eq!(list.default_class, 1);
}

#[test]
fn fidelity_and_confidence_counts() {
    let list = DecisionList {
        rules: vec![Rule { confidence: 0.8, ..rule(vec![below(0, 5.0)], 1, 2) }],
        default_class: 0,
        thresholds: RuleThresholds::NONE,
        n_features: 1,
        n_classes: 2,
    };
    let x = Matrix::new(10, 1, (0..10).map(|i| i as f64).collect()).unwrap();
    let mut reference = vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
    assert_eq!(list_fidelity(&list, &x, &reference), 1.0);
    reference[9] = 1;
    assert!((list_fidelity(&list, &x, &reference) - 0.9).abs() < 1e-15);
    // five rows at 0.8 plus default hits on rows 5..10 where 3 labels are 0
    let y = [1, 1, 1, 1, 1, 0, 0, 0, 1, 1];
    assert!((list_confidence(&list, &x, &y) - (5.0 * 0.8 + 3.0) / 10.0).abs() < 1e-15);
}

fn best_ordering_fidelity(rules: &[Rule], x: &Matrix, y: &[usize], reference: &[usize]) -> f64 {
    let idx: Vec<usize> = (0..rules.len()).collect();
    let mut orders: Vec<Vec<usize>> = vec![vec![]];
    for len in 1..=rules.len() {
        let mut next = Vec::new();
        for o in orders.iter().filter(|o| o.len() == len - 1) {
            for &i in &idx {
                if !o.contains(&i) {
                    let mut p = o.clone();
                    p.push(i);
                    next.push(p);
                }
            }
        }
        orders.extend(next);
    }
    let mut best: f64 = 0.0;
    for o in orders {
        let chosen: Vec<Rule> = o.iter().map(|&i| rules[i].clone()).collect();
        let covered = |row: &[f64]| chosen.iter().any(|r| r.covers(row));
        let mut counts = [0usize; 2];
        for (row, &label) in x.iter_rows().zip(y) {
            if !covered(row) {
                counts[label] += 1;
            }
        }
        let default_class = if counts[1] > counts[0] { 1 } else { 0 };
        let list = DecisionList {
            rules: chosen,
            default_class,
            thresholds: RuleThresholds::NONE,
            n_features: x.cols,
            n_classes: 2,
        };
        best = best.max(list_fidelity(&list, x, reference));
    }
    best
}

#[test]
fn greedy_list_is_close_to_the_best_ordering() {
    for seed in 0..8 {
        let (x, y) = random_xy(seed, 20, 2, 2);
        let cfg = SurrogateConfig { n_trees: 3, ..SurrogateConfig::new(SurrogateKind::Rf, seed) };
        let forest = fit_surrogate(&x, &y, 2, &cfg).unwrap();
        let reference = forest.predict(&x);
        // the list mimics the forest, so it is assembled on the forest's labels
        let mut rules = scored(&extract_model_rules(&forest, Some(1)), &x, &reference);
        rules.sort_by(|a, b| b.coverage.cmp(&a.coverage));
        rules.truncate(3);
        let t = RuleThresholds { min_coverage: 1, ..RuleThresholds::default() };
        let list = assemble_decision_list(&rules, &x, &reference, 2, &t).unwrap();
        let greedy = list_fidelity(&list, &x, &reference);
        let best = best_ordering_fidelity(&rules, &x, &reference, &reference);
        assert!(greedy >= best - 0.05 - 1e-12, "seed {seed}: greedy {greedy} vs best {best}");
    }
}

fn grid_oracle(model: &impl Classifier, x: &[f64], lo: f64, hi: f64, step: f64, scales: &[f64]) -> f64 {
    let original = model.predict_row(x);
    let n = ((hi - lo) / step) as usize;
    let mut best = f64::INFINITY;
    for a in 0..=n {
        for b in 0..=n {
            let p = [lo + a as f64 * step, lo + b as f64 * step];
            if model.predict_row(&p[..x.len()]) != original {
                let cost: f64 = (0..x.len()).map(|j| (p[j] - x[j]).abs() / scales[j]).sum();
                best = best.min(cost);
            }
            if x.len() == 1 {
                break;
            }
        }
    }
    best
}

#[test]
fn one_dimensional_threshold_matches_grid_search() {
    let model = FnClassifier::new(1, 2, |x: &[f64]| if x[0] > 0.5 { vec![0.0, 1.0] } else { vec![1.0, 0.0] });
    let bg = Matrix::new(5, 1, vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
    let cfs = counterfactual(&model, &[0.4], &[vec![0.5]], &bg, &CounterfactualConfig::default()).unwrap();
    let step = 1e-3;
    let oracle_point = 0.4 + grid_oracle(&model, &[0.4], 0.0, 1.0, step, &[1.0]);
    let best = &cfs[0];
    assert_eq!((best.original_class, best.class, best.touched), (0, 1, 1));
    assert!(best.point[0] > 0.5);
    assert!((best.point[0] - oracle_point).abs() <= step);
}

#[test]
fn or_model_offers_two_equal_cost_alternatives() {
    let model = FnClassifier::new(2, 2, |x: &[f64]| {
        if x[0] > 1.0 || x[1] > 1.0 { vec![0.0, 1.0] } else { vec![1.0, 0.0] }
    });
    let bg = Matrix::new(4, 2, vec![0.0, 0.0, 2.0, 2.0, 0.0, 2.0, 2.0, 0.0]).unwrap();
    let cfs = counterfactual(&model, &[0.0, 0.0], &[vec![1.0], vec![1.0]], &bg, &CounterfactualConfig::default())
        .unwrap();
    assert!(cfs.len() >= 2);
    assert_eq!((cfs[0].touched, cfs[1].touched), (1, 1));
    assert_ne!(cfs[0].changes[0].feature, cfs[1].changes[0].feature);
    assert!((cfs[0].cost - cfs[1].cost).abs() < 1e-12);
}

#[test]
fn two_feature_toy_is_near_the_grid_optimum() {
    // an oblique boundary, so no tree threshold gives the answer directly
    let model = FnClassifier::new(2, 2, |x: &[f64]| if x[0] + 2.0 * x[1] > 3.0 { vec![0.0, 1.0] } else { vec![1.0, 0.0] });
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bg = Matrix::new(64, 2, (0..128).map(|_| rng.gen_range(-1.0..3.0)).collect()).unwrap();
    let x = [0.2, 0.1];
    let scales = xai_core::rules::cost_scales(&bg);
    let cfs = counterfactual(&model, &x, &[vec![], vec![]], &bg, &CounterfactualConfig::default()).unwrap();
    let oracle = grid_oracle(&model, &x, -1.0, 3.0, 2e-3, &scales);
    assert!(cfs[0].cost <= oracle * 1.05, "found {} vs grid {oracle}", cfs[0].cost);
}

#[test]
fn target_already_met_gives_an_empty_change() {
    let model = FnClassifier::new(1, 2, |x: &[f64]| if x[0] > 0.5 { vec![0.0, 1.0] } else { vec![1.0, 0.0] });
    let bg = Matrix::new(2, 1, vec![0.0, 1.0]).unwrap();
    let cfg = CounterfactualConfig { target: Some(1), ..CounterfactualConfig::default() };
    let cf = counterfactual(&model, &[0.9], &[vec![0.5]], &bg, &cfg).unwrap();
    assert_eq!((cf[0].cost, cf[0].touched), (0.0, 0));
    let stuck = FnClassifier::new(1, 2, |_: &[f64]| vec![1.0, 0.0]);
    assert!(matches!(
        counterfactual(&stuck, &[0.9], &[vec![0.5]], &bg, &CounterfactualConfig::default()),
        Err(Error::NoCounterfactualFound(_))
    ));
}

fn logistic3() -> FnClassifier<impl Fn(&[f64]) -> Vec<f64>> {
    FnClassifier::new(3, 2, |x: &[f64]| {
        let p = 1.0 / (1.0 + libm::exp(-(2.0 * x[0] - 0.7 * x[1] + 0.1 * x[2])));
        vec![1.0 - p, p]
    })
}

#[test]
fn whatif_examples() {
    let bg = Matrix::new(3, 3, vec![0.0, 1.0, 2.0, 1.0, 1.0, -1.0, 2.0, 1.0, 2.0]).unwrap();
    let m = logistic3();
    // feature 1 already at its background mean
    let w = whatif_remove_feature(&m, &[0.4, 1.0, 0.0], 1, &bg).unwrap();
    assert_eq!(w.before, w.after);
    assert!(!w.flipped);

    let only0 = FnClassifier::new(3, 2, |x: &[f64]| {
        let p = 1.0 / (1.0 + libm::exp(-x[0]));
        vec![1.0 - p, p]
    });
    let w = whatif_remove_feature(&only0, &[3.0, -2.0, 5.0], 0, &bg).unwrap();
    assert_eq!(w.replacement, 1.0);
    assert_eq!(w.after, only0.predict_proba_row(&[1.0, 0.0, 0.0]));
    assert!(matches!(whatif_remove_feature(&m, &[0.0; 3], 3, &bg), Err(Error::InvalidFeature { .. })));
}

#[test]
fn removing_the_top_contributor_moves_the_prediction_most() {
    let m = logistic3();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let bg = Matrix::new(16, 3, (0..48).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let c = m.predict_row(&x);
        let phi = shapley_exact(&m, &x, &bg).unwrap().for_output(c);
        let top = (0..3).max_by(|&a, &b| phi[a].abs().total_cmp(&phi[b].abs())).unwrap();
        let least = (0..3).min_by(|&a, &b| phi[a].abs().total_cmp(&phi[b].abs())).unwrap();
        let shift = |f| {
            let w = whatif_remove_feature(&m, &x, f, &bg).unwrap();
            (w.after[c] - w.before[c]).abs()
        };
        assert!(shift(top) >= shift(least), "x {x:?}");
    }
}

#[test]
fn local_explanations_are_complete_and_deterministic() {
    let s = synth_highdim(300, 5, 3, 3, 0.4, 12).unwrap();
    let d = &s.dataset;
    let surrogate = fit_surrogate(&d.features, &d.labels, 3, &SurrogateConfig::new(SurrogateKind::Dt, 1)).unwrap();
    let rules = scored(&extract_model_rules(&surrogate, None), &d.features, &d.labels);
    let list = assemble_decision_list(&rules, &d.features, &d.labels, 3, &RuleThresholds::default()).unwrap();
    let bg = d.features.select_rows(&(0..24).collect::<Vec<_>>());
    let names: Vec<String> = d.feature_names.clone();
    let classes: Vec<String> = d.class_names.clone();
    let bb = FnClassifier::new(5, 3, |_: &[f64]| vec![0.2, 0.5, 0.3]);
    let cfg = ExplainConfig::default();
    for i in [3, 50, 120] {
        let x = d.features.row(i);
        let e = explain_instance(&surrogate, &list, Some(&bb), x, &bg, (&names, &classes), &cfg).unwrap();
        assert_eq!(e.method, ShapMethod::Exact);
        assert_eq!(e.class, surrogate.predict_row(x));
        let total: f64 = e.contributions.iter().sum();
        assert!((total + e.base_value - e.probability).abs() <= 1e-9);
        assert_eq!(e.whatif.len(), 5);
        assert_eq!(e.blackbox_class, Some(1));
        assert!(!e.rule.is_empty());
        if let Some(r) = e.rule_index {
            if list.rules[r].confidence == 1.0 {
                assert_eq!(list.rules[r].class, e.class);
            }
        }
        for c in &e.counterfactuals {
            assert_ne!(surrogate.predict_row(&c.point), e.class);
            assert_eq!(c.recheck_class, Some(1));
        }
        assert_eq!(e, explain_instance(&surrogate, &list, Some(&bb), x, &bg, (&names, &classes), &cfg).unwrap());
    }
}

#[test]
fn truncated_rules_still_reproduce_single_tree_majorities() {
    let (x, y) = random_xy(21, 100, 2, 2);
    let model = dt(&x, &y, 2, Some(6));
    let tree = fit_tree(&x, &y, 2, &TreeConfig { max_depth: Some(2), ..TreeConfig::decision_tree() }, 0).unwrap();
    let shallow = assemble(SurrogateKind::Dt, 2, 2, vec![tree]);
    // cutting the deep tree at two splits gives the same partition as growing only two levels
    let cut = extract_model_rules(&model, Some(2));
    let grown = extract_model_rules(&shallow, None);
    assert_eq!(cut.len(), grown.len());
    for (a, b) in cut.iter().zip(&grown) {
        assert_eq!(a.conditions, b.conditions);
        assert_eq!(a.consequent, b.consequent);
    }
}
