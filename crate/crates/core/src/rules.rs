//! Rules mined from surrogate trees, decision lists, counterfactuals,
//! what-if analysis and per-instance explanations.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write;
use serde::{Deserialize, Serialize};

use crate::attribution::{self, MAX_EXACT_FEATURES};
use crate::data::Matrix;
use crate::math;
use crate::metrics;
use crate::model::Classifier;
use crate::surrogate::{SurrogateModel, Tree, TreeNode};
use crate::{Error, Result};

/// `lower <= x[feature] < upper`; a missing bound is unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: usize,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Condition {
    pub fn holds(&self, x: &[f64]) -> bool {
        let v = x[self.feature];
        self.lower.is_none_or(|l| v >= l) && self.upper.is_none_or(|u| v < u)
    }

    pub fn render(&self, names: &[String]) -> String {
        let name = feature_name(names, self.feature);
        match (self.lower, self.upper) {
            (Some(l), Some(u)) => format!("{name} ∈ [{}, {})", num(l), num(u)),
            (Some(l), None) => format!("{name} ≥ {}", num(l)),
            (None, Some(u)) => format!("{name} < {}", num(u)),
            (None, None) => format!("{name} ∈ (-∞, ∞)"),
        }
    }
}

fn num(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        String::from("0")
    } else {
        String::from(s)
    }
}

fn feature_name(names: &[String], i: usize) -> String {
    names.get(i).cloned().unwrap_or_else(|| format!("f{i}"))
}

fn class_name(names: &[String], c: usize) -> String {
    names.get(c).cloned().unwrap_or_else(|| format!("{c}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSource {
    pub tree: usize,
    /// Position of the leaf (or cut node) in left-first order.
    pub leaf: usize,
}

/// A conjunction of per-feature intervals with the class distribution of
/// the tree region it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    /// Sorted by feature, at most one per feature.
    pub conditions: Vec<Condition>,
    pub consequent: Vec<f64>,
    /// Argmax of the consequent.
    pub class: usize,
    /// Covered share of the scoring sample.
    pub support: f64,
    /// Share of covered rows labelled `class`.
    pub confidence: f64,
    /// Covered row count.
    pub coverage: usize,
    pub source: RuleSource,
}

impl Rule {
    pub fn covers(&self, x: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(x))
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    pub fn antecedent(&self, feature_names: &[String]) -> String {
        if self.conditions.is_empty() {
            return String::from("TRUE");
        }
        self.conditions
            .iter()
            .map(|c| c.render(feature_names))
            .collect::<Vec<_>>()
            .join(" AND ")
    }

    pub fn render(&self, feature_names: &[String], class_names: &[String]) -> String {
        format!(
            "IF {} THEN class={} (conf {:.2}, supp {:.2})",
            self.antecedent(feature_names),
            class_name(class_names, self.class),
            self.confidence,
            self.support
        )
    }
}

/// Path constraints `(feature, threshold, went_left)` merged into intervals.
fn merge_path(path: &[(usize, f64, bool)]) -> Vec<Condition> {
    let mut conds: Vec<Condition> = Vec::new();
    for &(feature, t, left) in path {
        let pos = match conds.iter().position(|c| c.feature == feature) {
            Some(p) => p,
            None => {
                conds.push(Condition {
                    feature,
                    lower: None,
                    upper: None,
                });
                conds.len() - 1
            }
        };
        let c = &mut conds[pos];
        if left {
            c.upper = Some(c.upper.map_or(t, |u| u.min(t)));
        } else {
            c.lower = Some(c.lower.map_or(t, |l| l.max(t)));
        }
    }
    conds.sort_by_key(|c| c.feature);
    conds
}

struct Walker {
    tree: usize,
    max_len: usize,
    next_leaf: usize,
    out: Vec<Rule>,
}

impl Walker {
    fn emit(&mut self, dist: &[f64], path: &[(usize, f64, bool)]) {
        let class = math::argmax(dist);
        self.out.push(Rule {
            conditions: merge_path(path),
            consequent: dist.to_vec(),
            class,
            support: 0.0,
            confidence: 0.0,
            coverage: 0,
            source: RuleSource {
                tree: self.tree,
                leaf: self.next_leaf,
            },
        });
        self.next_leaf += 1;
    }

    fn walk(&mut self, node: &TreeNode, path: &mut Vec<(usize, f64, bool)>) {
        match node {
            TreeNode::Split {
                feature,
                threshold,
                dist,
                left,
                right,
                ..
            } => {
                if path.len() >= self.max_len {
                    self.emit(dist, path);
                    return;
                }
                path.push((*feature, *threshold, true));
                self.walk(left, path);
                path.pop();
                path.push((*feature, *threshold, false));
                self.walk(right, path);
                path.pop();
            }
            TreeNode::Leaf { leaf } => self.emit(&leaf.dist, path),
        }
    }
}

/// One rule per leaf of `tree`. With `max_len`, paths are cut after that
/// many splits and the node reached stands in for its subtree, so the
/// rules of one tree still partition the input space.
pub fn extract_rules(tree: &Tree, tree_id: usize, max_len: Option<usize>) -> Vec<Rule> {
    let mut w = Walker {
        tree: tree_id,
        max_len: max_len.unwrap_or(usize::MAX),
        next_leaf: 0,
        out: Vec::new(),
    };
    w.walk(&tree.root, &mut Vec::new());
    w.out
}

/// Rules of every tree of a surrogate, in tree order.
pub fn extract_model_rules(model: &SurrogateModel, max_len: Option<usize>) -> Vec<Rule> {
    model
        .trees
        .iter()
        .enumerate()
        .flat_map(|(i, t)| extract_rules(t, i, max_len))
        .collect()
}

/// Fills support, confidence and coverage from a labelled sample.
pub fn score_rule(rule: &Rule, x: &Matrix, y: &[usize]) -> Rule {
    let mut covered = 0;
    let mut hits = 0;
    for (row, &label) in x.iter_rows().zip(y) {
        if rule.covers(row) {
            covered += 1;
            if label == rule.class {
                hits += 1;
            }
        }
    }
    Rule {
        support: if x.rows == 0 { 0.0 } else { covered as f64 / x.rows as f64 },
        confidence: if covered == 0 { 0.0 } else { hits as f64 / covered as f64 },
        coverage: covered,
        ..rule.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleThresholds {
    pub min_support: f64,
    pub min_confidence: f64,
    pub min_coverage: usize,
}

impl Default for RuleThresholds {
    fn default() -> Self {
        RuleThresholds {
            min_support: 0.01,
            min_confidence: 0.6,
            min_coverage: 5,
        }
    }
}

impl RuleThresholds {
    pub const NONE: RuleThresholds = RuleThresholds {
        min_support: 0.0,
        min_confidence: 0.0,
        min_coverage: 0,
    };

    fn admits(&self, support: f64, confidence: f64, coverage: usize) -> bool {
        support >= self.min_support && confidence >= self.min_confidence && coverage >= self.min_coverage
    }
}

/// Scored rules meeting every threshold, in their original order.
pub fn filter_rules(rules: &[Rule], t: &RuleThresholds) -> Vec<Rule> {
    rules
        .iter()
        .filter(|r| t.admits(r.support, r.confidence, r.coverage))
        .cloned()
        .collect()
}

/// Ordered rules; the first rule covering a row decides, otherwise the
/// default class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionList {
    /// Metrics are those on the rows still uncovered when the rule was chosen.
    pub rules: Vec<Rule>,
    pub default_class: usize,
    pub thresholds: RuleThresholds,
    pub n_features: usize,
    pub n_classes: usize,
}

impl DecisionList {
    /// Index of the first covering rule, `None` for the default.
    pub fn fire(&self, x: &[f64]) -> Option<usize> {
        self.rules.iter().position(|r| r.covers(x))
    }

    pub fn is_default_only(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn render(&self, feature_names: &[String], class_names: &[String]) -> String {
        let mut s = String::new();
        for (i, r) in self.rules.iter().enumerate() {
            let _ = writeln!(s, "{:>3}. {}", i + 1, r.render(feature_names, class_names));
        }
        let _ = writeln!(
            s,
            "{:>3}. ELSE class={}",
            self.rules.len() + 1,
            class_name(class_names, self.default_class)
        );
        s
    }

    /// Every interval bound used by the list, per feature, sorted.
    pub fn boundaries(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.n_features];
        for r in &self.rules {
            for c in &r.conditions {
                out[c.feature].extend(c.lower);
                out[c.feature].extend(c.upper);
            }
        }
        for v in &mut out {
            v.sort_by(|a, b| a.total_cmp(b));
            v.dedup();
        }
        out
    }
}

impl Classifier for DecisionList {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        let c = self.fire(x).map_or(self.default_class, |i| self.rules[i].class);
        let mut p = vec![0.0; self.n_classes];
        p[c] = 1.0;
        p
    }
}

fn majority(counts: &[usize]) -> usize {
    (0..counts.len())
        .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
        .unwrap_or(0)
}

/// Greedy sequential covering. Each round scores every unused rule on the
/// rows not yet covered (support relative to all rows), keeps those that
/// meet the thresholds, and appends the best by confidence, then support,
/// then fewer conditions, then input order. Covered rows are removed. The
/// default class is the majority of what remains (of everything if nothing
/// remains). No admissible rule gives a default-only list.
pub fn assemble_decision_list(
    rules: &[Rule],
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    thresholds: &RuleThresholds,
) -> Result<DecisionList> {
    if x.rows == 0 {
        return Err(Error::EmptySample);
    }
    if y.len() != x.rows {
        return Err(Error::shape(&[x.rows], &[y.len()]));
    }
    let n = x.rows as f64;
    let covered: Vec<Vec<usize>> = rules
        .iter()
        .map(|r| (0..x.rows).filter(|&i| r.covers(x.row(i))).collect())
        .collect();
    let mut remaining = vec![true; x.rows];
    let mut left = x.rows;
    let mut used = vec![false; rules.len()];
    let mut chosen: Vec<Rule> = Vec::new();
    while left > 0 {
        let mut best: Option<(usize, f64, usize)> = None;
        for (i, rows) in covered.iter().enumerate() {
            if used[i] {
                continue;
            }
            let (mut cnt, mut hits) = (0usize, 0usize);
            for &r in rows {
                if remaining[r] {
                    cnt += 1;
                    if y[r] == rules[i].class {
                        hits += 1;
                    }
                }
            }
            if cnt == 0 {
                continue;
            }
            let conf = hits as f64 / cnt as f64;
            if !thresholds.admits(cnt as f64 / n, conf, cnt) {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, bc, bn)) => {
                    conf > bc || (conf == bc && (cnt > bn || (cnt == bn && rules[i].len() < rules[b].len())))
                }
            };
            if better {
                best = Some((i, conf, cnt));
            }
        }
        let Some((i, conf, cnt)) = best else { break };
        used[i] = true;
        for &r in &covered[i] {
            if remaining[r] {
                remaining[r] = false;
                left -= 1;
            }
        }
        chosen.push(Rule {
            support: cnt as f64 / n,
            confidence: conf,
            coverage: cnt,
            ..rules[i].clone()
        });
    }
    let mut counts = vec![0usize; n_classes];
    for (&rem, &label) in remaining.iter().zip(y) {
        if rem || left == 0 {
            counts[label] += 1;
        }
    }
    Ok(DecisionList {
        rules: chosen,
        default_class: majority(&counts),
        thresholds: *thresholds,
        n_features: x.cols,
        n_classes,
    })
}

/// Share of rows where the list's first-match prediction equals the
/// reference prediction (normally the surrogate's).
pub fn list_fidelity(list: &DecisionList, x: &Matrix, reference: &[usize]) -> f64 {
    metrics::accuracy(reference, &list.predict(x))
}

/// Coverage-weighted mean confidence of the rules that fire on `x`; rows
/// reaching the default count with the default's accuracy on `(x, y)`.
pub fn list_confidence(list: &DecisionList, x: &Matrix, y: &[usize]) -> f64 {
    if x.rows == 0 {
        return 0.0;
    }
    let (mut total, mut default_hits) = (0.0, 0usize);
    for (row, &label) in x.iter_rows().zip(y) {
        match list.fire(row) {
            Some(i) => total += list.rules[i].confidence,
            None => {
                if label == list.default_class {
                    default_hits += 1;
                }
            }
        }
    }
    (total + default_hits as f64) / x.rows as f64
}

/// Sorted distinct split thresholds per feature over all trees.
pub fn split_thresholds(model: &SurrogateModel) -> Vec<Vec<f64>> {
    fn collect(node: &TreeNode, out: &mut [Vec<f64>]) {
        if let TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } = node
        {
            out[*feature].push(*threshold);
            collect(left, out);
            collect(right, out);
        }
    }
    let mut out = vec![Vec::new(); model.n_features];
    for t in &model.trees {
        collect(&t.root, &mut out);
    }
    for v in &mut out {
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualConfig {
    /// `None`: any class other than the current prediction.
    pub target: Option<usize>,
    pub max_changes: usize,
    pub max_results: usize,
    /// Candidate move sets evaluated before giving up.
    pub budget: usize,
    /// Per-feature cap on boundary candidates (evenly thinned).
    pub max_boundaries: usize,
    pub quantiles: usize,
    pub bisection_steps: usize,
}

impl Default for CounterfactualConfig {
    fn default() -> Self {
        CounterfactualConfig {
            target: None,
            max_changes: 3,
            max_results: 3,
            budget: 20_000,
            max_boundaries: 32,
            quantiles: 19,
            bisection_steps: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Change {
    pub feature: usize,
    pub from: f64,
    pub to: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub changes: Vec<Change>,
    pub point: Vec<f64>,
    pub original_class: usize,
    pub class: usize,
    /// `sum |delta_i| / sigma_i` over changed features.
    pub cost: f64,
    pub touched: usize,
    /// Class a second model (normally the black box) gives the point.
    pub recheck_class: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Move {
    feature: usize,
    value: f64,
    cost: f64,
}

#[derive(Debug, PartialEq)]
struct Node {
    cost: f64,
    set: Vec<usize>,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, then on the index sequence for determinism
        other.cost.total_cmp(&self.cost).then_with(|| other.set.cmp(&self.set))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn thin(v: &[f64], cap: usize) -> Vec<f64> {
    if v.len() <= cap || cap < 2 {
        return v.to_vec();
    }
    (0..cap).map(|i| v[i * (v.len() - 1) / (cap - 1)]).collect()
}

fn quantiles(mut col: Vec<f64>, q: usize) -> Vec<f64> {
    col.sort_by(|a, b| a.total_cmp(b));
    if col.is_empty() {
        return Vec::new();
    }
    (1..=q).map(|i| col[i * (col.len() - 1) / (q + 1)]).collect()
}

/// Largest double strictly below `v`.
fn next_down(v: f64) -> f64 {
    libm::nextafter(v, f64::NEG_INFINITY)
}

/// Per-feature scale used for counterfactual costs: the background standard
/// deviation, or 1 for a constant column.
pub fn cost_scales(background: &Matrix) -> Vec<f64> {
    (0..background.cols)
        .map(|j| {
            let s = math::std_dev(&background.column(j));
            if s > 0.0 { s } else { 1.0 }
        })
        .collect()
}

/// Low-cost changes that move the model's prediction for `x` to the target
/// class. Candidate values per feature are the given interval boundaries,
/// the largest value just below each, and background quantiles. Every
/// single move is tried, then larger move sets (at most one move per
/// feature) in nondecreasing total cost; supersets of a found solution are
/// skipped. Each solution is then pulled
/// towards `x` by bisection on every changed feature and re-checked.
pub fn counterfactual(
    model: &impl Classifier,
    x: &[f64],
    boundaries: &[Vec<f64>],
    background: &Matrix,
    cfg: &CounterfactualConfig,
) -> Result<Vec<Counterfactual>> {
    let k = x.len();
    if k != model.n_features() || boundaries.len() != k || background.cols != k {
        return Err(Error::shape(&[model.n_features()], &[k]));
    }
    if cfg.max_changes == 0 {
        return Err(Error::InvalidConfig("counterfactual search needs max_changes >= 1".into()));
    }
    let original = model.predict_row(x);
    if cfg.target == Some(original) {
        return Ok(vec![Counterfactual {
            changes: Vec::new(),
            point: x.to_vec(),
            original_class: original,
            class: original,
            cost: 0.0,
            touched: 0,
            recheck_class: None,
        }]);
    }
    let valid = |c: usize| match cfg.target {
        Some(t) => c == t,
        None => c != original,
    };
    let sigma = cost_scales(background);
    let mut moves: Vec<Move> = Vec::new();
    for j in 0..k {
        let mut vals: Vec<f64> = Vec::new();
        for &b in &thin(&boundaries[j], cfg.max_boundaries) {
            vals.push(b);
            vals.push(next_down(b));
        }
        vals.extend(quantiles(background.column(j), cfg.quantiles));
        vals.sort_by(|a, b| a.total_cmp(b));
        vals.dedup();
        for v in vals {
            if v != x[j] && v.is_finite() {
                moves.push(Move {
                    feature: j,
                    value: v,
                    cost: (v - x[j]).abs() / sigma[j],
                });
            }
        }
    }
    moves.sort_by(|a, b| {
        a.cost
            .total_cmp(&b.cost)
            .then(a.feature.cmp(&b.feature))
            .then(a.value.total_cmp(&b.value))
    });
    let mut found: Vec<Vec<usize>> = Vec::new();
    let mut results: Vec<Counterfactual> = Vec::new();
    let mut tried = 0;
    let evaluate = |set: &[usize], found: &mut Vec<Vec<usize>>, results: &mut Vec<Counterfactual>, tried: &mut usize| {
        let mut features: Vec<usize> = set.iter().map(|&i| moves[i].feature).collect();
        features.sort_unstable();
        if found.iter().any(|f| f.iter().all(|g| features.contains(g))) {
            return;
        }
        *tried += 1;
        let mut p = x.to_vec();
        for &i in set {
            p[moves[i].feature] = moves[i].value;
        }
        if !valid(model.predict_row(&p)) {
            return;
        }
        found.push(features);
        let refined = refine(model, x, p, &valid, cfg.bisection_steps);
        let class = model.predict_row(&refined);
        if !valid(class) || results.iter().any(|r| r.point == refined) {
            return;
        }
        let changes: Vec<Change> = (0..k)
            .filter(|&j| refined[j] != x[j])
            .map(|j| Change {
                feature: j,
                from: x[j],
                to: refined[j],
                delta: refined[j] - x[j],
            })
            .collect();
        let cost = changes.iter().map(|c| c.delta.abs() / sigma[c.feature]).sum();
        results.push(Counterfactual {
            touched: changes.len(),
            changes,
            point: refined,
            original_class: original,
            class,
            cost,
            recheck_class: None,
        });
    };
    // Single moves first: there are few of them, and cheap multi-move sets
    // can be numerous enough to exhaust the budget before any single move
    // is reached.
    for i in 0..moves.len() {
        evaluate(&[i], &mut found, &mut results, &mut tried);
    }
    let mut heap = BinaryHeap::new();
    if !moves.is_empty() && cfg.max_changes > 1 {
        heap.push(Node {
            cost: moves[0].cost,
            set: vec![0],
        });
    }
    while let Some(Node { cost, set }) = heap.pop() {
        if results.len() >= cfg.max_results || tried >= cfg.budget {
            break;
        }
        let last = *set.last().unwrap();
        let head = &set[..set.len() - 1];
        let head_ok = head
            .iter()
            .enumerate()
            .all(|(a, &i)| head[a + 1..].iter().all(|&j| moves[i].feature != moves[j].feature));
        // successors: extend with the next move, or swap the last move for it
        if last + 1 < moves.len() && head_ok {
            if set.len() < cfg.max_changes {
                let mut ext = set.clone();
                ext.push(last + 1);
                heap.push(Node {
                    cost: cost + moves[last + 1].cost,
                    set: ext,
                });
            }
            let mut rep = set.clone();
            *rep.last_mut().unwrap() = last + 1;
            heap.push(Node {
                cost: cost - moves[last].cost + moves[last + 1].cost,
                set: rep,
            });
        }
        if set.len() < 2 || !head_ok || head.iter().any(|&i| moves[i].feature == moves[last].feature) {
            continue;
        }
        evaluate(&set, &mut found, &mut results, &mut tried);
    }
    if results.is_empty() {
        return Err(Error::NoCounterfactualFound(tried));
    }
    results.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    Ok(results)
}

/// Moves each changed coordinate of `p` back towards `x` as far as the
/// prediction stays valid.
fn refine(model: &impl Classifier, x: &[f64], mut p: Vec<f64>, valid: &impl Fn(usize) -> bool, steps: usize) -> Vec<f64> {
    for j in 0..x.len() {
        if p[j] == x[j] {
            continue;
        }
        let mut probe = p.clone();
        probe[j] = x[j];
        if valid(model.predict_row(&probe)) {
            p[j] = x[j];
            continue;
        }
        // lo is invalid, hi is valid
        let (mut lo, mut hi) = (x[j], p[j]);
        for _ in 0..steps {
            let mid = lo + (hi - lo) / 2.0;
            if mid == lo || mid == hi {
                break;
            }
            probe[j] = mid;
            if valid(model.predict_row(&probe)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        p[j] = hi;
    }
    p
}

/// Effect of replacing one feature of an instance by its background mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub feature: usize,
    pub replacement: f64,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    /// Argmax of `after`.
    pub recourse_class: usize,
    pub flipped: bool,
}

pub fn whatif_remove_feature(model: &impl Classifier, x: &[f64], feature: usize, background: &Matrix) -> Result<WhatIf> {
    if feature >= x.len() {
        return Err(Error::InvalidFeature {
            feature,
            n_features: x.len(),
        });
    }
    if background.rows == 0 {
        return Err(Error::EmptySample);
    }
    let replacement = math::mean(&background.column(feature));
    let before = model.predict_proba_row(x);
    let mut changed = x.to_vec();
    changed[feature] = replacement;
    let after = model.predict_proba_row(&changed);
    let recourse_class = math::argmax(&after);
    Ok(WhatIf {
        feature,
        replacement,
        flipped: recourse_class != math::argmax(&before),
        before,
        after,
        recourse_class,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapMethod {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalExplanation {
    pub instance: Option<usize>,
    pub class: usize,
    pub probability: f64,
    pub probabilities: Vec<f64>,
    pub blackbox_class: Option<usize>,
    /// Shapley value of each feature for the predicted class.
    pub contributions: Vec<f64>,
    pub base_value: f64,
    pub method: ShapMethod,
    /// Index into the decision list, `None` when the default decides.
    pub rule_index: Option<usize>,
    pub rule: String,
    pub counterfactuals: Vec<Counterfactual>,
    pub whatif: Vec<WhatIf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub shap_permutations: usize,
    pub counterfactual: CounterfactualConfig,
    pub seed: u64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            shap_permutations: 64,
            counterfactual: CounterfactualConfig::default(),
            seed: 0,
        }
    }
}

/// Prediction, Shapley contributions, deciding rule, counterfactuals and a
/// what-if row per feature for one row of the surrogate's feature space.
/// Counterfactual candidates come from the list's interval bounds and the
/// surrogate's split thresholds; when `recheck` is given (normally the
/// black box seen through the reduced space) each counterfactual records
/// that model's class too. A failed counterfactual search leaves the list
/// empty rather than failing the explanation.
pub fn explain_instance<B: Classifier>(
    surrogate: &SurrogateModel,
    list: &DecisionList,
    recheck: Option<&B>,
    x: &[f64],
    background: &Matrix,
    names: (&[String], &[String]),
    cfg: &ExplainConfig,
) -> Result<LocalExplanation> {
    let probabilities = surrogate.predict_proba_row(x);
    let class = math::argmax(&probabilities);
    let rule_index = list.fire(x);
    let rule = match rule_index {
        Some(i) => list.rules[i].render(names.0, names.1),
        None => format!("ELSE class={}", class_name(names.1, list.default_class)),
    };
    let sv = attribution::shapley(surrogate, x, background, cfg.shap_permutations, cfg.seed)?;
    let mut bounds = list.boundaries();
    for (b, t) in bounds.iter_mut().zip(split_thresholds(surrogate)) {
        b.extend(thin(&t, cfg.counterfactual.max_boundaries));
        b.sort_by(|p, q| p.total_cmp(q));
        b.dedup();
    }
    let mut counterfactuals = match counterfactual(surrogate, x, &bounds, background, &cfg.counterfactual) {
        Ok(c) => c,
        Err(Error::NoCounterfactualFound(_)) => Vec::new(),
        Err(e) => return Err(e),
    };
    if let Some(b) = recheck {
        for c in &mut counterfactuals {
            c.recheck_class = Some(b.predict_row(&c.point));
        }
    }
    let whatif = (0..x.len())
        .map(|f| whatif_remove_feature(surrogate, x, f, background))
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalExplanation {
        instance: None,
        class,
        probability: probabilities[class],
        blackbox_class: recheck.map(|b| b.predict_row(x)),
        contributions: sv.for_output(class),
        base_value: sv.base[class],
        method: if x.len() <= MAX_EXACT_FEATURES { ShapMethod::Exact } else { ShapMethod::Sampled },
        rule_index,
        rule,
        probabilities,
        counterfactuals,
        whatif,
    })
}
