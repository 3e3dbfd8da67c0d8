//! Pipeline stages. Each stage reads what earlier stages left in the run
//! directory and writes its own artifact, so any stage can be rerun alone.

use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xai_core::attribution::{GlobalShap, ImportanceEntry};
use xai_core::blackbox::{self, CaeClassifier};
use xai_core::data::{self, Dataset, Matrix};
use xai_core::math::argmax;
use xai_core::model::Embedded;
use xai_core::probe::{self, FeatureRanking, Placement, SensitivityReport};
use xai_core::rng::derive_seed;
use xai_core::rules::{self, DecisionList, LocalExplanation};
use xai_core::surrogate::{self, FidelityBand, FidelityScore, SurrogateModel};
use xai_core::Classifier;

use crate::artifact::{write_text, RunDir};
use crate::config::{DataSource, LabelSource, RunConfig};
use crate::checkpoint;
use crate::csvio;
use crate::error::{Result, XaiError};
use crate::metrics::{compute_metrics, table, Metrics};
use crate::parallel;
use crate::report::*;

pub const DATA: &str = "data.json";
pub const SPLIT: &str = "split.json";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const BLACKBOX: &str = "blackbox.json";
pub const RANKING: &str = "ranking.json";
pub const SENSITIVITY: &str = "sensitivity.json";
pub const SURROGATE: &str = "surrogate.json";
pub const IMPORTANCE: &str = "importance.json";
pub const RULES: &str = "rules.json";
pub const RULES_TXT: &str = "rules.txt";
pub const EXPLANATIONS: &str = "explanations.json";
pub const WHATIF: &str = "whatif.json";
pub const REPORT: &str = "report.json";
pub const CONFIG: &str = "config.txt";

/// The black box applied to unscaled rows.
#[derive(Debug, Clone, Copy)]
pub struct RawInput<'a>(pub &'a CaeClassifier);

impl Classifier for RawInput<'_> {
    fn n_features(&self) -> usize {
        self.0.n_features
    }
    fn n_classes(&self) -> usize {
        self.0.n_classes
    }
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        let mut row = x.to_vec();
        self.0.scaler.transform_row(&mut row);
        self.0.predict_proba_row(&row)
    }
    fn predict_proba(&self, x: &Matrix) -> Matrix {
        self.0.predict_proba(&self.0.scaler.transform(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataArtifact {
    pub dataset: Dataset,
    /// Ground-truth informative columns, known for synthetic data only.
    pub informative: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitArtifact {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackboxArtifact {
    pub metrics: Metrics,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingArtifact {
    pub ranking: FeatureRanking,
    pub placement: Placement,
    pub probe_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateArtifact {
    pub model: SurrogateModel,
    /// Input columns the surrogate sees, in its feature order.
    pub columns: Vec<usize>,
    pub fidelity: FidelityScore,
    pub agreement: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceArtifact {
    pub permutation: Vec<ImportanceEntry>,
    pub mdi: Vec<f64>,
    pub shap: GlobalShap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulesArtifact {
    pub list: DecisionList,
    pub n_candidates: usize,
    pub fidelity: f64,
    pub fidelity_blackbox: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfArtifact(pub Vec<WhatIfRow>);

/// `k` row indices spread evenly over `0..n` (all of them if `k >= n`).
pub fn spread(n: usize, k: usize) -> Vec<usize> {
    if k >= n {
        (0..n).collect()
    } else {
        (0..k).map(|i| i * n / k).collect()
    }
}

/// Train and test partitions of the raw data.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub test: Dataset,
    pub informative: Option<Vec<usize>>,
}

/// Stage driver bound to one resolved configuration and run directory.
#[derive(Debug)]
pub struct Pipeline {
    pub cfg: RunConfig,
    pub dir: RunDir,
    pub threads: usize,
    /// Print progress tables on standard output.
    pub verbose: bool,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, dir: RunDir, threads: usize) -> Result<Self> {
        write_text(&dir.path(CONFIG), &cfg.to_text())?;
        Ok(Pipeline { cfg, dir, threads, verbose: false })
    }

    fn par<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R> {
        parallel::with_threads(self.threads, f)
    }

    fn say(&self, text: &str) {
        if self.verbose {
            print!("{text}");
        }
    }

    fn store_data(&self, mut d: Dataset, informative: Option<Vec<usize>>) -> Result<()> {
        if self.cfg.data_subsample > 0 && self.cfg.data_subsample < d.n_rows() {
            let drop = 1.0 - self.cfg.data_subsample as f64 / d.n_rows() as f64;
            let (keep, _) = data::split_indices(&d, drop, derive_seed(self.cfg.seed, 0x5355_4253))?;
            d = d.subset(&keep);
        }
        let (train, test) = data::split_indices(&d, self.cfg.test_fraction, self.cfg.seed)?;
        self.dir.save(DATA, &self.cfg, &DataArtifact { dataset: d, informative })?;
        self.dir.save(SPLIT, &self.cfg, &SplitArtifact { train, test })
    }

    /// Reads the CSV named by `data.path`.
    pub fn ingest(&self) -> Result<()> {
        if self.cfg.data_path.is_empty() {
            return Err(XaiError::Usage("ingest needs data.path".into()));
        }
        let d = csvio::load_csv(self.cfg.data_path.as_ref(), &self.cfg.data_label, self.cfg.delimiter()?)?;
        self.store_data(d, None)
    }

    pub fn synth(&self) -> Result<()> {
        let c = &self.cfg;
        let s = data::synth_highdim(c.synth_n, c.synth_m, c.synth_informative, c.synth_classes, c.synth_noise, c.seed)?;
        self.store_data(s.dataset, Some(s.informative))
    }

    /// `ingest` or `synth`, whichever `data.source` names.
    pub fn prepare(&self) -> Result<()> {
        match self.cfg.data_source {
            DataSource::Synth => self.synth(),
            DataSource::Csv => self.ingest(),
        }
    }

    pub fn splits(&self) -> Result<Splits> {
        let d: DataArtifact = self.dir.load(DATA)?;
        let s: SplitArtifact = self.dir.load(SPLIT)?;
        Ok(Splits {
            train: d.dataset.subset(&s.train),
            test: d.dataset.subset(&s.test),
            informative: d.informative,
        })
    }

    pub fn model(&self) -> Result<CaeClassifier> {
        checkpoint::load_checkpoint(&self.dir.path(CHECKPOINT))
    }

    /// Fits the scaler on the training rows, then the black box.
    pub fn train_blackbox(&self) -> Result<CaeClassifier> {
        let s = self.splits()?;
        let (train_std, scaler) = data::standardize(&s.train)?;
        let model = blackbox::train(&train_std, scaler, &self.cfg.cae())?;
        checkpoint::save_checkpoint(&self.dir.path(CHECKPOINT), &self.cfg, &model)?;
        let bb = RawInput(&model);
        let c = s.train.n_classes();
        let metrics = compute_metrics(&bb.predict(&s.test.features), &s.test.labels, c);
        let train_accuracy = compute_metrics(&bb.predict(&s.train.features), &s.train.labels, c).accuracy;
        self.dir.save(BLACKBOX, &self.cfg, &BlackboxArtifact { metrics, train_accuracy })?;
        self.say(&metrics_table("black box (test)", &metrics));
        Ok(model)
    }

    /// Trains the attention probe and ranks input features.
    pub fn probe(&self) -> Result<FeatureRanking> {
        let s = self.splits()?;
        let model = self.model()?;
        let train = Dataset {
            features: model.scaler.transform(&s.train.features),
            ..s.train.clone()
        };
        let pc = self.cfg.probe();
        let p = probe::train_probe(&model, &train, &pc)?;
        let ranking = match pc.placement {
            Placement::Input => probe::input_ranking(&p, self.cfg.top_k)?,
            Placement::Embedding => {
                let sample = train.features.select_rows(&spread(train.n_rows(), self.cfg.probe_sample));
                probe::input_attribution(&model, &p, &sample, self.cfg.top_k)?
            }
        };
        self.dir.save(
            RANKING,
            &self.cfg,
            &RankingArtifact {
                ranking: ranking.clone(),
                placement: pc.placement,
                probe_losses: p.losses.clone(),
            },
        )?;
        Ok(ranking)
    }

    pub fn ranking(&self) -> Result<FeatureRanking> {
        Ok(self.dir.load::<RankingArtifact>(RANKING)?.ranking)
    }

    /// Perturbation sensitivity of the black box on the top-ranked features.
    pub fn sensitivity(&self) -> Result<SensitivityReport> {
        let s = self.splits()?;
        let model = self.model()?;
        let ranking = self.ranking()?;
        let c = &self.cfg;
        let rep = self.par(|| parallel::validate_topk(&RawInput(&model), &s.test, &ranking, c.sens_w, c.sens_scheme, c.seed))??;
        self.dir.save(SENSITIVITY, &self.cfg, &rep)?;
        Ok(rep)
    }

    /// Fits the surrogate on the top-k columns and scores it against the
    /// black box on held-out rows.
    pub fn surrogate(&self) -> Result<SurrogateArtifact> {
        let s = self.splits()?;
        let model = self.model()?;
        let bb = RawInput(&model);
        let columns = self.ranking()?.top().to_vec();
        let x_train = s.train.features.select_cols(&columns);
        let x_test = s.test.features.select_cols(&columns);
        let y = match self.cfg.surrogate_labels {
            LabelSource::Truth => s.train.labels.clone(),
            LabelSource::Blackbox => bb.predict(&s.train.features),
        };
        let scfg = self.cfg.surrogate();
        let n_classes = s.train.n_classes();
        let sur = self.par(|| parallel::fit_surrogate(&x_train, &y, n_classes, &scfg))??;
        let bb_probs = bb.predict_proba(&s.test.features);
        let sur_probs = sur.predict_proba(&x_test);
        let fidelity = surrogate::fidelity(&bb_probs, &sur_probs, self.cfg.r2_mode, self.cfg.r2_threshold)?;
        let bb_pred: Vec<usize> = bb_probs.iter_rows().map(argmax).collect();
        let sur_pred: Vec<usize> = sur_probs.iter_rows().map(argmax).collect();
        let agreement = xai_core::metrics::accuracy(&bb_pred, &sur_pred);
        let metrics = compute_metrics(&sur_pred, &s.test.labels, n_classes);
        let art = SurrogateArtifact {
            model: sur,
            columns,
            fidelity,
            agreement,
            metrics,
        };
        self.dir.save(SURROGATE, &self.cfg, &art)?;
        self.say(&table(&[
            ("surrogate R²", format!("{:.4}", fidelity.r_squared)),
            ("agreement", format!("{agreement:.4}")),
            ("accuracy", format!("{:.4}", metrics.accuracy)),
        ]));
        Ok(art)
    }

    pub fn surrogate_artifact(&self) -> Result<SurrogateArtifact> {
        self.dir.load(SURROGATE)
    }

    fn reduced(&self, d: &Dataset, columns: &[usize]) -> Dataset {
        Dataset {
            features: d.features.select_cols(columns),
            labels: d.labels.clone(),
            feature_names: columns.iter().map(|&j| d.feature_names[j].clone()).collect(),
            class_names: d.class_names.clone(),
        }
    }

    fn background(&self, train: &Dataset) -> Matrix {
        train.features.select_rows(&spread(train.n_rows(), self.cfg.shap_background))
    }

    /// Permutation importance, impurity importance and global Shapley values
    /// of the surrogate.
    pub fn importance(&self) -> Result<ImportanceArtifact> {
        let s = self.splits()?;
        let sa = self.surrogate_artifact()?;
        let train = self.reduced(&s.train, &sa.columns);
        let test = self.reduced(&s.test, &sa.columns);
        let c = &self.cfg;
        let background = self.background(&train);
        let rows = test.features.select_rows(&spread(test.n_rows(), c.shap_rows));
        let (permutation, shap) = self.par(|| {
            let p = parallel::permutation_importance(&sa.model, &test, c.importance_metric, c.importance_repeats, c.seed);
            let g = parallel::global_shap(&sa.model, &rows, &background, c.shap_permutations, c.seed);
            (p, g)
        })?;
        let art = ImportanceArtifact {
            permutation: permutation?,
            mdi: surrogate::mdi_importance(&sa.model),
            shap: shap?,
        };
        self.dir.save(IMPORTANCE, &self.cfg, &art)?;
        Ok(art)
    }

    /// Decision list distilled from the surrogate's trees, fitted to the
    /// surrogate's own training-row predictions.
    pub fn rules(&self) -> Result<RulesArtifact> {
        let s = self.splits()?;
        let model = self.model()?;
        let sa = self.surrogate_artifact()?;
        let train = self.reduced(&s.train, &sa.columns);
        let test = self.reduced(&s.test, &sa.columns);
        let n_trees = match self.cfg.rules_trees {
            0 => sa.model.trees.len(),
            t => t.min(sa.model.trees.len()),
        };
        let source = SurrogateModel {
            trees: sa.model.trees[..n_trees].to_vec(),
            ..sa.model.clone()
        };
        let candidates = rules::extract_model_rules(&source, self.cfg.rules_max_len());
        let y = sa.model.predict(&train.features);
        let list = rules::assemble_decision_list(&candidates, &train.features, &y, train.n_classes(), &self.cfg.thresholds())?;
        let sur_test = sa.model.predict(&test.features);
        let bb_test = RawInput(&model).predict(&s.test.features);
        let art = RulesArtifact {
            fidelity: rules::list_fidelity(&list, &test.features, &sur_test),
            fidelity_blackbox: rules::list_fidelity(&list, &test.features, &bb_test),
            confidence: rules::list_confidence(&list, &test.features, &test.labels),
            n_candidates: candidates.len(),
            list,
        };
        self.dir.save(RULES, &self.cfg, &art)?;
        write_text(&self.dir.path(RULES_TXT), &art.list.render(&train.feature_names, &train.class_names))?;
        self.say(&table(&[
            ("rules", art.list.rules.len().to_string()),
            ("rule fidelity", format!("{:.4}", art.fidelity)),
            ("rule confidence", format!("{:.4}", art.confidence)),
        ]));
        Ok(art)
    }

    fn instances(&self, n_test: usize) -> Result<Vec<usize>> {
        let inst = self.cfg.explain_instances.0.clone();
        if let Some(&bad) = inst.iter().find(|&&i| i >= n_test) {
            return Err(XaiError::Usage(format!("instance {bad} out of range: test set has {n_test} rows")));
        }
        Ok(inst)
    }

    /// Local explanations of held-out rows (indices into the test split).
    pub fn explain(&self) -> Result<Vec<LocalExplanation>> {
        let s = self.splits()?;
        let model = self.model()?;
        let sa = self.surrogate_artifact()?;
        let ra: RulesArtifact = self.dir.load(RULES)?;
        let train = self.reduced(&s.train, &sa.columns);
        let test = self.reduced(&s.test, &sa.columns);
        let background = self.background(&train);
        let instances = self.instances(test.n_rows())?;
        let bb = RawInput(&model);
        let names = (&train.feature_names[..], &train.class_names[..]);
        let out = self.par(|| {
            instances
                .par_iter()
                .map(|&i| {
                    let recheck = Embedded {
                        inner: &bb,
                        anchor: s.test.features.row(i).to_vec(),
                        columns: sa.columns.clone(),
                    };
                    let mut ec = self.cfg.explain();
                    ec.seed = derive_seed(self.cfg.seed, i as u64);
                    let mut e = rules::explain_instance(&sa.model, &ra.list, Some(&recheck), test.features.row(i), &background, names, &ec)?;
                    e.instance = Some(i);
                    Ok(e)
                })
                .collect::<Result<Vec<_>, xai_core::Error>>()
        })??;
        self.dir.save(EXPLANATIONS, &self.cfg, &out)?;
        Ok(out)
    }

    /// Effect on the black box of replacing each top-k feature of each
    /// explained row by its background mean.
    pub fn whatif(&self) -> Result<Vec<WhatIfRow>> {
        let s = self.splits()?;
        let model = self.model()?;
        let sa = self.surrogate_artifact()?;
        let train = self.reduced(&s.train, &sa.columns);
        let test = self.reduced(&s.test, &sa.columns);
        let background = self.background(&train);
        let bb = RawInput(&model);
        let mut rows = Vec::new();
        for i in self.instances(test.n_rows())? {
            let view = Embedded {
                inner: &bb,
                anchor: s.test.features.row(i).to_vec(),
                columns: sa.columns.clone(),
            };
            for f in 0..sa.columns.len() {
                rows.push(WhatIfRow {
                    instance: i,
                    feature: train.feature_names[f].clone(),
                    result: rules::whatif_remove_feature(&view, test.features.row(i), f, &background)?,
                });
            }
        }
        self.dir.save(WHATIF, &self.cfg, &WhatIfArtifact(rows.clone()))?;
        Ok(rows)
    }

    /// Collects every available stage output into `report.json`.
    pub fn report(&self) -> Result<Report> {
        let d: DataArtifact = self.dir.load(DATA)?;
        let split: SplitArtifact = self.dir.load(SPLIT)?;
        let names = &d.dataset.feature_names;
        let model: Option<CaeClassifier> = self.dir.load_opt(CHECKPOINT)?;
        let bba: Option<BlackboxArtifact> = self.dir.load_opt(BLACKBOX)?;
        let blackbox = match (model, bba) {
            (Some(m), Some(b)) => Some(BlackboxSection {
                metrics: b.metrics,
                train_accuracy: b.train_accuracy,
                epochs: m.history.len(),
                final_loss: m.history.last().map_or(0.0, |h| h.loss),
                scaler: m.scaler,
            }),
            _ => None,
        };
        let ranking = self.dir.load_opt::<RankingArtifact>(RANKING)?.map(|r| {
            let ranks = r.ranking.ranks();
            RankingSection {
                method: r.ranking.method,
                placement: r.placement,
                k_cut: r.ranking.k_cut,
                features: r
                    .ranking
                    .order
                    .iter()
                    .map(|&j| RankRow {
                        feature: names[j].clone(),
                        index: j,
                        score: r.ranking.scores[j],
                        rank: ranks[j],
                    })
                    .collect(),
            }
        });
        let sensitivity = self.dir.load_opt::<SensitivityReport>(SENSITIVITY)?.map(|r| {
            r.entries
                .iter()
                .map(|e| SensitivityRow {
                    feature: names[e.feature].clone(),
                    index: e.feature,
                    s: e.s,
                    top2_shift: e.top2_shift,
                })
                .collect()
        });
        let sa: Option<SurrogateArtifact> = self.dir.load_opt(SURROGATE)?;
        let reduced_names: Vec<String> = sa.as_ref().map_or_else(Vec::new, |a| a.columns.iter().map(|&j| names[j].clone()).collect());
        let surrogate = sa.as_ref().map(|a| SurrogateSection {
            kind: a.model.kind,
            n_trees: a.model.trees.len(),
            features: reduced_names.clone(),
            r2_mode: self.cfg.r2_mode,
            r_squared: a.fidelity.r_squared,
            threshold: a.fidelity.threshold,
            verdict: a.fidelity.verdict,
            band: FidelityBand::of(a.fidelity.r_squared),
            agreement: a.agreement,
            metrics: a.metrics,
        });
        let ia: Option<ImportanceArtifact> = self.dir.load_opt(IMPORTANCE)?;
        let importance = ia.as_ref().map(|a| {
            a.permutation
                .iter()
                .map(|e| ImportanceRow {
                    feature: reduced_names[e.feature].clone(),
                    permutation_mean: e.mean,
                    permutation_std: e.std,
                    mdi: a.mdi[e.feature],
                })
                .collect()
        });
        let gfi = ia.as_ref().map(|a| {
            let mut order: Vec<usize> = (0..a.shap.gfi.len()).collect();
            order.sort_by(|&p, &q| a.shap.gfi[q].total_cmp(&a.shap.gfi[p]).then(p.cmp(&q)));
            order
                .into_iter()
                .map(|i| GfiRow {
                    feature: reduced_names[i].clone(),
                    gfi: a.shap.gfi[i],
                    sign_summary: SignSummary { mean_phi: a.shap.mean_phi[i] },
                })
                .collect()
        });
        let rules = self.dir.load_opt::<RulesArtifact>(RULES)?.map(|r| RulesSection {
            thresholds: r.list.thresholds,
            n_candidates: r.n_candidates,
            rules: r.list.rules.iter().map(|x| x.render(&reduced_names, &d.dataset.class_names)).collect(),
            default_class: d.dataset.class_names[r.list.default_class].clone(),
            fidelity: r.fidelity,
            fidelity_blackbox: r.fidelity_blackbox,
            confidence: r.confidence,
            band: FidelityBand::of(r.fidelity),
        });
        let report = Report {
            schema_version: SCHEMA_VERSION,
            meta: Meta {
                seed: self.cfg.seed,
                timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
                config_hash: self.cfg.hash(),
                config: self.cfg.pairs(),
                n_train: split.train.len(),
                n_test: split.test.len(),
                n_features: d.dataset.n_features(),
                class_names: d.dataset.class_names.clone(),
            },
            blackbox,
            ranking,
            sensitivity,
            surrogate,
            importance,
            gfi,
            rules,
            explanations: self.dir.load_opt(EXPLANATIONS)?.unwrap_or_default(),
            whatif: self.dir.load_opt::<WhatIfArtifact>(WHATIF)?.map_or_else(Vec::new, |w| w.0),
        };
        report.save(&self.dir.path(REPORT))?;
        self.say(&summary_table(&report));
        Ok(report)
    }

    /// Every stage in order, honouring the stage toggles.
    pub fn run_all(&self) -> Result<Report> {
        self.prepare()?;
        self.train_blackbox()?;
        self.probe()?;
        if self.cfg.run_sensitivity {
            self.sensitivity()?;
        }
        self.surrogate()?;
        if self.cfg.run_importance {
            self.importance()?;
        }
        self.rules()?;
        if self.cfg.run_explain {
            self.explain()?;
        }
        if self.cfg.run_whatif {
            self.whatif()?;
        }
        self.report()
    }
}

fn metrics_table(title: &str, m: &Metrics) -> String {
    let mut s = format!("{title}\n");
    s += &table(&[
        ("accuracy", format!("{:.4}", m.accuracy)),
        ("precision", format!("{:.4}", m.precision)),
        ("recall", format!("{:.4}", m.recall)),
        ("f1", format!("{:.4}", m.f1)),
        ("mcc", format!("{:.4}", m.mcc)),
    ]);
    s
}

/// Headline numbers of a report as an aligned two-column table.
pub fn summary_table(r: &Report) -> String {
    let mut rows: Vec<(&str, String)> = Vec::new();
    if let Some(b) = &r.blackbox {
        rows.extend([
            ("black-box accuracy", format!("{:.4}", b.metrics.accuracy)),
            ("black-box precision", format!("{:.4}", b.metrics.precision)),
            ("black-box recall", format!("{:.4}", b.metrics.recall)),
            ("black-box f1", format!("{:.4}", b.metrics.f1)),
            ("black-box mcc", format!("{:.4}", b.metrics.mcc)),
        ]);
    }
    if let Some(s) = &r.surrogate {
        rows.extend([
            ("surrogate R²", format!("{:.4}", s.r_squared)),
            ("surrogate agreement", format!("{:.4}", s.agreement)),
            ("surrogate accuracy", format!("{:.4}", s.metrics.accuracy)),
        ]);
    }
    if let Some(l) = &r.rules {
        rows.extend([
            ("rules", l.rules.len().to_string()),
            ("rule fidelity", format!("{:.4}", l.fidelity)),
            ("rule confidence", format!("{:.4}", l.confidence)),
        ]);
    }
    rows.push(("explanations", r.explanations.len().to_string()));
    table(&rows)
}
