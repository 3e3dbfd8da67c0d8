//! Flat `key = value` run configuration.
//!
//! Every key has a typed default. A file sets any subset, later flag
//! overrides win, and unknown keys are rejected. The resolved pairs, sorted
//! by key, are what gets hashed and embedded in artifacts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use xai_core::attribution::ScoreMetric;
use xai_core::blackbox::{CaeConfig, ConvStage};
use xai_core::probe::{PerturbScheme, Placement, ProbeConfig};
use xai_core::rules::{CounterfactualConfig, ExplainConfig, RuleThresholds};
use xai_core::surrogate::{MaxFeatures, R2Mode, SurrogateConfig, SurrogateKind, ThresholdMode, TreeConfig};

use crate::error::{Result, XaiError};

/// A value that can appear on the right of `=`.
pub trait ConfigValue: Sized {
    fn parse_value(s: &str) -> std::result::Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! via_fromstr {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> std::result::Result<Self, String> {
                s.parse().map_err(|e| format!("{e}"))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
via_fromstr!(usize, u64, bool, String);

impl ConfigValue for f64 {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
        if v.is_finite() { Ok(v) } else { Err("must be finite".into()) }
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

/// Enums use their serde names, e.g. `gaussian-noise`.
macro_rules! via_serde {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> std::result::Result<Self, String> {
                serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| format!("{e}"))
            }
            fn render(&self) -> String {
                match serde_json::to_value(self) {
                    Ok(serde_json::Value::String(s)) => s,
                    _ => unreachable!("unit enum serializes to a string"),
                }
            }
        }
    )*};
}
via_serde!(Placement, SurrogateKind, PerturbScheme, R2Mode, ScoreMetric, DataSource, LabelSource);

/// Comma-separated list of non-negative integers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct List(pub Vec<usize>);

impl ConfigValue for List {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        if s.trim().is_empty() {
            return Ok(List(Vec::new()));
        }
        s.split(',').map(|p| p.trim().parse::<usize>().map_err(|e| format!("{e}"))).collect::<std::result::Result<_, _>>().map(List)
    }
    fn render(&self) -> String {
        self.0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synth,
    Csv,
}

/// Which labels the surrogate is trained to reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Truth,
    Blackbox,
}

macro_rules! run_config {
    ($($field:ident : $ty:ty = $default:expr => $key:literal,)*) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $(pub $field: $ty,)*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                RunConfig { $($field: $default,)* }
            }
        }

        impl RunConfig {
            pub const KEYS: &'static [&'static str] = &[$($key),*];

            /// Sets one key from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                let value = value.trim();
                match key.trim() {
                    $($key => {
                        self.$field = <$ty as ConfigValue>::parse_value(value).map_err(|reason| XaiError::BadValue {
                            key: key.into(),
                            value: value.into(),
                            reason,
                        })?;
                    })*
                    other => return Err(XaiError::UnknownKey(other.to_string())),
                }
                Ok(())
            }

            /// Resolved `(key, value)` pairs sorted by key.
            pub fn pairs(&self) -> BTreeMap<String, String> {
                let mut out = BTreeMap::new();
                $(out.insert($key.to_string(), self.$field.render());)*
                out
            }
        }
    };
}

run_config! {
    seed: u64 = 0 => "seed",
    data_source: DataSource = DataSource::Synth => "data.source",
    data_path: String = String::new() => "data.path",
    data_label: String = "label".into() => "data.label",
    data_delimiter: String = ",".into() => "data.delimiter",
    data_subsample: usize = 0 => "data.subsample",
    test_fraction: f64 = 0.2 => "data.test_fraction",
    synth_n: usize = 1000 => "synth.n",
    synth_m: usize = 100 => "synth.m",
    synth_informative: usize = 10 => "synth.informative",
    synth_classes: usize = 3 => "synth.classes",
    synth_noise: f64 = 0.5 => "synth.noise",
    cae_channels: List = List(vec![8, 16]) => "cae.channels",
    cae_width: usize = 5 => "cae.width",
    cae_stride: usize = 1 => "cae.stride",
    cae_pool: usize = 2 => "cae.pool",
    cae_k: usize = 16 => "cae.k",
    cae_alpha_r: f64 = 0.5 => "cae.alpha_r",
    cae_alpha_ce: f64 = 0.5 => "cae.alpha_ce",
    cae_lambda: f64 = 1e-4 => "cae.lambda",
    cae_epochs: usize = 50 => "cae.epochs",
    cae_batch: usize = 64 => "cae.batch",
    cae_lr: f64 = 1e-3 => "cae.lr",
    probe_placement: Placement = Placement::Embedding => "probe.placement",
    probe_heads: usize = 1 => "probe.heads",
    probe_hidden: usize = 32 => "probe.hidden",
    probe_epochs: usize = 30 => "probe.epochs",
    probe_batch: usize = 64 => "probe.batch",
    probe_lr: f64 = 1e-2 => "probe.lr",
    probe_sample: usize = 256 => "probe.sample",
    top_k: usize = 20 => "topk",
    sens_w: f64 = 1.0 => "sensitivity.w",
    sens_scheme: PerturbScheme = PerturbScheme::GaussianNoise => "sensitivity.scheme",
    surrogate_kind: SurrogateKind = SurrogateKind::Ert => "surrogate.kind",
    surrogate_trees: usize = 100 => "surrogate.trees",
    surrogate_dt_depth: usize = 8 => "surrogate.dt_depth",
    surrogate_forest_depth: usize = 0 => "surrogate.forest_depth",
    surrogate_min_leaf: usize = 2 => "surrogate.min_leaf",
    surrogate_labels: LabelSource = LabelSource::Truth => "surrogate.labels",
    r2_mode: R2Mode = R2Mode::ProbabilityMatrix => "r2.mode",
    r2_threshold: f64 = 0.8 => "r2.threshold",
    importance_repeats: usize = 5 => "importance.repeats",
    importance_metric: ScoreMetric = ScoreMetric::Accuracy => "importance.metric",
    shap_rows: usize = 50 => "shap.rows",
    shap_background: usize = 32 => "shap.background",
    shap_permutations: usize = 64 => "shap.permutations",
    rules_trees: usize = 0 => "rules.trees",
    rules_max_len: usize = 0 => "rules.max_len",
    rules_min_support: f64 = 0.01 => "rules.min_support",
    rules_min_confidence: f64 = 0.6 => "rules.min_confidence",
    rules_min_coverage: usize = 5 => "rules.min_coverage",
    explain_instances: List = List(vec![0]) => "explain.instances",
    cf_max_changes: usize = 3 => "cf.max_changes",
    cf_max_results: usize = 3 => "cf.max_results",
    cf_budget: usize = 20_000 => "cf.budget",
    run_sensitivity: bool = true => "stages.sensitivity",
    run_importance: bool = true => "stages.importance",
    run_explain: bool = true => "stages.explain",
    run_whatif: bool = true => "stages.whatif",
}

impl RunConfig {
    /// Applies `key = value` lines. Blank lines and `#` comments are skipped;
    /// a key may appear only once per text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| XaiError::Usage(format!("config line {}: expected `key = value`", n + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(XaiError::Usage(format!("config line {}: duplicate key `{k}`", n + 1)));
            }
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| XaiError::Io { path: path.to_path_buf(), source })?;
        Self::from_text(&text)
    }

    /// Canonical text: one `key = value` line per key, sorted.
    pub fn to_text(&self) -> String {
        self.pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of [`RunConfig::to_text`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn delimiter(&self) -> Result<u8> {
        match self.data_delimiter.as_bytes() {
            [b] => Ok(*b),
            _ if self.data_delimiter == "\\t" || self.data_delimiter == "tab" => Ok(b'\t'),
            _ => Err(XaiError::BadValue {
                key: "data.delimiter".into(),
                value: self.data_delimiter.clone(),
                reason: "must be a single byte".into(),
            }),
        }
    }

    pub fn cae(&self) -> CaeConfig {
        CaeConfig {
            stages: self
                .cae_channels
                .0
                .iter()
                .map(|&channels| ConvStage {
                    channels,
                    width: self.cae_width,
                    stride: self.cae_stride,
                })
                .collect(),
            pool: self.cae_pool,
            embedding_dim: self.cae_k,
            alpha_r: self.cae_alpha_r,
            alpha_ce: self.cae_alpha_ce,
            lambda: self.cae_lambda,
            epochs: self.cae_epochs,
            batch_size: self.cae_batch,
            lr: self.cae_lr,
            seed: self.seed,
        }
    }

    pub fn probe(&self) -> ProbeConfig {
        ProbeConfig {
            placement: self.probe_placement,
            heads: self.probe_heads,
            hidden: self.probe_hidden,
            epochs: self.probe_epochs,
            batch_size: self.probe_batch,
            lr: self.probe_lr,
            seed: self.seed,
        }
    }

    pub fn surrogate(&self) -> SurrogateConfig {
        let depth = |d: usize| if d == 0 { None } else { Some(d) };
        let (n_trees, tree) = match self.surrogate_kind {
            SurrogateKind::Dt => (
                1,
                TreeConfig {
                    max_depth: depth(self.surrogate_dt_depth),
                    ..TreeConfig::decision_tree()
                },
            ),
            kind => (
                self.surrogate_trees,
                TreeConfig {
                    max_depth: depth(self.surrogate_forest_depth),
                    min_samples_leaf: self.surrogate_min_leaf,
                    max_features: MaxFeatures::Sqrt,
                    thresholds: if kind == SurrogateKind::Rf { ThresholdMode::Best } else { ThresholdMode::Random },
                    ..TreeConfig::forest(ThresholdMode::Best)
                },
            ),
        };
        SurrogateConfig {
            kind: self.surrogate_kind,
            n_trees,
            tree,
            seed: self.seed,
        }
    }

    pub fn thresholds(&self) -> RuleThresholds {
        RuleThresholds {
            min_support: self.rules_min_support,
            min_confidence: self.rules_min_confidence,
            min_coverage: self.rules_min_coverage,
        }
    }

    pub fn rules_max_len(&self) -> Option<usize> {
        (self.rules_max_len > 0).then_some(self.rules_max_len)
    }

    pub fn explain(&self) -> ExplainConfig {
        ExplainConfig {
            shap_permutations: self.shap_permutations,
            counterfactual: CounterfactualConfig {
                max_changes: self.cf_max_changes,
                max_results: self.cf_max_results,
                budget: self.cf_budget,
                ..CounterfactualConfig::default()
            },
            seed: self.seed,
        }
    }
}
