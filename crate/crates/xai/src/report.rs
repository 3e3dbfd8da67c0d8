//! `report.json`, schema version 1.
//!
//! Every section except `meta` is optional so a report can be assembled from
//! whichever stages have run. Loading and saving a report reproduces the
//! file byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use xai_core::data::ScalerParams;
use xai_core::probe::{Placement, RankingMethod};
use xai_core::rules::{LocalExplanation, RuleThresholds, WhatIf};
use xai_core::surrogate::{FidelityBand, R2Mode, SurrogateKind, Verdict};

use crate::artifact::{read_text, write_text};
use crate::error::{Result, XaiError};
use crate::metrics::Metrics;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub meta: Meta,
    pub blackbox: Option<BlackboxSection>,
    pub ranking: Option<RankingSection>,
    pub sensitivity: Option<Vec<SensitivityRow>>,
    pub surrogate: Option<SurrogateSection>,
    pub importance: Option<Vec<ImportanceRow>>,
    pub gfi: Option<Vec<GfiRow>>,
    pub rules: Option<RulesSection>,
    pub explanations: Vec<LocalExplanation>,
    pub whatif: Vec<WhatIfRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub seed: u64,
    /// Seconds since the Unix epoch when the report was written.
    pub timestamp: u64,
    pub config_hash: String,
    pub config: BTreeMap<String, String>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub class_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlackboxSection {
    /// Held-out scores.
    pub metrics: Metrics,
    pub train_accuracy: f64,
    pub epochs: usize,
    pub final_loss: f64,
    pub scaler: ScalerParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankingSection {
    pub method: RankingMethod,
    pub placement: Placement,
    pub k_cut: usize,
    pub features: Vec<RankRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankRow {
    pub feature: String,
    pub index: usize,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityRow {
    pub feature: String,
    pub index: usize,
    pub s: f64,
    pub top2_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSection {
    pub kind: SurrogateKind,
    pub n_trees: usize,
    pub features: Vec<String>,
    pub r2_mode: R2Mode,
    pub r_squared: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub band: FidelityBand,
    /// Share of held-out rows where surrogate and black box agree.
    pub agreement: f64,
    /// Surrogate scores against the true held-out labels.
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportanceRow {
    pub feature: String,
    pub permutation_mean: f64,
    pub permutation_std: f64,
    pub mdi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignSummary {
    pub mean_phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GfiRow {
    pub feature: String,
    pub gfi: f64,
    pub sign_summary: SignSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesSection {
    pub thresholds: RuleThresholds,
    pub n_candidates: usize,
    pub rules: Vec<String>,
    pub default_class: String,
    /// Held-out agreement with the surrogate.
    pub fidelity: f64,
    /// Held-out agreement with the black box.
    pub fidelity_blackbox: f64,
    pub confidence: f64,
    pub band: FidelityBand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRow {
    pub instance: usize,
    pub feature: String,
    pub result: WhatIf,
}

impl Report {
    /// Pretty JSON with a trailing newline. Fails if any number is not
    /// finite: serde_json writes those as `null`, which no `f64` field of the
    /// schema accepts on the way back in.
    pub fn to_json(&self) -> Result<String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(XaiError::SchemaVersion(self.schema_version));
        }
        let mut s = serde_json::to_string_pretty(self).map_err(|source| XaiError::Json { path: "report".into(), source })?;
        s.push('\n');
        if serde_json::from_str::<Report>(&s).is_err() {
            return Err(xai_core::Error::InvalidData("report holds a non-finite number".into()).into());
        }
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Report = serde_json::from_str(text).map_err(|source| XaiError::Json { path: "report".into(), source })?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(XaiError::SchemaVersion(r.schema_version));
        }
        Ok(r)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?)
    }
}
