//! Black-box checkpoints. The model's layer map `{name: {shape, values}}`,
//! configuration, scaler and training history sit under `data`, next to the
//! run configuration that produced them. Floats are written in shortest
//! round-trip form, so loading gives back the exact weights.

use std::path::Path;

use xai_core::blackbox::CaeClassifier;

use crate::artifact::{read_json, write_json, Artifact};
use crate::config::RunConfig;
use crate::error::Result;

pub fn save_checkpoint(path: &Path, cfg: &RunConfig, model: &CaeClassifier) -> Result<()> {
    write_json(path, &Artifact::new(cfg, model))
}

pub fn load_checkpoint(path: &Path) -> Result<CaeClassifier> {
    Ok(read_json::<Artifact<CaeClassifier>>(path)?.data)
}
