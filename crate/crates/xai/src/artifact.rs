//! JSON artifacts in a run directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Result, XaiError};

/// A stage output together with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub config_hash: String,
    pub config: BTreeMap<String, String>,
    pub data: T,
}

impl<T> Artifact<T> {
    pub fn new(cfg: &RunConfig, data: T) -> Self {
        Artifact {
            config_hash: cfg.hash(),
            config: cfg.pairs(),
            data,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| XaiError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| XaiError::Json { path: path.to_path_buf(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| XaiError::Io { path: path.to_path_buf(), source })
}

pub fn read_text(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(t) => Ok(t),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(XaiError::MissingArtifact(path.to_path_buf())),
        Err(source) => Err(XaiError::Io { path: path.to_path_buf(), source }),
    }
}

/// One run's directory of artifacts.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|source| XaiError::Io { path: root.to_path_buf(), source })?;
        Ok(RunDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).exists()
    }

    pub fn save<T: Serialize>(&self, name: &str, cfg: &RunConfig, data: &T) -> Result<()> {
        write_json(&self.path(name), &Artifact::new(cfg, data))
    }

    pub fn load<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        Ok(read_json::<Artifact<T>>(&self.path(name))?.data)
    }

    pub fn load_opt<T: DeserializeOwned>(&self, name: &str) -> Result<Option<T>> {
        if self.exists(name) { self.load(name).map(Some) } else { Ok(None) }
    }
}
