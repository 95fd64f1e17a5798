//! Optional `key = value` config file for `study`. Command-line flags win.

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data_dir: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub min_run: Option<usize>,
    pub runup_start: Option<i32>,
    pub runup_end: Option<i32>,
    pub est_start: Option<i32>,
    pub est_end: Option<i32>,
    pub evt_start: Option<i32>,
    pub evt_end: Option<i32>,
    pub min_est_obs: Option<usize>,
    pub strict_day0: Option<bool>,
    pub fixed_clock: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}
