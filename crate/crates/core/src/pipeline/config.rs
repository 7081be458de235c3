use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cohort::{Attribute, GroupStat};
use crate::tail::TailOptions;
use crate::{Error, Result};

/// Environment variable naming the output directory.
pub const OUT_DIR_ENV: &str = "TAILEX_OUT_DIR";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    Tail,
    Qgaussian,
    #[default]
    Both,
}

impl FitMode {
    pub fn tail(self) -> bool {
        matches!(self, FitMode::Tail | FitMode::Both)
    }

    pub fn qgaussian(self) -> bool {
        matches!(self, FitMode::Qgaussian | FitMode::Both)
    }
}

impl std::str::FromStr for FitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tail" => Ok(FitMode::Tail),
            "qgaussian" => Ok(FitMode::Qgaussian),
            "both" => Ok(FitMode::Both),
            other => Err(Error::InvalidParameter(format!(
                "unknown fit mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Tick CSV files, or directories whose `*.csv` files are read.
    pub ticks: Vec<PathBuf>,
    pub shares: Option<PathBuf>,
    /// Session calendar TOML; the default two-window session when absent.
    pub calendar: Option<PathBuf>,
    pub groups: usize,
    pub attributes: Vec<Attribute>,
    pub group_stat: GroupStat,
    pub tail: TailOptions,
    pub fit_mode: FitMode,
    /// Fit group densities with the scale tied to unit variance.
    pub unit_variance: bool,
    /// Drop the return spanning the gap between session windows.
    pub drop_session_gap: bool,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ticks: Vec::new(),
            shares: None,
            calendar: None,
            groups: 20,
            attributes: Attribute::ALL.to_vec(),
            group_stat: GroupStat::Mean,
            tail: TailOptions::default(),
            fit_mode: FitMode::Both,
            unit_variance: false,
            drop_session_gap: false,
            out_dir: PathBuf::from("tailex-out"),
            seed: 0,
        }
    }
}

/// Applies the keys present in the TOML `text` on top of `base`; absent
/// keys keep their current values and nested tables merge key by key.
pub fn overlay_toml<T: Serialize + serde::de::DeserializeOwned>(base: &T, text: &str) -> Result<T> {
    let overlay: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut table = toml::Table::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
    merge(&mut table, overlay);
    table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn overlay_toml(&self, text: &str) -> Result<Self> {
        overlay_toml(self, text)
    }

    pub fn overlay_file(&self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        self.overlay_toml(&text)
            .map_err(|e| e.at_stage("config", path.display().to_string()))
    }

    /// Checks parameters only; see [`PipelineConfig::validate_paths`].
    pub fn validate(&self) -> Result<()> {
        if self.groups < 2 {
            return Err(Error::Config(format!(
                "groups must be at least 2, got {}",
                self.groups
            )));
        }
        if self.attributes.is_empty() {
            return Err(Error::Config("at least one attribute is required".into()));
        }
        if self.tail.min_tail < 2 {
            return Err(Error::Config("tail.min_tail must be at least 2".into()));
        }
        Ok(())
    }

    pub fn validate_paths(&self) -> Result<()> {
        if self.ticks.is_empty() {
            return Err(Error::Config("no tick inputs given".into()));
        }
        let shares = self
            .shares
            .as_ref()
            .ok_or_else(|| Error::Config("no shares file given".into()))?;
        for p in self
            .ticks
            .iter()
            .chain([shares])
            .chain(self.calendar.iter())
        {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_keeps_unset_fields() {
        let base = PipelineConfig {
            groups: 7,
            seed: 3,
            ..Default::default()
        };
        let merged = base
            .overlay_toml("seed = 9\nfit_mode = \"tail\"\n[tail]\nmin_tail = 30\n")
            .unwrap();
        assert_eq!(merged.groups, 7);
        assert_eq!(merged.seed, 9);
        assert_eq!(merged.fit_mode, FitMode::Tail);
        assert_eq!(merged.tail.min_tail, 30);
        assert_eq!(merged.tail.max_candidates, base.tail.max_candidates);
    }

    #[test]
    fn rejects_one_group() {
        let cfg = PipelineConfig {
            groups: 1,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(PipelineConfig::default().overlay_toml("grops = 3").is_err());
    }
}
