use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameter sets of the two data sources the defaults were tuned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Large social platform dump: 300-dim vectors, min count 10, bins 10,100.
    #[default]
    Gab,
    /// Small online experiment: 90-dim vectors, min count 7, bins 2.
    Experiment,
}

impl Preset {
    pub fn dim(self) -> usize {
        match self {
            Preset::Gab => 300,
            Preset::Experiment => 90,
        }
    }

    pub fn min_count(self) -> usize {
        match self {
            Preset::Gab => 10,
            Preset::Experiment => 7,
        }
    }

    pub fn bins(self) -> &'static str {
        match self {
            Preset::Gab => "10,100",
            Preset::Experiment => "2",
        }
    }
}

/// Contents of a `--config` JSON file. Keys mirror the long flag names with
/// underscores; a flag given on the command line wins over the file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<Preset>,
    pub threads: Option<usize>,

    pub posts: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub dynamics: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub model_out: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,

    pub fraction: Option<f64>,
    pub seed: Option<u64>,
    pub dim: Option<usize>,
    pub min_count: Option<usize>,
    pub hash_seed: Option<u64>,
    pub variance: Option<f64>,
    pub window_days: Option<f64>,
    pub fg_weighting: Option<String>,
    pub min_gap: Option<f64>,
    pub bins: Option<String>,
    pub bandwidth: Option<f64>,
    pub grid_points: Option<usize>,
    pub p_method: Option<String>,
    pub n_perm: Option<usize>,

    pub n_users: Option<usize>,
    pub follow_prob: Option<f64>,
    pub n_days: Option<f64>,
    pub posts_per_user_per_day: Option<f64>,
    pub effect: Option<String>,
    pub effect_strength: Option<f64>,
    pub user_spread: Option<f64>,
    pub noise: Option<f64>,
    pub min_posts_per_user: Option<usize>,
    pub base_likes: Option<f64>,
    pub likes_dispersion: Option<f64>,
    pub with_text: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::input(path, e.to_string()))
    }
}

/// Command-line value if given, else the config file's, else `default`.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Like [`pick`] for a path that has no default.
pub fn require_path(flag: &Option<PathBuf>, file: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| file.clone())
        .ok_or_else(|| Error::InvalidArgument(format!("--{name} is required")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None, None, 3), 3);
    }

    #[test]
    fn rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"window_days": 3, "bogus": 1}"#).unwrap();
        assert!(FileConfig::load(&p).is_err());
        std::fs::write(&p, r#"{"window_days": 3, "preset": "experiment"}"#).unwrap();
        let c = FileConfig::load(&p).unwrap();
        assert_eq!(c.window_days, Some(3.0));
        assert_eq!(c.preset, Some(Preset::Experiment));
    }

    #[test]
    fn presets() {
        assert_eq!((Preset::Gab.dim(), Preset::Gab.min_count(), Preset::Gab.bins()), (300, 10, "10,100"));
        assert_eq!(
            (Preset::Experiment.dim(), Preset::Experiment.min_count(), Preset::Experiment.bins()),
            (90, 7, "2")
        );
    }
}
