use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::events::SplitSpec;
use crate::nn::TrainConfig;
use crate::pipeline::{Mode, PipelineConfig};
use crate::synth::SynthConfig;

/// Everything a run depends on. The top-level `seed` overrides the seeds
/// inside `[train]` and `[synth]`, so one number pins the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus: Option<PathBuf>,
    pub out: PathBuf,
    pub mode: String,
    pub split: String,
    pub relief_top: Option<usize>,
    pub relief_k: usize,
    pub train: TrainConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            corpus: None,
            out: PathBuf::from("work"),
            mode: "two-stage".into(),
            split: "60%".into(),
            relief_top: None,
            relief_k: 10,
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.mode()?;
        self.split_spec()?;
        self.pipeline().train.validate()?;
        if self.relief_top == Some(0) || self.relief_k == 0 {
            return Err(Error::Config("relief_top and relief_k must be positive".into()));
        }
        Ok(())
    }

    pub fn mode(&self) -> Result<Mode> {
        self.mode.parse()
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        self.split.parse()
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            train: TrainConfig {
                seed: self.seed,
                ..self.train.clone()
            },
            relief_top: self.relief_top,
            relief_k: self.relief_k,
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    /// SHA-256 of the canonical TOML rendering, paths excluded so that the
    /// same settings hash equally wherever they run.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            corpus: None,
            out: PathBuf::new(),
            ..self.clone()
        };
        let text = toml::to_string(&canonical).unwrap_or_default();
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::from_toml("seed = 7\nsplit = \"60/40\"\n[train]\nepochs = 5\n[synth]\nn_traces = 3\n").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.pipeline().train.seed, 7);
        assert_eq!(cfg.pipeline().train.epochs, 5);
        assert_eq!(cfg.pipeline().train.batch_size, 128);
        assert_eq!(cfg.synth_config().seed, 7);
        assert_eq!(cfg.synth_config().n_traces, 3);
        assert_eq!(cfg.mode().unwrap(), Mode::TwoStage);
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(matches!(RunConfig::from_toml("sede = 1"), Err(Error::Config(_))));
        let cfg = RunConfig {
            mode: "three-stage".into(),
            ..RunConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(matches!(
            RunConfig::load(Path::new("/nonexistent/run.toml")),
            Err(Error::MissingArtifact(_))
        ));
    }

    #[test]
    fn hash_ignores_paths() {
        let a = RunConfig::default();
        let b = RunConfig {
            out: "elsewhere".into(),
            ..RunConfig::default()
        };
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig { seed: 1, ..RunConfig::default() };
        assert_ne!(a.hash(), c.hash());
    }
}
