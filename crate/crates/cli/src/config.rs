use std::path::{Path, PathBuf};

use relnet_core::backnet::SmoParams;
use relnet_core::corpus::{EncodeConfig, UnlabeledPolicy};
use relnet_core::features::FeatureConfig;
use relnet_core::harness::{NnGridSpec, SelectOn, SvmGridSpec, DEV_FRACTION};
use relnet_core::optim::{Topology, TrainConfig};
use relnet_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Everything a run can be configured with. Loaded from `--config`, then
/// overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every random stream derives from it.
    pub seed: u64,
    /// Worker threads for grid sweeps.
    pub workers: usize,
    pub select_on: SelectOn,
    pub dev_fraction: f64,
    /// Words seen fewer times map to the unknown id.
    pub min_count: usize,
    pub unlabeled: UnlabeledPolicy,
    /// word2vec text file; random word vectors when absent.
    pub embeddings: Option<PathBuf>,
    pub encode: EncodeConfig,
    pub features: FeatureConfig,
    pub topology: Topology,
    pub dropout: f64,
    pub train: TrainConfig,
    pub svm: SmoParams,
    /// Network grid; the standard grid of `topology`'s family when absent.
    pub nn_grid: Option<NnGridSpec>,
    pub svm_grid: SvmGridSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            select_on: SelectOn::Dev,
            dev_fraction: DEV_FRACTION,
            min_count: 1,
            unlabeled: UnlabeledPolicy::Error,
            embeddings: None,
            encode: EncodeConfig::default(),
            features: FeatureConfig::default(),
            topology: Topology::Cnn { filters: 150, windows: vec![2, 3, 4] },
            dropout: 0.25,
            train: TrainConfig::default(),
            svm: SmoParams { c: 1.0, gamma: 0.1, ..SmoParams::default() },
            nn_grid: None,
            svm_grid: SvmGridSpec::default(),
        }
    }
}

impl RunConfig {
    /// Parses a config file; the flag says whether it sets `seed`.
    pub fn load(path: &Path) -> Result<(Self, bool)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad =
            |e: serde_json::Error| Error::Parse { path: path.to_path_buf(), line: e.line(), message: e.to_string() };
        let cfg = serde_json::from_str(&text).map_err(bad)?;
        let raw: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
        Ok((cfg, raw.get("seed").is_some()))
    }

    /// Config file (or defaults) with flag overrides. The seed comes from
    /// `--seed`, else the config file, else `RELNET_SEED`, else 0.
    pub fn resolve(
        path: Option<&Path>,
        seed: Option<u64>,
        workers: Option<usize>,
        select_on: Option<SelectOn>,
    ) -> Result<Self> {
        let (mut cfg, file_seed) = match path {
            Some(p) => Self::load(p)?,
            None => (Self::default(), false),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        } else if !file_seed {
            if let Ok(v) = std::env::var("RELNET_SEED") {
                cfg.seed = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("RELNET_SEED=`{v}` is not an unsigned integer")))?;
            }
        }
        if let Some(w) = workers {
            cfg.workers = w;
        }
        if let Some(s) = select_on {
            cfg.select_on = s;
        }
        if cfg.workers == 0 {
            return Err(Error::InvalidParameter("workers must be at least 1".into()));
        }
        cfg.train.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn nn_grid(&self) -> NnGridSpec {
        self.nn_grid.clone().unwrap_or_else(|| NnGridSpec::standard(self.topology.kind()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 3}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"train": {"epoch": 3}}"#).is_err());
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 3, "train": {"epochs": 5}}"#).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.train.epochs, 5);
        assert_eq!(cfg.train.batch_size, 32);
        assert_eq!(cfg.encode, EncodeConfig::default());
    }

    #[test]
    fn defaults_round_trip() {
        let text = serde_json::to_string(&RunConfig::default()).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), RunConfig::default());
    }
}
