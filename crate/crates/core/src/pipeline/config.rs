use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rank_pooling::{HierarchyConfig, RankPoolParams};
use crate::representations::{BackgroundParams, Channel, GmmParams};
use crate::segmentation::QomParams;

/// Every tunable of a run. Serialised as TOML with one table per module.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub channels: Vec<Channel>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    /// Side length the baseline classifier resamples images to.
    pub baseline_size: u32,
    /// Multiplier from raw depth units to the values DDI pooling sees
    /// (0.001 turns millimetres into metres).
    pub depth_scale: f64,
    pub qom: QomParams,
    pub background: BackgroundParams,
    pub gmm: GmmParams,
    pub pool: RankPoolParams,
    pub hierarchy: HierarchyConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            channels: Channel::ALL.to_vec(),
            output_dir: PathBuf::from("out"),
            seed: 0,
            jobs: 1,
            baseline_size: 32,
            depth_scale: 0.001,
            qom: QomParams::default(),
            background: BackgroundParams::default(),
            gmm: GmmParams::default(),
            pool: RankPoolParams::default(),
            hierarchy: HierarchyConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::format("config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::InvalidParameter("at least one channel must be enabled".into()));
        }
        if self.baseline_size < 2 {
            return Err(Error::InvalidParameter("baseline_size must be >= 2".into()));
        }
        if !(self.depth_scale > 0.0 && self.depth_scale.is_finite()) {
            return Err(Error::InvalidParameter(
                "depth_scale must be positive and finite".into(),
            ));
        }
        self.qom.validate()?;
        self.background.validate()?;
        self.gmm.validate()?;
        self.pool.validate()?;
        self.hierarchy.validate()
    }

    /// Hierarchy used for `channel`; depth-valued input gets `depth_scale`.
    pub fn hierarchy_for(&self, channel: Channel) -> HierarchyConfig {
        match channel {
            Channel::Ddi => HierarchyConfig {
                input_scale: self.hierarchy.input_scale * self.depth_scale,
                ..self.hierarchy.clone()
            },
            Channel::Ddni | Channel::Ddmni => self.hierarchy.clone(),
        }
    }

    /// The GMM seed follows the run seed.
    pub fn gmm_params(&self) -> GmmParams {
        GmmParams {
            seed: self.seed,
            ..self.gmm.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trips() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml();
        assert!(text.contains("[qom]") && text.contains("[hierarchy]") && text.contains("threshold_qom = 60"));
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = PipelineConfig::from_toml("channels = [\"ddi\"]\n[pool]\nlambda = 10.0\n").unwrap();
        assert_eq!(cfg.channels, vec![Channel::Ddi]);
        assert_eq!(cfg.pool.lambda, 10.0);
        assert_eq!(cfg.hierarchy.window, 3);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PipelineConfig::from_toml("channels = []").is_err());
        assert!(PipelineConfig::from_toml("[hierarchy]\nwindow = 1").is_err());
        assert!(PipelineConfig::from_toml("bogus = 1").is_err());
    }
}
