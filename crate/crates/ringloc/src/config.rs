//! Pipeline configuration: a single TOML file with full-key validation.
//!
//! Unknown keys are rejected so an index built with one config cannot be
//! silently queried with another; the index manifest stores a hash of the
//! canonical serialized config for the same reason.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::GridConfig;
use crate::localization::IcpConfig;
use crate::scan_io::PreprocessConfig;

/// Which BEV channels to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Single channel of per-column occupied z-bin counts.
    Occupancy,
    /// Six per-point neighborhood features, channel-wise max pooled.
    Geometric6,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub grid: GridConfig,
    pub features: FeatureKind,
    /// Normalize eigenvalues by their sum inside the entropy feature.
    pub entropy_normalized: bool,
    pub k_neighbors: usize,
    pub preprocess: PreprocessConfig,
    /// Number of place candidates carried into the pose-estimation stage.
    pub top_k: usize,
    /// Minimum top-1 place score; below it the result is flagged no-match.
    pub accept_threshold: f64,
    pub icp: IcpConfig,
    /// Refine the translation peak with a 3-point parabolic fit per axis.
    pub subpixel: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            grid: GridConfig::default(),
            features: FeatureKind::Geometric6,
            entropy_normalized: true,
            k_neighbors: 30,
            preprocess: PreprocessConfig::default(),
            top_k: 1,
            accept_threshold: DEFAULT_ACCEPT_THRESHOLD,
            icp: IcpConfig::default(),
            subpixel: true,
        }
    }
}

/// Calibrated on synthetic negatives: disjoint-scene queries score below
/// 0.55 at the 99th percentile, matching queries well above 0.75.
pub const DEFAULT_ACCEPT_THRESHOLD: f64 = 0.65;

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.preprocess.validate()?;
        self.icp.validate()?;
        if self.k_neighbors < 3 {
            return Err(Error::InvalidConfig("k_neighbors must be >= 3".into()));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be >= 1".into()));
        }
        if !self.accept_threshold.is_finite() || self.accept_threshold.abs() > 1.0 {
            return Err(Error::InvalidConfig(
                "accept_threshold must be in [-1, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        match self.features {
            FeatureKind::Occupancy => 1,
            FeatureKind::Geometric6 => crate::features::PointFeature::CHANNELS,
        }
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Stable hash of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_hash_is_stable() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.hash(), cfg.clone().hash());
        let other = PipelineConfig {
            top_k: 5,
            ..PipelineConfig::default()
        };
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<PipelineConfig>("unknown_key = 1\n");
        assert!(err.is_err());
        let err = toml::from_str::<PipelineConfig>("[grid]\nsize = 40\nbogus = 2\n");
        assert!(err.is_err());
    }

    #[test]
    fn partial_files_use_defaults() {
        let cfg: PipelineConfig =
            toml::from_str("top_k = 3\n[grid]\nsize = 40\nextent = 20.0\n").unwrap();
        assert_eq!(cfg.top_k, 3);
        assert_eq!(cfg.grid.size, 40);
        assert_eq!(cfg.grid.extent, 20.0);
        assert_eq!(cfg.k_neighbors, 30);
    }

    #[test]
    fn load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        let cfg = PipelineConfig {
            features: FeatureKind::Occupancy,
            ..PipelineConfig::default()
        };
        std::fs::write(&path, toml::to_string(&cfg).unwrap()).unwrap();
        let loaded = PipelineConfig::load(&path).unwrap();
        assert_eq!(loaded, cfg);
        assert_eq!(loaded.hash(), cfg.hash());
    }
}
