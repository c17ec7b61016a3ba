//! Learning-free LiDAR global localization on sparse scan maps.
//!
//! A scan is rasterized into a bird's-eye-view feature grid, projected into a
//! sinogram by a discrete Radon transform, and reduced to a translation
//! invariant spectral representation (TING) by taking row-wise DFT magnitudes.
//! Circular cross-correlation of normalized TINGs yields a roto-translation
//! invariant place score (RING) together with a global 1-DoF rotation
//! estimate; 2D correlation of rotation-compensated BEVs recovers the planar
//! translation, and point-to-point ICP refines the final metric pose.
//!
//! The crate is organized around that pipeline:
//!
//! * [`scan_io`] — point cloud / pose types, file formats, preprocessing
//! * [`features`] — per-point local features and BEV rasterization
//! * [`transforms`] — Radon transform, spectral representations, correlation
//! * [`localization`] — map index, retrieval, pose solvers, ICP
//! * [`evaluation`] — ground-truth association and metrics
//! * [`synthetic`] — deterministic scene/scan generation and naive oracles
//! * [`selfcheck`] — executable property suite used by the CLI

pub mod config;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod kdtree;
pub mod localization;
pub mod scan_io;
pub mod selfcheck;
pub mod synthetic;
pub mod tensor;
pub mod transforms;

mod linalg;

pub use config::{FeatureKind, PipelineConfig};
pub use error::{Error, Result};
pub use features::{FeatureBev, GridConfig, NeighborhoodStats, PointFeature};
pub use localization::{
    IcpConfig, IcpResult, LocalizationResult, MapIndex, PlaceCandidate, RotationEstimate,
    TranslationEstimate,
};
pub use scan_io::{CloudFormat, Point3, PointCloud, Pose2, Pose3, PreprocessConfig, ScanRecord};
pub use transforms::{CorrMap1d, CorrMap2d, NormalizedTing, Sinogram, Ting};
