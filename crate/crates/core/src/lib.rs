//! LiDAR range-image toolkit.
//!
//! Scan ingestion, spherical projection to multi-channel range images,
//! normal estimation, stripe-artifact repair, boundary extraction, the loss
//! kernels of a boundary-aware domain-adaptation objective (value plus
//! analytic gradient), and IoU/mIoU evaluation.
//!
//! Data-parallel inner loops run on rayon when the `parallel` feature is
//! enabled (the default) and fall back to plain iterators otherwise. Results
//! are identical either way.

pub mod boundary;
pub mod error;
pub mod grid;
pub mod io;
pub mod losses;
pub mod metrics;
mod par;
pub mod projection;
pub mod restore;
pub mod surface;
pub mod types;

pub use error::{Error, Result};
pub use grid::Grid;
pub use types::{
    validate_stack, BoundaryMap, ClassProbs, FeatureMatrix, LabelImage, LossWeights, Point,
    PointCloud, RangeImageStack, SensorModel, Violation,
};

/// Label value reserved for unlabeled / ignored samples.
pub const IGNORE_LABEL: u32 = 0;
