//! Weakly-supervised lesion segmentation from bounded-polygon annotations.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! * [`mask`] / [`geometry`] — binary-mask morphology, contour tracing,
//!   polygon simplification, and generation of weak annotations (bounded
//!   polygons, scribbles, boxes, rectangles) from dense masks.
//! * [`dataset`] — deterministic synthetic lesion datasets behind a JSON
//!   manifest, plus batch loading for training.
//! * [`model`] — a small U-shaped encoder–decoder with segmentation,
//!   per-pixel 3-class classification, and pixel-embedding heads.
//! * [`losses`] — dice, dual-mask certain loss, partial cross-entropy,
//!   classification cross-entropy, pixel contrastive loss, total objective.
//! * [`confidence`] — entropy / classification uncertainty maps, confidence
//!   fusion, pseudo-labels, and contrastive sample selection.
//! * [`trainer`] — the training loop, supervision modes, and ablations.
//! * [`evaluation`] — overlap metrics, boundary trimap analysis, annotation
//!   cost proxies, and report emission.
//!
//! Numeric code is generic over the scalar type via [`scalar::Scalar`];
//! training uses [`TrainScalar`] (f32) and verification paths use
//! [`CheckScalar`] (f64).

pub mod checkpoint;
pub mod confidence;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod losses;
pub mod mask;
pub mod model;
pub mod plot;
pub mod scalar;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar used on the training path (throughput matters).
pub type TrainScalar = f32;
/// Scalar used by verification paths such as finite-difference checks.
pub type CheckScalar = f64;

/// Model specialized to the training scalar.
pub type TrainModel = model::Model<TrainScalar>;
/// Model specialized to the verification scalar.
pub type CheckModel = model::Model<CheckScalar>;
