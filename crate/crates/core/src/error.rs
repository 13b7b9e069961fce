//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Erosion removed every foreground pixel; reduce the radius.
    #[error("geometry.dilate_erode: erosion of radius {radius} left no foreground pixels")]
    ErosionEmpty { radius: u32 },

    /// Contour tracing requires exactly one 4-connected component.
    #[error("geometry.trace_contour: expected exactly one 4-connected component, found {count}")]
    MultiComponent { count: usize },

    /// Polygon simplification collapsed below 3 vertices.
    #[error("geometry.douglas_peucker: simplification collapsed below 3 vertices")]
    DegeneratePolygon,

    /// Operation needs at least one foreground pixel.
    #[error("{op}: mask has no foreground pixels")]
    NoForeground { op: &'static str },

    #[error("{op}: invalid parameters: {msg}")]
    InvalidParams { op: &'static str, msg: String },

    #[error("{op}: shape mismatch: {msg}")]
    ShapeMismatch { op: &'static str, msg: String },

    #[error("model.build_model: invalid config: {0}")]
    InvalidConfig(String),

    #[error("trainer.train: config does not match manifest: {0}")]
    ConfigMismatch(String),

    /// A loss term became NaN/Inf; the offending term is named.
    #[error("trainer.train: non-finite loss term `{term}` at step {step}")]
    NonFiniteLoss { term: &'static str, step: u64 },

    /// A contrastive class has no certain pixels to pool from.
    #[error("confidence.select_samples: no certain pixels for class {class}")]
    EmptyPools { class: u8 },

    #[error("dataset.load: missing file {0}")]
    MissingFile(PathBuf),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn invalid_params(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidParams {
            op,
            msg: msg.into(),
        }
    }

    pub fn shape_mismatch(op: &'static str, msg: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            msg: msg.into(),
        }
    }
}
