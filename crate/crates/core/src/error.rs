use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid label {label} at pixel ({x}, {y}); palette has {k} classes")]
    InvalidLabel { x: usize, y: usize, label: u32, k: usize },

    #[error("invalid class id {class_id}; palette has {k} classes")]
    InvalidClass { class_id: u32, k: usize },

    #[error("malformed tensor: {0}")]
    MalformedTensor(String),

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("instance mask has no set pixels")]
    EmptyMask,

    #[error("scene {w}x{h} is too small for the layered layout (minimum 8x8)")]
    SceneTooSmall { w: usize, h: usize },

    #[error("invalid palette: {0}")]
    Palette(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dataset is empty")]
    DatasetEmpty,

    #[error("dataset has no usable instances: {0}")]
    NoInstances(String),

    #[error("non-finite loss at step {step} (epoch {epoch}): {detail}")]
    NonFiniteLoss { step: usize, epoch: usize, detail: String },

    #[error("degenerate shape: {area} set pixels, need at least {min_area}")]
    DegenerateShape { area: usize, min_area: usize },

    #[error("placement error: {0}")]
    Placement(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("generation run failed: {0}")]
    Run(String),

    #[error("I/O error on {path}: {source}")]
    Path { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("png decode: {0}")]
    PngDecode(#[from] png::DecodingError),

    #[error("png encode: {0}")]
    PngEncode(#[from] png::EncodingError),

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),
}

impl Error {
    pub(crate) fn path(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Path { path: path.into(), source }
    }
}
