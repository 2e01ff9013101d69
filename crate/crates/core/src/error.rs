use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("input error: {0}")]
    Input(String),

    /// Non-finite value encountered during optimization. `layer` is set when
    /// the offending value sits in a specific network layer.
    #[error("numerical error{}: {msg}", layer.map(|l| format!(" in layer {l}")).unwrap_or_default())]
    Numerical { layer: Option<usize>, msg: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    /// A statistic that has no value on the given input (no comparable pairs,
    /// no events, ...).
    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("calibration error: {msg} (bracket [{lo}, {hi}])")]
    Calibration { lo: f64, hi: f64, msg: String },

    #[error("mode mismatch: model is {model}, data is {data}")]
    ModeMismatch { model: String, data: String },

    #[error("model format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical {
            layer: None,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
