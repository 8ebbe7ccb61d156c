use thiserror::Error;

pub type Result<T> = std::result::Result<T, HqnnError>;

#[derive(Debug, Error)]
pub enum HqnnError {
    /// Invalid user-facing configuration (qubit counts, class lists, subset sizes).
    #[error("configuration error: {0}")]
    Config(String),

    /// Shapes, indices or lengths that do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    /// Malformed on-disk data, naming the offending field.
    #[error("format error in {field}: {message}")]
    Format { field: String, message: String },

    #[error("consistency error: {0}")]
    Consistency(String),

    /// A model was used before a required fitting step.
    #[error("state error: {0}")]
    State(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HqnnError {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        HqnnError::Structural(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        HqnnError::Config(msg.into())
    }

    pub(crate) fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        HqnnError::Format { field: field.into(), message: message.into() }
    }

    /// True for errors caused by bad input data rather than configuration or training.
    pub fn is_data_error(&self) -> bool {
        matches!(self, HqnnError::Format { .. } | HqnnError::Consistency(_) | HqnnError::Io { .. })
    }
}
