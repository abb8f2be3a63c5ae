use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("range {range:e} m is below the polar-chart floor {floor:e} m")]
    SingularRange { range: f64, floor: f64 },

    #[error("non-finite {quantity} at r_c={range}, alpha={alpha}, x_e={filter}")]
    UnboundedSample {
        quantity: &'static str,
        range: f64,
        alpha: f64,
        filter: f64,
    },

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A configuration problem tied to a dotted field path such as `es.k`.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
