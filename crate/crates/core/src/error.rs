use thiserror::Error;

/// Errors from parsing or validating a simulation configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// TOML syntax error; the message carries the line/column location.
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    /// A structurally valid document that violates an invariant.
    #[error("config validation error: {0}")]
    Invalid(String),
}

impl ConfigError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        ConfigError::Invalid(msg.into())
    }
}

/// Errors from the receiver chain stream processing.
#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error("event at {time_us} us is outside the open counter window starting at {window_start_us} us")]
    EventOrder { time_us: f64, window_start_us: f64 },
}

/// Errors from building or running a simulation world.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("grid cell size {cell_size} um is below the maximum particle diameter {max_diameter} um")]
    CellSizeTooSmall { cell_size: f64, max_diameter: f64 },
    #[error("receiver cell side {side} um exceeds the vessel circumference {circumference} um")]
    DegenerateTiling { side: f64, circumference: f64 },
    #[error("{0}")]
    Config(#[from] ConfigError),
}

/// Errors from the experiment harness.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Sim(#[from] SimError),
    #[error("experiment requires {expected} frame bits, got {actual}")]
    BitCount { expected: usize, actual: usize },
    #[error("sweep experiment requires non-empty delay-line and threshold lists")]
    EmptySweep,
    #[error("horizon {horizon_us} us exceeds simulation duration {duration_us} us")]
    HorizonBeyondDuration { horizon_us: f64, duration_us: f64 },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    pub fn io(path: impl Into<std::path::PathBuf>, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.into(),
            source,
        }
    }
}
