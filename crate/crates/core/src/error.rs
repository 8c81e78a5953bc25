use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid dimension {height}x{width}: both sides must be at least 2")]
    InvalidDimension { height: usize, width: usize },

    #[error("unsupported weight variant for this operation: {0}")]
    UnsupportedVariant(&'static str),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("degenerate weight: zero spectral density cannot be normalized")]
    DegenerateWeight,

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid step {t} for a schedule of {steps} steps")]
    InvalidStep { t: usize, steps: usize },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid architecture: {0}")]
    InvalidArch(String),

    #[error("non-finite loss at step {step} (parameter norm {param_norm:.6e})")]
    NonFiniteLoss { step: usize, param_norm: f64 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid band [{lo}, {hi}]")]
    InvalidBand { lo: f64, hi: f64 },

    #[error("band [{lo}, {hi}] contains no frequency bins")]
    EmptyBand { lo: f64, hi: f64 },

    #[error("corruption band covers the whole spectrum; nothing is left for recovery")]
    EmptyRecoverySpectrum,

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated {what}: expected {expected} bytes, found {got}")]
    Truncated {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from user input (bad config, bad arguments) as
    /// opposed to a failure while running.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidDimension { .. }
                | Error::InvalidWeight(_)
                | Error::InvalidSchedule(_)
                | Error::InvalidArch(_)
                | Error::InvalidBand { .. }
                | Error::EmptyRecoverySpectrum
                | Error::UnsupportedVariant(_)
        )
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, got })
    }
}
