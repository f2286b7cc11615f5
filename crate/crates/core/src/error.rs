use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("subcarrier index {index} out of range 1..={count}")]
    SubcarrierOutOfRange { index: usize, count: usize },

    #[error("codebook index {index} out of range for {bits}-bit grid")]
    IndexOutOfRange { index: u64, bits: u32 },

    #[error("payload truncated: need {needed} bits, have {available}")]
    TruncatedPayload { needed: usize, available: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("channel has zero energy")]
    ZeroEnergyChannel,

    #[error("non-finite {loss_name} loss {value} at epoch {epoch}, iteration {iteration}")]
    NonFiniteLoss {
        loss_name: &'static str,
        value: f64,
        epoch: usize,
        iteration: usize,
    },

    #[error("malformed {what}: {detail}")]
    MalformedFile { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
