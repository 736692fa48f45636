use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid conditional table: {0}")]
    InvalidTable(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("support violation at index {index}: p = {p:e} but reference mass is zero")]
    SupportViolation { index: usize, p: f64 },

    #[error("synset block {block} has zero probability under the model")]
    ZeroEvidence { block: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible target: {binding} constraint cannot be met (floor {floor:e})")]
    Infeasible { binding: &'static str, floor: f64 },

    #[error("solver did not converge after {iters} iterations (last rate {last_rate:e} bits)")]
    NonConvergence { iters: usize, last_rate: f64 },

    #[error("symbol {symbol} at position {position} is outside the alphabet")]
    SymbolOutOfRange { position: usize, symbol: usize },

    #[error("bitstream header: {0}")]
    Header(String),

    #[error("bitstream was produced for a different partition (hash {found:#018x}, expected {expected:#018x})")]
    ModelMismatch { expected: u64, found: u64 },

    #[error("corrupted payload at bit offset {bit_offset}")]
    CorruptPayload { bit_offset: u64 },

    #[error("config: {0}")]
    Config(String),
}
