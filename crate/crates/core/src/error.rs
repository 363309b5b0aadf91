use thiserror::Error;

/// Errors raised across the curve construction pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid date {0}")]
    InvalidDate(String),
    #[error("matured instrument {bond}: settlement {settlement} is not before maturity")]
    MaturedInstrument { bond: String, settlement: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown bond id {0:?}")]
    UnknownBond(String),
    #[error("duplicate quote for {bond} on {date}")]
    DuplicateQuote { date: String, bond: String },
    #[error("payment on {date} precedes curve origin {origin}")]
    PaymentBeforeOrigin { date: String, origin: String },
    #[error("cash flow at stage {stage} lies beyond the curve grid (n = {n})")]
    BeyondGrid { stage: usize, n: usize },
    #[error("infeasible iterate: {0}")]
    InfeasibleIterate(String),
    #[error("indefinite model: nonpositive pivot {pivot:e} at stage {stage}")]
    IndefiniteModel { stage: usize, pivot: f64 },
    #[error("singular multiplier system (degenerate or duplicated constraints)")]
    SingularMultiplierSystem,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no quotes for {0}")]
    MissingData(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Parse {
            line,
            message: e.to_string(),
        }
    }
}
