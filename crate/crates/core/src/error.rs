use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid delay bound: d = {0} must satisfy 0 <= d < 1")]
    InvalidDelayBound(f64),
    #[error("malformed spec: {0}")]
    MalformedSpec(String),
    #[error("time {0} is outside the domain t >= 0")]
    Domain(f64),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("inconsistent initial data: {0}")]
    InconsistentInitialData(String),
    #[error("history timestamps out of order: last {last}, pushed {pushed}")]
    Ordering { last: f64, pushed: f64 },
    #[error("history underflow: query {query} outside stored span [{start}, {end}]")]
    HistoryUnderflow { query: f64, start: f64, end: f64 },
    #[error("numerical instability at step {step} (t = {t})")]
    Instability { step: usize, t: f64 },
    #[error("hypothesis violation at step {step} (t = {t}): {detail}")]
    HypothesisViolation { step: usize, t: f64, detail: String },
    #[error("record stream error: {0}")]
    Stream(String),
    #[error("insufficient decay data: {0}")]
    InsufficientDecayData(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("equivalence violation at t = {t}: E = 0 but L = {l}")]
    EquivalenceViolation { t: f64, l: f64 },
    #[error("certificate failed ({0}); rerun with the override flag to explore")]
    Uncertified(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 1 usage or configuration, 2 failed certificate,
    /// 3 numerical instability.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Uncertified(_) => 2,
            Error::Instability { .. } => 3,
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::Usage("x".into()).exit_code(), 1);
        assert_eq!(Error::Config("x".into()).exit_code(), 1);
        assert_eq!(Error::Uncertified("mu2".into()).exit_code(), 2);
        assert_eq!(Error::Instability { step: 3, t: 0.1 }.exit_code(), 3);
    }
}
