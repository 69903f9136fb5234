use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaplabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("expansion terminates: frequency is rational {p}/{q}")]
    Rational { p: u64, q: u64 },

    #[error("precision exhausted: need at least {required_digits} continued-fraction digits (have {available})")]
    PrecisionExhausted { required_digits: usize, available: usize },

    #[error("digit overflow: at most {max_feasible} digits fit the {max_bits}-bit budget")]
    DigitOverflow { max_feasible: usize, max_bits: u64 },

    #[error("rotation number did not converge across starts (spread {spread:.3e}, tolerance {tol:.3e})")]
    NonConvergence { spread: f64, tol: f64 },

    #[error("near-singular matrix: {0}")]
    NearSingular(String),

    #[error("degree methods disagree: winding {winding}, zero count {zeros}")]
    DegreeDisagreement { winding: i64, zeros: i64 },

    #[error("column nearly vanishes: min norm {0:.3e}")]
    VanishingColumn(f64),

    #[error("resonant collapse: det B = {0:.3e}")]
    ResonantCollapse(f64),

    #[error("small divisor below threshold at k = {0:?}")]
    SmallDivisor(Vec<i64>),

    #[error("residual {residual:.3e} exceeds tolerance {tol:.3e}: {what}")]
    Residual { what: String, residual: f64, tol: f64 },

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<GaplabError>,
    },
}

impl GaplabError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        GaplabError::InvalidInput(msg.into())
    }

    pub fn at(self, stage: &'static str) -> Self {
        GaplabError::Stage { stage, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, GaplabError>;
