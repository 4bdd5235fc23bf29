use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{quantity} must be {requirement}, got {value}")]
    Domain {
        quantity: &'static str,
        requirement: &'static str,
        value: f64,
    },

    #[error("piezo voltage {v_pzt} V is at or beyond contact (V0_PZT = {v0_pzt} V)")]
    Contact { v_pzt: f64, v0_pzt: f64 },

    #[error("degenerate design matrix: {0}")]
    Degenerate(String),

    #[error("non-attractive curvature at V_PZT = {v_pzt} V (quadratic coefficient {c2})")]
    NonAttractive { v_pzt: f64, c2: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("fit did not converge: {reason} (last iterates: {trace:?})")]
    NonConvergence { reason: String, trace: Vec<[f64; 3]> },

    #[error("quadrature did not converge on [{lower}, {upper}]: error estimate {estimate:e} above tolerance {tolerance:e}")]
    Quadrature {
        lower: f64,
        upper: f64,
        estimate: f64,
        tolerance: f64,
    },

    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("malformed data: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable, machine-readable class name.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::Contact { .. } => "contact",
            Error::Degenerate(_) => "degenerate",
            Error::NonAttractive { .. } => "non_attractive",
            Error::InsufficientData(_) => "insufficient_data",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Quadrature { .. } => "quadrature",
            Error::Config { .. } => "config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_positive(quantity: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain {
            quantity,
            requirement: "strictly positive and finite",
            value,
        })
    }
}

pub(crate) fn ensure_tilt(alpha: f64) -> Result<f64> {
    if alpha.abs() < 1.0 {
        Ok(alpha)
    } else {
        Err(Error::Domain {
            quantity: "tilt parameter alpha",
            requirement: "of magnitude below 1",
            value: alpha,
        })
    }
}
