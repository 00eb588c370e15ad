use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value {value} at row {row}, column {column}")]
    NonFiniteData { row: usize, column: usize, value: f64 },

    #[error("row {row}, margin {margin}: value {value} lies outside the bin grid [{lo}, {hi}]")]
    OutsideGrid { row: usize, margin: usize, value: f64, lo: f64, hi: f64 },

    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("scale parameter must be positive at site {site} (got {sigma})")]
    NonPositiveScale { site: usize, sigma: f64 },

    #[error("sites {0} and {1} coincide under the dependence metric")]
    CoincidentSites(usize, usize),

    #[error("bin probability {value:e} is negative beyond tolerance for sites {sites:?}, bin {bin:?}")]
    NegativeProbability { sites: Vec<usize>, bin: Vec<u32>, value: f64 },

    #[error("finite-difference density {value:e} is not positive at row {row}, sites {sites:?}")]
    NonPositiveDensity { row: usize, sites: Vec<usize>, value: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures that stem from the numerical pipeline rather than
    /// from malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::NegativeProbability { .. } | Error::NonPositiveDensity { .. }
        )
    }
}
