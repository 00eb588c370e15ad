//! Symbolic composite likelihood for histogram-valued data.
//!
//! Micro-data (N observations at K sites) are aggregated into sparse
//! K-dimensional histograms; pairwise or triplewise marginal histograms of
//! those are then fitted with a multinomial composite likelihood whose bin
//! probabilities come from the Gaussian (Smith) max-stable model.
//!
//! Module map:
//! - [`histogram`]: bin grids, temporal aggregation, merging, marginal projection,
//!   block maxima and detrending.
//! - [`models`]: GEV margins, normal CDFs and the Smith joint CDF for 2 and 3 sites.
//! - [`likelihood`]: bin probabilities, symbolic and classic composite log-likelihoods.
//! - [`inference`]: Nelder–Mead fitting, sandwich variance, return levels, qq pairs.
//! - [`simulate`]: seeded site layouts and Smith process realisations.
//! - [`io`]: CSV and JSON interchange formats.

pub mod error;
pub mod histogram;
pub mod inference;
pub mod io;
pub mod likelihood;
pub mod models;
pub mod simulate;

pub use error::{Error, Result};
pub use histogram::{
    aggregate, block_maxima, detrend, make_grid, marginalize, merge, BinGrid, BinIndex,
    HistogramSeries, MarginalHistogram, SparseHistogram,
};
pub use inference::{
    fit, godambe, gev_qq, h_hat, j_hat, numerical_hessian, return_level, FitOptions, FitResult,
    Objective, ParamKind, ParamVector,
};
pub use likelihood::{
    bin_probability, classic_composite_loglik, count_terms, symbolic_composite_loglik,
    symbolic_marginal_loglik, ClassicComposite, CompositeConfig, LogLikValue, SymbolicComposite,
    TermCounts, TupleSet,
};
pub use models::{
    bivariate_normal_cdf, extremal_coefficient, gev_cdf, gev_quantile, gev_v, margin_at,
    smith_cdf, std_normal_cdf, Dependence, GevParams, MarginSpec, Site, SiteLayout, SmithJoint,
    SmithParams,
};
pub use simulate::{sample_sites, simulate_smith, SimConfig, Window};
