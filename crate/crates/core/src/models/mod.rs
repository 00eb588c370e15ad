//! GEV margins, Gaussian CDFs and the Smith max-stable joint distribution.

mod gev;
mod normal;
mod sites;
mod smith;

pub use gev::{gev_cdf, gev_log_pdf, gev_quantile, gev_v, log_unit_frechet, GevParams, GUMBEL_EPS};
pub use normal::{bivariate_normal_cdf, std_normal_cdf};
pub use sites::{margin_at, MarginSpec, Site, SiteLayout};
pub use smith::{extremal_coefficient, smith_cdf, Dependence, JointCdf, SmithJoint, SmithParams};
