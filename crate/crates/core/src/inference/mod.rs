//! Fitting composite log-likelihoods and sandwich variance estimation.

mod diagnostics;
mod objective;
mod optimize;
mod params;
mod variance;

pub use diagnostics::{default_theta0, default_theta0_data, gev_qq, return_level};
pub use objective::{scaled_steps, ClassicObjective, FnObjective, Objective, SymbolicObjective};
pub use optimize::{default_steps, fit, fit_scaled, nelder_mead, FitOptions, FitResult, Minimum};
pub use params::{ParamKind, ParamVector};
pub use variance::{
    block_scores, fd_step, godambe, h_hat, j_hat, numerical_hessian, numerical_hessian_with_steps, sandwich, Variance,
};
