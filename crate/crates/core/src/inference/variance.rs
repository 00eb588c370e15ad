use nalgebra::DMatrix;
use rayon::prelude::*;

use super::objective::Objective;
use crate::error::{Error, Result};

/// Tolerance on negative diagonal entries of the sandwich covariance.
const NEG_VARIANCE_TOL: f64 = 1e-10;

/// Central-difference step for coordinate value `x`.
pub fn fd_step(x: f64) -> f64 {
    (1e-4 * x.abs()).max(1e-5)
}

fn shifted(theta: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut t = theta.to_vec();
    for &(i, d) in moves {
        t[i] += d;
    }
    t
}

/// Hessian of `f` at `theta` by central differences in the given
/// parameterization, symmetrized.
pub fn numerical_hessian<F>(f: F, theta: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let h: Vec<f64> = theta.iter().map(|&x| fd_step(x)).collect();
    numerical_hessian_with_steps(f, theta, &h)
}

/// [`numerical_hessian`] with explicit per-coordinate steps.
pub fn numerical_hessian_with_steps<F>(f: F, theta: &[f64], h: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let p = theta.len();
    if h.len() != p || h.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument("need one positive step per coordinate".into()));
    }
    let f0 = f(theta)?;
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i..p).map(move |j| (i, j))).collect();
    let entries = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<f64> {
            if i == j {
                let fp = f(&shifted(theta, &[(i, h[i])]))?;
                let fm = f(&shifted(theta, &[(i, -h[i])]))?;
                Ok((fp - 2.0 * f0 + fm) / (h[i] * h[i]))
            } else {
                let fpp = f(&shifted(theta, &[(i, h[i]), (j, h[j])]))?;
                let fpm = f(&shifted(theta, &[(i, h[i]), (j, -h[j])]))?;
                let fmp = f(&shifted(theta, &[(i, -h[i]), (j, h[j])]))?;
                let fmm = f(&shifted(theta, &[(i, -h[i]), (j, -h[j])]))?;
                Ok((fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut m = DMatrix::zeros(p, p);
    for (&(i, j), &v) in pairs.iter().zip(&entries) {
        if !v.is_finite() {
            return Err(Error::Numerical(format!("non-finite Hessian entry ({i}, {j})")));
        }
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    Ok((&m + m.transpose()) * 0.5)
}

/// Sensitivity matrix: minus the Hessian of the total log-likelihood.
pub fn h_hat(objective: &dyn Objective, theta: &[f64]) -> Result<DMatrix<f64>> {
    let steps = objective.fd_steps(theta);
    Ok(-numerical_hessian_with_steps(|t| Ok(objective.loglik(t)?.value), theta, &steps)?)
}

/// Per-block score vectors (rows) by central differences of each block's
/// log-likelihood contribution.
pub fn block_scores(objective: &dyn Objective, theta: &[f64]) -> Result<DMatrix<f64>> {
    let p = theta.len();
    let steps = objective.fd_steps(theta);
    let cols = (0..p)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let h = steps[i];
            let plus = objective.evaluate(&shifted(theta, &[(i, h)]))?.per_block;
            let minus = objective.evaluate(&shifted(theta, &[(i, -h)]))?.per_block;
            Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let t = cols.first().map_or(0, |c| c.len());
    let s = DMatrix::from_fn(t, p, |r, c| cols[c][r]);
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite block score".into()));
    }
    Ok(s)
}

/// Variability matrix: sum over blocks of score outer products.
pub fn j_hat(objective: &dyn Objective, theta: &[f64]) -> Result<DMatrix<f64>> {
    let s = block_scores(objective, theta)?;
    Ok(s.transpose() * s)
}

/// Sandwich variance quantities at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct Variance {
    pub h: DMatrix<f64>,
    pub j: DMatrix<f64>,
    /// `H J^{-1} H`; `None` when `J` is singular.
    pub g: Option<DMatrix<f64>>,
    /// `H^{-1} J H^{-1}`.
    pub covariance: DMatrix<f64>,
    pub std_errors: Vec<f64>,
}

/// Godambe information `G = H (J \ H)` and standard errors
/// `sqrt(diag(H^{-1} J H^{-1}))`.
pub fn godambe(h: &DMatrix<f64>, j: &DMatrix<f64>) -> Result<Variance> {
    let p = h.nrows();
    if h.ncols() != p || j.nrows() != p || j.ncols() != p {
        return Err(Error::InvalidArgument("H and J must be square matrices of equal size".into()));
    }
    let hlu = h.clone().lu();
    let hinv = hlu
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Numerical("sensitivity matrix H is singular".into()))?;
    let g = j.clone().lu().solve(h).map(|x| h * x).filter(|m| m.iter().all(|v| v.is_finite()));
    let cov = &hinv * j * hinv.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    let mut std_errors = Vec::with_capacity(p);
    for i in 0..p {
        let v = cov[(i, i)];
        if v < -NEG_VARIANCE_TOL || v.is_nan() {
            return Err(Error::Numerical(format!("negative sandwich variance {v} for parameter {i}")));
        }
        std_errors.push(v.max(0.0).sqrt());
    }
    Ok(Variance { h: h.clone(), j: j.clone(), g, covariance: cov, std_errors })
}

/// `H`, `J` and the Godambe quantities of `objective` at `theta`.
pub fn sandwich(objective: &dyn Objective, theta: &[f64]) -> Result<Variance> {
    let h = h_hat(objective, theta)?;
    let j = j_hat(objective, theta)?;
    godambe(&h, &j)
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}
