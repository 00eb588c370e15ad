use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::objective::Objective;
use super::params::{ParamKind, ParamVector};
use super::variance::Variance;
use crate::error::{Error, Result};
use crate::models::SmithParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Iteration cap summed over restarts.
    pub max_iter: usize,
    /// Relative spread of simplex function values required for convergence.
    pub f_tol: f64,
    /// Spread of simplex vertices (relative to `1 + |x|`) required for convergence.
    pub x_tol: f64,
    /// Base initial step in unconstrained coordinates.
    pub initial_step: f64,
    /// Restarts from the best point after a converged run.
    pub restarts: usize,
    /// Overrides the per-coordinate initial steps.
    pub steps: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iter: 5000, f_tol: 1e-8, x_tol: 1e-8, initial_step: 0.1, restarts: 3, steps: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kind: ParamKind,
    pub names: Vec<String>,
    pub theta_hat: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub floored_bins: u64,
    pub h_hat: Option<Vec<Vec<f64>>>,
    pub j_hat: Option<Vec<Vec<f64>>>,
    pub g_hat: Option<Vec<Vec<f64>>>,
    pub std_errors: Option<Vec<f64>>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl FitResult {
    pub fn theta(&self) -> ParamVector {
        ParamVector { kind: self.kind, values: self.theta_hat.clone() }
    }

    pub fn params(&self) -> Result<SmithParams> {
        self.kind.to_smith(&self.theta_hat)
    }

    pub fn attach_variance(&mut self, v: &Variance) {
        self.h_hat = Some(super::variance::rows(&v.h));
        self.j_hat = Some(super::variance::rows(&v.j));
        self.g_hat = v.g.as_ref().map(super::variance::rows);
        self.std_errors = Some(v.std_errors.clone());
    }
}

/// Outcome of a derivative-free minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead minimization of `f` from `x0` with per-coordinate initial
/// steps. Non-finite values are treated as `+inf`. Restarts from the best
/// vertex until a restart no longer improves the minimum.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], steps: &[f64], options: &FitOptions) -> Minimum {
    let n = x0.len();
    let eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut evaluations = 0;
    let mut iterations = 0;
    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0, &mut evaluations);
    let mut converged = false;

    for _round in 0..=options.restarts {
        let mut simplex: Vec<Vec<f64>> = vec![best_x.clone()];
        for i in 0..n {
            let mut v = best_x.clone();
            v[i] += steps[i];
            simplex.push(v);
        }
        let mut values: Vec<f64> = Vec::with_capacity(n + 1);
        values.push(best_f);
        for v in &simplex[1..] {
            values.push(eval(v, &mut evaluations));
        }
        let start_f = best_f;
        converged = false;

        while iterations < options.max_iter {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let f_spread = values[n] - values[0];
            let x_spread_ok = (0..n).all(|i| {
                let c = simplex[0][i];
                simplex[1..].iter().all(|v| (v[i] - c).abs() <= options.x_tol * (1.0 + c.abs()))
            });
            if f_spread <= options.f_tol * (1.0 + values[0].abs()) && x_spread_ok {
                converged = true;
                break;
            }
            iterations += 1;

            let centroid: Vec<f64> = (0..n).map(|i| simplex[..n].iter().map(|v| v[i]).sum::<f64>() / n as f64).collect();
            let along = |t: f64| -> Vec<f64> { (0..n).map(|i| centroid[i] + t * (simplex[n][i] - centroid[i])).collect() };

            let xr = along(-1.0);
            let fr = eval(&xr, &mut evaluations);
            if fr < values[0] {
                let xe = along(-2.0);
                let fe = eval(&xe, &mut evaluations);
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
                continue;
            }
            if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
                continue;
            }
            // outside contraction if the reflection beat the worst vertex, inside otherwise
            let xc = along(if fr < values[n] { -0.5 } else { 0.5 });
            let fc = eval(&xc, &mut evaluations);
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
                continue;
            }
            for k in 1..=n {
                let v: Vec<f64> = (0..n).map(|i| simplex[0][i] + 0.5 * (simplex[k][i] - simplex[0][i])).collect();
                values[k] = eval(&v, &mut evaluations);
                simplex[k] = v;
            }
        }

        let (ib, fb) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, &v)| (i, v))
            .expect("simplex is never empty");
        let improved = start_f - fb > options.f_tol * (1.0 + fb.abs());
        if fb <= best_f {
            best_f = fb;
            best_x = simplex[ib].clone();
        }
        if !converged || !improved || iterations >= options.max_iter {
            break;
        }
    }
    Minimum { x: best_x, f: best_f, iterations, evaluations, converged }
}

/// Default initial simplex steps in unconstrained coordinates.
///
/// Log-scale coordinates move by `step`; location-type coordinates by
/// `step` times the initial scale; coordinate slopes additionally divide by
/// the typical site-coordinate scale.
pub fn default_steps(theta0: &ParamVector, coordinate_scale: Option<f64>, step: f64) -> Vec<f64> {
    let v = &theta0.values;
    let cs = coordinate_scale.filter(|c| *c > 0.0).unwrap_or(1.0);
    match theta0.kind {
        ParamKind::Constant => {
            let sigma = v[4].abs().max(1e-8);
            vec![step, step * v[0].abs().sqrt().max(1e-8), step, step * sigma, step, step]
        }
        ParamKind::Spatial => {
            let sigma = v[6].abs().max(1e-8);
            vec![
                step,
                step * v[0].abs().sqrt().max(1e-8),
                step,
                step * sigma,
                step * sigma / cs,
                step * sigma / cs,
                step,
                step * sigma / cs,
                step * sigma / cs,
                step,
            ]
        }
        ParamKind::Free(_) => v.iter().map(|x| step * x.abs().max(1.0)).collect(),
    }
}

/// Maximizes `objective` over its parameters starting from `theta0`.
/// Variance diagnostics are left empty.
pub fn fit(objective: &dyn Objective, theta0: &ParamVector, options: &FitOptions) -> Result<FitResult> {
    fit_scaled(objective, theta0, options, None)
}

/// [`fit`] with a site-coordinate scale used to size the initial steps of
/// coordinate slopes.
pub fn fit_scaled(
    objective: &dyn Objective,
    theta0: &ParamVector,
    options: &FitOptions,
    coordinate_scale: Option<f64>,
) -> Result<FitResult> {
    let kind = objective.kind();
    if theta0.kind != kind {
        return Err(Error::InvalidArgument(format!(
            "starting point has layout {:?}, objective expects {:?}",
            theta0.kind, kind
        )));
    }
    let start = objective.loglik(&theta0.values)?;
    if !start.value.is_finite() {
        return Err(Error::Numerical(format!("objective is not finite at the starting point: {}", start.value)));
    }
    let u0 = theta0.to_unconstrained()?;
    let steps = match &options.steps {
        Some(s) if s.len() == u0.len() => s.clone(),
        Some(s) => {
            return Err(Error::InvalidArgument(format!("{} initial steps for {} parameters", s.len(), u0.len())))
        }
        None => default_steps(theta0, coordinate_scale, options.initial_step),
    };
    let negll = |u: &[f64]| -> f64 {
        match kind.from_unconstrained(u).and_then(|v| objective.loglik(&v)) {
            Ok(l) => -l.value,
            Err(_) => f64::INFINITY,
        }
    };
    let min = nelder_mead(negll, &u0, &steps, options);
    let theta_hat = kind.from_unconstrained(&min.x)?;
    let at_best = objective.loglik(&theta_hat)?;
    Ok(FitResult {
        kind,
        names: kind.names(),
        theta_hat,
        loglik: at_best.value,
        iterations: min.iterations,
        evaluations: min.evaluations,
        converged: min.converged,
        floored_bins: at_best.floored_bins,
        h_hat: None,
        j_hat: None,
        g_hat: None,
        std_errors: None,
        metadata: BTreeMap::new(),
    })
}
