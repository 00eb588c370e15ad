use ndarray::ArrayView2;

use super::params::ParamKind;
use super::variance::fd_step;
use crate::error::Result;
use crate::histogram::HistogramSeries;
use crate::likelihood::{BlockLogLik, ClassicComposite, CompositeConfig, LogLikValue, SymbolicComposite};
use crate::models::{SiteLayout, SmithJoint};

/// Relative derivative step for the classic objective.
const CLASSIC_REL_STEP: f64 = 1e-2;

/// A log-likelihood over natural parameters that can also report its
/// per-block contributions (used for the variability matrix).
pub trait Objective: Sync {
    fn kind(&self) -> ParamKind;

    fn evaluate(&self, theta: &[f64]) -> Result<BlockLogLik>;

    fn loglik(&self, theta: &[f64]) -> Result<LogLikValue> {
        Ok(self.evaluate(theta)?.value)
    }

    /// Central-difference steps for Hessians and scores at `theta`.
    fn fd_steps(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().map(|&x| fd_step(x)).collect()
    }
}

/// Steps proportional to each parameter's natural scale rather than its value:
/// `sqrt(s11 s22)` for dependence entries, the (base) GEV scale for location
/// and scale parameters (divided by `coordinate_scale` for slopes), 1 for the shape.
pub fn scaled_steps(kind: ParamKind, theta: &[f64], coordinate_scale: f64, rel: f64) -> Vec<f64> {
    let cs = if coordinate_scale > 0.0 { coordinate_scale } else { 1.0 };
    match kind {
        ParamKind::Constant => {
            let s = (theta[0] * theta[2]).abs().sqrt();
            let g = theta[4].abs();
            vec![rel * s, rel * s, rel * s, rel * g, rel * g, rel]
        }
        ParamKind::Spatial => {
            let s = (theta[0] * theta[2]).abs().sqrt();
            let g = theta[6].abs();
            let gs = g / cs;
            vec![rel * s, rel * s, rel * s, rel * g, rel * gs, rel * gs, rel * g, rel * gs, rel * gs, rel]
        }
        ParamKind::Free(_) => theta.iter().map(|x| rel * x.abs().max(1.0)).collect(),
    }
}

/// Symbolic composite log-likelihood of a histogram series under the Smith model.
#[derive(Debug, Clone)]
pub struct SymbolicObjective {
    composite: SymbolicComposite,
    layout: SiteLayout,
    kind: ParamKind,
}

impl SymbolicObjective {
    pub fn new(series: &HistogramSeries, layout: &SiteLayout, config: &CompositeConfig, kind: ParamKind) -> Result<Self> {
        check_sites(series.dims(), layout)?;
        Ok(Self { composite: SymbolicComposite::new(series, config)?, layout: layout.clone(), kind })
    }

    pub fn composite(&self) -> &SymbolicComposite {
        &self.composite
    }

    pub fn layout(&self) -> &SiteLayout {
        &self.layout
    }
}

impl Objective for SymbolicObjective {
    fn kind(&self) -> ParamKind {
        self.kind
    }

    fn evaluate(&self, theta: &[f64]) -> Result<BlockLogLik> {
        let params = self.kind.to_smith(theta)?;
        let model = SmithJoint::new(&params, &self.layout)?;
        self.composite.evaluate(&model)
    }
}

/// Classic micro-data composite log-likelihood; blocks are single observations.
#[derive(Debug, Clone)]
pub struct ClassicObjective {
    composite: ClassicComposite,
    layout: SiteLayout,
    kind: ParamKind,
}

impl ClassicObjective {
    pub fn new(data: ArrayView2<'_, f64>, layout: &SiteLayout, config: &CompositeConfig, kind: ParamKind) -> Result<Self> {
        check_sites(data.ncols(), layout)?;
        Ok(Self { composite: ClassicComposite::new(data, config)?, layout: layout.clone(), kind })
    }

    pub fn composite(&self) -> &ClassicComposite {
        &self.composite
    }
}

impl Objective for ClassicObjective {
    fn kind(&self) -> ParamKind {
        self.kind
    }

    /// Finite-difference densities carry rounding noise that is not smooth in
    /// the parameters, so derivatives need steps well above that noise.
    fn fd_steps(&self, theta: &[f64]) -> Vec<f64> {
        let [sx, sy] = self.layout.coordinate_spread();
        scaled_steps(self.kind, theta, 0.5 * (sx + sy), CLASSIC_REL_STEP)
    }

    fn evaluate(&self, theta: &[f64]) -> Result<BlockLogLik> {
        let params = self.kind.to_smith(theta)?;
        let model = SmithJoint::new(&params, &self.layout)?;
        self.composite.evaluate(&model)
    }
}

/// Wraps a plain function of free parameters as a single-block objective.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Result<f64> + Sync> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> Result<f64> + Sync> Objective for FnObjective<F> {
    fn kind(&self) -> ParamKind {
        ParamKind::Free(self.dim)
    }

    fn evaluate(&self, theta: &[f64]) -> Result<BlockLogLik> {
        let v = (self.f)(theta)?;
        Ok(BlockLogLik { per_block: vec![v], value: LogLikValue { value: v, floored_bins: 0 } })
    }
}

fn check_sites(dims: usize, layout: &SiteLayout) -> Result<()> {
    if dims != layout.len() {
        return Err(crate::error::Error::InvalidArgument(format!(
            "data have {dims} margins but the layout has {} sites",
            layout.len()
        )));
    }
    Ok(())
}
