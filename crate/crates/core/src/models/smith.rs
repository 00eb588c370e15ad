use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::gev::GevParams;
use super::normal::{bivariate_normal_cdf, std_normal_cdf};
use super::sites::{MarginSpec, SiteLayout};
use crate::error::{Error, Result};

/// Condition number above which a conditional covariance gets diagonal jitter.
const MAX_CONDITION: f64 = 1e12;
const JITTER_SCALE: f64 = 1e-10;

/// Symmetric positive definite 2×2 dependence matrix of the Smith model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dependence {
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
}

impl Dependence {
    pub fn new(s11: f64, s12: f64, s22: f64) -> Result<Self> {
        let d = Self { s11, s12, s22 };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let det = self.det();
        if !(self.s11 > 0.0 && self.s22 > 0.0 && det > 0.0) || !det.is_finite() {
            return Err(Error::InvalidModel(format!(
                "dependence matrix ({}, {}, {}) is not positive definite",
                self.s11, self.s12, self.s22
            )));
        }
        Ok(())
    }

    pub fn det(&self) -> f64 {
        self.s11 * self.s22 - self.s12 * self.s12
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let tr = self.s11 + self.s22;
        let disc = ((self.s11 - self.s22).powi(2) + 4.0 * self.s12 * self.s12).sqrt();
        0.5 * (tr + disc)
    }

    /// `u^T Sigma^{-1} w` for planar vectors.
    #[inline]
    pub fn inv_form(&self, u: [f64; 2], w: [f64; 2]) -> f64 {
        let det = self.det();
        (u[0] * (self.s22 * w[0] - self.s12 * w[1]) + u[1] * (self.s11 * w[1] - self.s12 * w[0])) / det
    }

    /// Mahalanobis distance between two planar points.
    pub fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d = [a[0] - b[0], a[1] - b[1]];
        self.inv_form(d, d).max(0.0).sqrt()
    }
}

/// Dependence matrix plus marginal specification: the full parameter θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmithParams {
    pub dependence: Dependence,
    pub margins: MarginSpec,
}

/// A j-dimensional marginal distribution function over site subsets.
///
/// The CDF is evaluated in two stages so callers that hit the same
/// coordinate many times (bin corners) can cache the per-site transform.
pub trait JointCdf: Sync {
    /// Per-site monotone transform of a data value.
    fn transform(&self, site: usize, y: f64) -> f64;

    /// Joint CDF of `sites` at already transformed coordinates.
    fn cdf_transformed(&self, sites: &[usize], u: &[f64]) -> Result<f64>;

    fn cdf(&self, sites: &[usize], y: &[f64]) -> Result<f64> {
        let u: Vec<f64> = sites.iter().zip(y).map(|(&s, &v)| self.transform(s, v)).collect();
        self.cdf_transformed(sites, &u)
    }
}

/// Smith model prepared for evaluation at one parameter value: margins are
/// resolved per site and the layout is borrowed.
#[derive(Debug)]
pub struct SmithJoint<'a> {
    dependence: Dependence,
    layout: &'a SiteLayout,
    margins: Vec<GevParams>,
    jitter_events: AtomicU64,
}

impl<'a> SmithJoint<'a> {
    pub fn new(params: &SmithParams, layout: &'a SiteLayout) -> Result<Self> {
        params.dependence.validate()?;
        let margins = params.margins.at_all(layout)?;
        Ok(Self { dependence: params.dependence, layout, margins, jitter_events: AtomicU64::new(0) })
    }

    pub fn margins(&self) -> &[GevParams] {
        &self.margins
    }

    pub fn dependence(&self) -> &Dependence {
        &self.dependence
    }

    /// Number of evaluations that needed diagonal jitter (near-collinear sites).
    pub fn jitter_events(&self) -> u64 {
        self.jitter_events.load(Ordering::Relaxed)
    }

    fn offset(&self, from: usize, to: usize) -> [f64; 2] {
        let a = self.layout.coords(from);
        let b = self.layout.coords(to);
        [a[0] - b[0], a[1] - b[1]]
    }

    fn mahalanobis_sq(&self, a: usize, b: usize) -> Result<f64> {
        let d = self.offset(a, b);
        let q = self.dependence.inv_form(d, d);
        if !(q > 1e-20) {
            return Err(Error::CoincidentSites(a, b));
        }
        Ok(q)
    }

    /// Exponent `V` with `CDF = exp(-V)` for two sites at finite `log z`.
    fn pair_exponent(&self, s: [usize; 2], lz: [f64; 2]) -> Result<f64> {
        let a = self.mahalanobis_sq(s[0], s[1])?.sqrt();
        let r = (lz[1] - lz[0]) / a;
        Ok((-lz[0]).exp() * std_normal_cdf(0.5 * a + r) + (-lz[1]).exp() * std_normal_cdf(0.5 * a - r))
    }

    fn triple_exponent(&self, s: [usize; 3], lz: [f64; 3]) -> Result<f64> {
        let mut total = 0.0;
        for j in 0..3 {
            let (k, l) = match j {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let dk = self.offset(s[j], s[k]);
            let dl = self.offset(s[j], s[l]);
            let qk = self.dependence.inv_form(dk, dk);
            let ql = self.dependence.inv_form(dl, dl);
            if !(qk > 1e-20) {
                return Err(Error::CoincidentSites(s[j], s[k]));
            }
            if !(ql > 1e-20) {
                return Err(Error::CoincidentSites(s[j], s[l]));
            }
            let mut e = self.dependence.inv_form(dk, dl);
            let (mut vk, mut vl) = (qk, ql);
            let tr = vk + vl;
            let disc = ((vk - vl).powi(2) + 4.0 * e * e).sqrt();
            let lmin = 0.5 * (tr - disc);
            let lmax = 0.5 * (tr + disc);
            if !(lmin > 0.0) || lmax / lmin > MAX_CONDITION {
                let jitter = JITTER_SCALE * tr;
                vk += jitter;
                vl += jitter;
                self.jitter_events.fetch_add(1, Ordering::Relaxed);
            }
            let ck = 0.5 * qk + lz[k] - lz[j];
            let cl = 0.5 * ql + lz[l] - lz[j];
            let (sk, sl) = (vk.sqrt(), vl.sqrt());
            e /= sk * sl;
            total += (-lz[j]).exp() * bivariate_normal_cdf(ck / sk, cl / sl, e);
        }
        Ok(total)
    }

    /// Joint CDF given `log z` per site (unit-Fréchet scale). Sites at
    /// `+inf` (above an upper endpoint) drop out; any `-inf` gives 0.
    pub fn cdf_log_z(&self, sites: &[usize], lz: &[f64]) -> Result<f64> {
        if sites.len() != lz.len() || sites.is_empty() || sites.len() > 3 {
            return Err(Error::InvalidArgument(format!(
                "Smith CDF supports 1 to 3 sites, got {} sites and {} values",
                sites.len(),
                lz.len()
            )));
        }
        let mut act_s = [0usize; 3];
        let mut act_z = [0.0f64; 3];
        let mut m = 0;
        for (&s, &z) in sites.iter().zip(lz) {
            if z.is_nan() {
                return Err(Error::Numerical(format!("NaN transform at site {s}")));
            }
            if z == f64::NEG_INFINITY {
                return Ok(0.0);
            }
            if z < f64::INFINITY {
                act_s[m] = s;
                act_z[m] = z;
                m += 1;
            }
        }
        let v = match m {
            0 => return Ok(1.0),
            1 => (-act_z[0]).exp(),
            2 => self.pair_exponent([act_s[0], act_s[1]], [act_z[0], act_z[1]])?,
            _ => self.triple_exponent(act_s, act_z)?,
        };
        Ok((-v).exp())
    }
}

impl JointCdf for SmithJoint<'_> {
    #[inline]
    fn transform(&self, site: usize, y: f64) -> f64 {
        self.margins[site].log_unit_frechet(y)
    }

    fn cdf_transformed(&self, sites: &[usize], u: &[f64]) -> Result<f64> {
        self.cdf_log_z(sites, u)
    }
}

/// Joint distribution function of the Smith process at 2 or 3 distinct sites.
pub fn smith_cdf(y: &[f64], sites: &[usize], params: &SmithParams, layout: &SiteLayout) -> Result<f64> {
    if !(2..=3).contains(&sites.len()) || y.len() != sites.len() {
        return Err(Error::InvalidArgument(format!(
            "smith_cdf takes 2 or 3 sites with matching values, got {} sites and {} values",
            sites.len(),
            y.len()
        )));
    }
    for (i, &s) in sites.iter().enumerate() {
        if s >= layout.len() {
            return Err(Error::InvalidArgument(format!("site {s} out of range")));
        }
        if sites[..i].contains(&s) {
            return Err(Error::InvalidArgument(format!("site {s} repeated")));
        }
    }
    SmithJoint::new(params, layout)?.cdf(sites, y)
}

/// Pairwise extremal coefficient `2 Phi(a/2)`, `a` the Mahalanobis distance
/// between the two sites. Coincident sites give the complete-dependence limit 1.
pub fn extremal_coefficient(dependence: &Dependence, a: [f64; 2], b: [f64; 2]) -> Result<f64> {
    dependence.validate()?;
    let dist = dependence.distance(a, b);
    Ok(2.0 * std_normal_cdf(0.5 * dist))
}
