use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::gev::GevParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

/// Planar coordinates of the K observation sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteLayout {
    sites: Vec<Site>,
}

impl SiteLayout {
    pub fn new(sites: Vec<Site>) -> Result<Self> {
        if sites.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a site layout needs at least 2 sites, got {}",
                sites.len()
            )));
        }
        let mut seen = HashSet::new();
        for s in &sites {
            if !s.x.is_finite() || !s.y.is_finite() {
                return Err(Error::InvalidArgument(format!("site {} has non-finite coordinates", s.id)));
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate site id {}", s.id)));
            }
        }
        Ok(Self { sites })
    }

    /// Sites named `s1..sK` at the given coordinates.
    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            coords
                .iter()
                .enumerate()
                .map(|(k, &(x, y))| Site { id: format!("s{}", k + 1), x, y })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn coords(&self, k: usize) -> [f64; 2] {
        [self.sites[k].x, self.sites[k].y]
    }

    pub fn ids(&self) -> Vec<String> {
        self.sites.iter().map(|s| s.id.clone()).collect()
    }

    /// Sample standard deviation of the x and y coordinates.
    pub fn coordinate_spread(&self) -> [f64; 2] {
        let n = self.sites.len() as f64;
        let mut out = [0.0; 2];
        for (axis, o) in out.iter_mut().enumerate() {
            let vals = self.sites.iter().map(|s| if axis == 0 { s.x } else { s.y });
            let mean = vals.clone().sum::<f64>() / n;
            *o = (vals.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        }
        out
    }
}

/// Marginal GEV specification: one triple shared by all sites, or location
/// and scale varying linearly in the site coordinates with a common shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginSpec {
    Constant { mu: f64, sigma: f64, xi: f64 },
    SpatiallyVarying { alpha: [f64; 3], beta: [f64; 3], xi: f64 },
}

impl MarginSpec {
    pub fn gumbel() -> Self {
        MarginSpec::Constant { mu: 0.0, sigma: 1.0, xi: 0.0 }
    }

    /// GEV parameters at every site, failing on the first non-positive scale.
    pub fn at_all(&self, layout: &SiteLayout) -> Result<Vec<GevParams>> {
        (0..layout.len()).map(|k| margin_at(k, self, layout)).collect()
    }
}

/// `(mu(k), sigma(k), xi)` at site `k`.
pub fn margin_at(k: usize, margins: &MarginSpec, layout: &SiteLayout) -> Result<GevParams> {
    if k >= layout.len() {
        return Err(Error::InvalidArgument(format!("site {k} out of range for {} sites", layout.len())));
    }
    let (mu, sigma, xi) = match *margins {
        MarginSpec::Constant { mu, sigma, xi } => (mu, sigma, xi),
        MarginSpec::SpatiallyVarying { alpha, beta, xi } => {
            let [x, y] = layout.coords(k);
            (alpha[0] + alpha[1] * x + alpha[2] * y, beta[0] + beta[1] * x + beta[2] * y, xi)
        }
    };
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::NonPositiveScale { site: k, sigma });
    }
    GevParams::new(mu, sigma, xi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_margins_everywhere() {
        let layout = SiteLayout::from_coords(&[(0.0, 0.0), (3.0, 4.0)]).unwrap();
        let spec = MarginSpec::gumbel();
        for k in 0..2 {
            assert_eq!(margin_at(k, &spec, &layout).unwrap(), GevParams::gumbel());
        }
    }

    #[test]
    fn spatial_location_is_linear() {
        let layout = SiteLayout::from_coords(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        let spec = MarginSpec::SpatiallyVarying { alpha: [1.0, 2.0, 3.0], beta: [1.0, 0.0, 0.0], xi: 0.1 };
        assert_eq!(margin_at(0, &spec, &layout).unwrap().mu, 1.0);
        assert_eq!(margin_at(1, &spec, &layout).unwrap().mu, 6.0);
        assert_eq!(margin_at(1, &spec, &layout).unwrap().xi, 0.1);
    }

    #[test]
    fn non_positive_scale_names_site() {
        let layout = SiteLayout::from_coords(&[(0.0, 0.0), (10.0, 0.0)]).unwrap();
        let spec = MarginSpec::SpatiallyVarying { alpha: [0.0; 3], beta: [1.0, -0.2, 0.0], xi: 0.0 };
        match margin_at(1, &spec, &layout) {
            Err(Error::NonPositiveScale { site, .. }) => assert_eq!(site, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(spec.at_all(&layout).is_err());
    }

    #[test]
    fn layout_validation() {
        assert!(SiteLayout::from_coords(&[(0.0, 0.0)]).is_err());
        assert!(SiteLayout::from_coords(&[(0.0, f64::NAN), (1.0, 1.0)]).is_err());
        let dup = vec![
            Site { id: "a".into(), x: 0.0, y: 0.0 },
            Site { id: "a".into(), x: 1.0, y: 0.0 },
        ];
        assert!(SiteLayout::new(dup).is_err());
    }
}
