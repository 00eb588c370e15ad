use ndarray::ArrayView2;

use super::params::{ParamKind, ParamVector};
use crate::error::{Error, Result};
use crate::histogram::HistogramSeries;
use crate::models::{GevParams, SiteLayout};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Level exceeded on average once every `years` years when each year has
/// `blocks_per_year` block maxima.
pub fn return_level(margins: &GevParams, years: f64, blocks_per_year: f64) -> Result<f64> {
    if !(years >= 1.0) || !(blocks_per_year >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "return period needs years >= 1 and blocks per year >= 1, got {years} and {blocks_per_year}"
        )));
    }
    margins.quantile(1.0 - 1.0 / (years * blocks_per_year))
}

/// Sorted sample paired with GEV quantiles at plotting positions `(r - 0.5) / n`.
pub fn gev_qq(sample: &[f64], margins: &GevParams) -> Result<Vec<(f64, f64)>> {
    if sample.len() < 2 {
        return Err(Error::InvalidArgument("qq pairs need at least two observations".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(r, y)| Ok((y, margins.quantile((r as f64 + 0.5) / n)?)))
        .collect()
}

/// Moment-matched Gumbel location and scale.
fn gumbel_moments(mean: f64, var: f64) -> (f64, f64) {
    let sigma = (var.max(0.0).sqrt() * 6f64.sqrt() / std::f64::consts::PI).max(1e-6);
    (mean - EULER_GAMMA * sigma, sigma)
}

fn start_vector(kind: ParamKind, layout: &SiteLayout, mean: f64, var: f64) -> Result<ParamVector> {
    let (mu, sigma) = gumbel_moments(mean, var);
    let [sx, sy] = layout.coordinate_spread();
    let (s11, s22) = ((sx * sx).max(1e-6), (sy * sy).max(1e-6));
    let values = match kind {
        ParamKind::Constant => vec![s11, 0.0, s22, mu, sigma, 0.0],
        ParamKind::Spatial => vec![s11, 0.0, s22, mu, 0.0, 0.0, sigma, 0.0, 0.0, 0.0],
        ParamKind::Free(_) => {
            return Err(Error::InvalidArgument("no default start for free parameters".into()));
        }
    };
    ParamVector::new(kind, values)
}

/// Starting point from pooled one-dimensional marginal histograms:
/// Gumbel margins by the method of moments (bin midpoints) and a diagonal
/// dependence matrix from the squared spread of the site coordinates.
pub fn default_theta0(series: &HistogramSeries, layout: &SiteLayout, kind: ParamKind) -> Result<ParamVector> {
    let grid = series.grid();
    let (mut n, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for k in 0..series.dims() {
        for h in series.histograms() {
            for (bin, c) in h.project(&[k])? {
                let m = grid.bin_midpoint(k, bin[0]);
                let c = c as f64;
                n += c;
                s1 += c * m;
                s2 += c * m * m;
            }
        }
    }
    if n == 0.0 {
        return Err(Error::InvalidArgument("histogram series is empty".into()));
    }
    let mean = s1 / n;
    start_vector(kind, layout, mean, s2 / n - mean * mean)
}

/// [`default_theta0`] computed directly from micro-data.
pub fn default_theta0_data(data: ArrayView2<'_, f64>, layout: &SiteLayout, kind: ParamKind) -> Result<ParamVector> {
    let n = data.len() as f64;
    if n == 0.0 {
        return Err(Error::InvalidArgument("micro-data are empty".into()));
    }
    let mean = data.sum() / n;
    let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    start_vector(kind, layout, mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn return_level_examples() {
        let g = GevParams::gumbel();
        assert_eq!(return_level(&g, 2.0, 1.0).unwrap(), g.quantile(0.5).unwrap());
        let r = return_level(&g, 100.0, 1.0).unwrap();
        assert!((r + (-(0.99f64).ln()).ln()).abs() < 1e-12);
        assert!((r - 4.600).abs() < 1e-3);
        let g = GevParams::new(10.0, 2.0, 0.2).unwrap();
        let mut last = f64::NEG_INFINITY;
        for years in [1.5, 2.0, 10.0, 95.0, 1000.0] {
            let r = return_level(&g, years, 1.0).unwrap();
            assert!(r > last);
            last = r;
        }
        assert!(return_level(&g, 0.5, 1.0).is_err());
    }

    #[test]
    fn qq_positions() {
        let g = GevParams::gumbel();
        let q = gev_qq(&[3.0, 1.0], &g).unwrap();
        assert_eq!(q[0].0, 1.0);
        assert_eq!(q[0].1, g.quantile(0.25).unwrap());
        assert_eq!(q[1].1, g.quantile(0.75).unwrap());
        let q = gev_qq(&[2.0; 5], &g).unwrap();
        assert!(q.iter().all(|p| p.0 == 2.0));
        assert!(gev_qq(&[1.0], &g).is_err());
    }
}
