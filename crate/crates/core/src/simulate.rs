//! Seeded site layouts and approximate Smith process realisations.
//!
//! Every row is generated from its own ChaCha stream keyed by
//! `(seed, replicate)`, so output does not depend on the thread count.
//! Site layouts use a separate key derived from the seed alone; the first
//! `K'` sites of a draw therefore do not depend on `K`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Dependence, MarginSpec, Site, SiteLayout, GUMBEL_EPS};

/// Replicate slot reserved for site layouts.
const SITE_KEY: u64 = u64::MAX;

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Window {
    fn default() -> Self {
        Self { x_min: 0.0, x_max: 40.0, y_min: 0.0, y_max: 40.0 }
    }
}

impl Window {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite())
            && self.x_max > self.x_min
            && self.y_max > self.y_min;
        if !ok {
            return Err(Error::InvalidArgument(format!("degenerate window {self:?}")));
        }
        Ok(())
    }

    pub fn expanded(&self, r: f64) -> Window {
        Window { x_min: self.x_min - r, x_max: self.x_max + r, y_min: self.y_min - r, y_max: self.y_max + r }
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    fn sample(&self, rng: &mut impl Rng) -> [f64; 2] {
        [
            self.x_min + (self.x_max - self.x_min) * rng.random::<f64>(),
            self.y_min + (self.y_max - self.y_min) * rng.random::<f64>(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// Replicate index; each replicate has independent rows for the same seed.
    #[serde(default)]
    pub replicate: u64,
    pub k: usize,
    pub n: usize,
    pub window: Window,
    pub dependence: Dependence,
    pub margins: MarginSpec,
    /// Storm centres are drawn from the window grown by this many standard
    /// deviations (along the major axis of the dependence matrix).
    pub storm_window_expansion: f64,
}

impl SimConfig {
    pub fn new(seed: u64, k: usize, n: usize, dependence: Dependence, margins: MarginSpec) -> Self {
        Self { seed, replicate: 0, k, n, window: Window::default(), dependence, margins, storm_window_expansion: 4.0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        self.dependence.validate()?;
        if self.k < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 sites, got {}", self.k)));
        }
        if !(self.storm_window_expansion > 0.0) {
            return Err(Error::InvalidArgument("storm window expansion must be positive".into()));
        }
        Ok(())
    }

    /// Distance by which storm centres extend beyond the window.
    pub fn truncation_radius(&self) -> f64 {
        self.storm_window_expansion * self.dependence.max_eigenvalue().sqrt()
    }
}

fn rng_for(seed: u64, replicate: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&replicate.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// `K` sites uniform on the window, named `s1..sK`.
pub fn sample_sites(config: &SimConfig) -> Result<SiteLayout> {
    config.window.validate()?;
    if config.k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 sites, got {}", config.k)));
    }
    let mut rng = rng_for(config.seed, SITE_KEY, 0);
    let sites = (0..config.k)
        .map(|i| {
            let [x, y] = config.window.sample(&mut rng);
            Site { id: format!("s{}", i + 1), x, y }
        })
        .collect();
    SiteLayout::new(sites)
}

/// Unit-Fréchet maxima of storm profiles at the given sites for one row.
fn frechet_row(sites: &[[f64; 2]], dep: &Dependence, storms: &Window, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let area = storms.area();
    let phi_max = 1.0 / (2.0 * std::f64::consts::PI * dep.det().sqrt());
    let mut z = vec![0.0f64; sites.len()];
    let mut gamma = 0.0;
    loop {
        gamma += rng.sample::<f64, _>(Exp1);
        let zeta = area / gamma;
        let floor = z.iter().copied().fold(f64::INFINITY, f64::min);
        if zeta * phi_max < floor {
            break;
        }
        let u = storms.sample(rng);
        for (zk, s) in z.iter_mut().zip(sites) {
            let d = [s[0] - u[0], s[1] - u[1]];
            let v = zeta * phi_max * (-0.5 * dep.inv_form(d, d)).exp();
            if v > *zk {
                *zk = v;
            }
        }
    }
    z
}

/// `N x K` matrix of Smith process realisations at `layout` with the
/// configured margins. Storm centres are uniform on the window expanded by
/// [`SimConfig::truncation_radius`]; generation stops once no remaining storm
/// can raise any site.
pub fn simulate_smith(layout: &SiteLayout, config: &SimConfig) -> Result<Array2<f64>> {
    config.window.validate()?;
    config.dependence.validate()?;
    if !(config.storm_window_expansion > 0.0) {
        return Err(Error::InvalidArgument("storm window expansion must be positive".into()));
    }
    let margins = config.margins.at_all(layout)?;
    let coords: Vec<[f64; 2]> = (0..layout.len()).map(|k| layout.coords(k)).collect();
    let storms = config.window.expanded(config.truncation_radius());
    let rows: Vec<Vec<f64>> = (0..config.n)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(config.seed, config.replicate, r as u64);
            let z = frechet_row(&coords, &config.dependence, &storms, &mut rng);
            z.iter()
                .zip(&margins)
                .map(|(&z, g)| {
                    if g.xi.abs() < GUMBEL_EPS {
                        g.mu + g.sigma * z.ln()
                    } else {
                        g.mu + g.sigma * (z.powf(g.xi) - 1.0) / g.xi
                    }
                })
                .collect()
        })
        .collect();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((config.n, layout.len()), flat).expect("row lengths match the layout"))
}

/// Samples a layout and simulates on it.
pub fn simulate(config: &SimConfig) -> Result<(SiteLayout, Array2<f64>)> {
    config.validate()?;
    let layout = sample_sites(config)?;
    let data = simulate_smith(&layout, config)?;
    Ok((layout, data))
}
