use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape values with `|xi|` below this are evaluated on the Gumbel branch.
pub const GUMBEL_EPS: f64 = 1e-12;

/// Location, scale and shape of a GEV margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
}

impl GevParams {
    pub fn new(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        check_scale(sigma)?;
        if !mu.is_finite() || !xi.is_finite() {
            return Err(Error::InvalidModel(format!("non-finite GEV parameters ({mu}, {xi})")));
        }
        Ok(Self { mu, sigma, xi })
    }

    pub fn gumbel() -> Self {
        Self { mu: 0.0, sigma: 1.0, xi: 0.0 }
    }

    /// `log z` where `z = 1 / v(y)` is `y` mapped to the unit Fréchet scale.
    #[inline]
    pub fn log_unit_frechet(&self, y: f64) -> f64 {
        log_unit_frechet_raw(y, self.mu, self.sigma, self.xi)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        (-(-self.log_unit_frechet(y)).exp()).exp()
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        gev_quantile(p, self.mu, self.sigma, self.xi)
    }

    pub fn log_pdf(&self, y: f64) -> f64 {
        let lz = self.log_unit_frechet(y);
        if !lz.is_finite() {
            return f64::NEG_INFINITY;
        }
        -self.sigma.ln() - (1.0 + self.xi) * lz - (-lz).exp()
    }
}

fn check_scale(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("GEV scale must be positive, got {sigma}")))
    }
}

#[inline]
fn log_unit_frechet_raw(y: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    let s = (y - mu) / sigma;
    if xi.abs() < GUMBEL_EPS {
        return s;
    }
    let base = xi * s;
    if base <= -1.0 {
        // Outside the support: below the lower endpoint for xi > 0 (z = 0),
        // above the upper endpoint for xi < 0 (z = +inf).
        return if xi > 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    base.ln_1p() / xi
}

/// `log z = -log v(y; mu, sigma, xi)`, the unit-Fréchet transform in log space.
pub fn log_unit_frechet(y: f64, mu: f64, sigma: f64, xi: f64) -> Result<f64> {
    check_scale(sigma)?;
    Ok(log_unit_frechet_raw(y, mu, sigma, xi))
}

/// `v(y) = (max{0, 1 + xi (y - mu) / sigma})^(-1/xi)`, or `exp(-(y - mu)/sigma)` on
/// the Gumbel branch. Returns `+inf` below the lower endpoint (`xi > 0`) and 0
/// above the upper endpoint (`xi < 0`).
pub fn gev_v(y: f64, mu: f64, sigma: f64, xi: f64) -> Result<f64> {
    Ok((-log_unit_frechet(y, mu, sigma, xi)?).exp())
}

pub fn gev_cdf(y: f64, mu: f64, sigma: f64, xi: f64) -> Result<f64> {
    Ok((-gev_v(y, mu, sigma, xi)?).exp())
}

/// Exact inverse of [`gev_cdf`] for `p` in `(0, 1)`.
pub fn gev_quantile(p: f64, mu: f64, sigma: f64, xi: f64) -> Result<f64> {
    check_scale(sigma)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("probability {p} outside (0, 1)")));
    }
    let log_lp = (-p.ln()).ln();
    if xi.abs() < GUMBEL_EPS {
        Ok(mu - sigma * log_lp)
    } else {
        Ok(mu + sigma * (-xi * log_lp).exp_m1() / xi)
    }
}

/// Log density of the GEV distribution; `-inf` outside the support.
pub fn gev_log_pdf(y: f64, mu: f64, sigma: f64, xi: f64) -> Result<f64> {
    check_scale(sigma)?;
    Ok(GevParams { mu, sigma, xi }.log_pdf(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn v_reference_values() {
        assert_eq!(gev_v(0.0, 0.0, 1.0, 0.0).unwrap(), 1.0);
        for xi in [-0.4, -1e-13, 0.0, 0.2, 1.5] {
            assert!((gev_v(2.5, 2.5, 3.0, xi).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!((gev_v(1.0, 0.0, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn v_outside_support() {
        // xi > 0: lower endpoint at mu - sigma/xi = -2
        assert_eq!(gev_v(-3.0, 0.0, 1.0, 0.5).unwrap(), f64::INFINITY);
        assert_eq!(gev_cdf(-3.0, 0.0, 1.0, 0.5).unwrap(), 0.0);
        // xi < 0: upper endpoint at mu - sigma/xi = 2
        assert_eq!(gev_v(3.0, 0.0, 1.0, -0.5).unwrap(), 0.0);
        assert_eq!(gev_cdf(3.0, 0.0, 1.0, -0.5).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_scale_and_probability() {
        assert!(gev_v(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(gev_cdf(0.0, 0.0, -1.0, 0.0).is_err());
        assert!(gev_quantile(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(gev_quantile(1.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn cdf_and_quantile_reference() {
        assert!((gev_cdf(0.0, 0.0, 1.0, 0.0).unwrap() - (-1.0f64).exp()).abs() < 1e-16);
        assert!(gev_quantile((-1.0f64).exp(), 0.0, 1.0, 0.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn quantile_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p: f64 = rng.random_range(1e-6..1.0 - 1e-6);
            let mu: f64 = rng.random_range(-5.0..5.0);
            let sigma: f64 = rng.random_range(0.1..4.0);
            let xi: f64 = rng.random_range(-0.5..0.5);
            let q = gev_quantile(p, mu, sigma, xi).unwrap();
            let back = gev_cdf(q, mu, sigma, xi).unwrap();
            assert!((back - p).abs() < 1e-12, "p={p} xi={xi}: {back}");
        }
    }

    #[test]
    fn density_integrates_cdf_difference() {
        let g = GevParams::new(0.3, 1.7, 0.2).unwrap();
        let (a, b) = (-0.5, 2.0);
        let n = 4000;
        let h = (b - a) / n as f64;
        // composite Simpson
        let mut acc = g.log_pdf(a).exp() + g.log_pdf(b).exp();
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * g.log_pdf(a + i as f64 * h).exp();
        }
        let integral = acc * h / 3.0;
        assert!((integral - (g.cdf(b) - g.cdf(a))).abs() < 1e-10);
    }
}
