#![allow(clippy::excessive_precision)]

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const TWO_PI: f64 = 2.0 * PI;

/// Standard normal distribution function, `0.5 * erfc(-x / sqrt 2)`.
///
/// Saturates to exactly 0 or 1 outside about ±38.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

// Gauss–Legendre nodes on [-1, 0) with weights, for 6, 12 and 20 points
// (only the negative half is stored; the rule is symmetric).
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705, -0.9324695142031522),
    (0.3607615730481384, -0.6612093864662647),
    (0.4679139345726904, -0.2386191860831970),
];

const GL12: [(f64, f64); 6] = [
    (0.4717533638651177e-1, -0.9815606342467191),
    (0.1069393259953183, -0.9041172563704750),
    (0.1600783285433464, -0.7699026741943050),
    (0.2031674267230659, -0.5873179542866171),
    (0.2334925365383547, -0.3678314989981802),
    (0.2491470458134029, -0.1252334085114692),
];

const GL20: [(f64, f64); 10] = [
    (0.1761400713915212e-1, -0.9931285991850949),
    (0.4060142980038694e-1, -0.9639719272779138),
    (0.6267204833410906e-1, -0.9122344282513259),
    (0.8327674157670475e-1, -0.8391169718222188),
    (0.1019301198172404, -0.7463319064601508),
    (0.1181945319615184, -0.6360536807265150),
    (0.1316886384491766, -0.5108670019508271),
    (0.1420961093183821, -0.3737060887154196),
    (0.1491729864726037, -0.2277858511416451),
    (0.1527533871307259, -0.7652652113349733e-1),
];

/// `P(X <= h, Y <= k)` for a standard bivariate normal pair with correlation `rho`.
///
/// Drezner–Wesolowsky integration in the Genz double-precision form
/// (Gauss–Legendre in `asin(rho)` for moderate correlation, series plus
/// quadrature around the singular point for `|rho| >= 0.925`). Absolute
/// error is of order 1e-15. `rho = ±1` is evaluated as the degenerate
/// min/max limit. `rho` is clamped into `[-1, 1]`.
pub fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> f64 {
    if h.is_nan() || k.is_nan() || rho.is_nan() {
        return f64::NAN;
    }
    let rho = rho.clamp(-1.0, 1.0);
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return std_normal_cdf(k);
    }
    if k == f64::INFINITY {
        return std_normal_cdf(h);
    }
    upper_orthant(-h, -k, rho).clamp(0.0, 1.0)
}

/// `P(X > h, Y > k)`.
fn upper_orthant(h: f64, k: f64, r: f64) -> f64 {
    let abs_r = r.abs();
    let rule: &[(f64, f64)] = if abs_r < 0.3 {
        &GL6
    } else if abs_r < 0.75 {
        &GL12
    } else {
        &GL20
    };

    let mut hk = h * k;
    if abs_r < 0.925 {
        let mut bvn = 0.0;
        if abs_r > 0.0 {
            let hs = 0.5 * (h * h + k * k);
            let asr = r.asin();
            for &(w, x) in rule {
                for node in [x, -x] {
                    let sn = (0.5 * asr * (node + 1.0)).sin();
                    bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                }
            }
            bvn *= asr / (2.0 * TWO_PI);
        }
        return bvn + std_normal_cdf(-h) * std_normal_cdf(-k);
    }

    // High correlation: work with (h, k) or (h, -k) so the pair is positively
    // correlated, then map back.
    let k = if r < 0.0 {
        hk = -hk;
        -k
    } else {
        k
    };
    let mut bvn = 0.0;
    if abs_r < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let b_s = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-0.5 * (b_s / a_s + hk)).exp()
            * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        if hk > -160.0 {
            let b = b_s.sqrt();
            bvn -= (-0.5 * hk).exp()
                * TWO_PI.sqrt()
                * std_normal_cdf(-b / a)
                * b
                * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
        }
        a *= 0.5;
        for &(w, x) in rule {
            for node in [x, -x] {
                let xs = (a * (node + 1.0)).powi(2);
                let rs = (1.0 - xs).sqrt();
                let asr = -0.5 * (b_s / xs + hk);
                if asr > -100.0 {
                    bvn += a
                        * w
                        * asr.exp()
                        * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                            - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn / TWO_PI;
    }
    if r > 0.0 {
        bvn + std_normal_cdf(-h.max(k))
    } else {
        let mut out = -bvn;
        if k > h {
            out += if h < 0.0 {
                std_normal_cdf(k) - std_normal_cdf(h)
            } else {
                std_normal_cdf(-h) - std_normal_cdf(-k)
            };
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn univariate_reference_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((std_normal_cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-17);
        assert_eq!(std_normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn bivariate_closed_forms() {
        assert!((bivariate_normal_cdf(0.0, 0.0, 0.0) - 0.25).abs() < 1e-16);
        for rho in [-0.99, -0.95, -0.5, 0.1, 0.5, 0.93, 0.999] {
            let expect = 0.25 + f64::asin(rho) / (2.0 * PI);
            let got = bivariate_normal_cdf(0.0, 0.0, rho);
            assert!((got - expect).abs() < 1e-14, "rho={rho}: {got} vs {expect}");
        }
        assert!((bivariate_normal_cdf(0.0, 0.0, 0.5) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn bivariate_degenerate_correlations() {
        let (h, k) = (0.3, -0.7);
        let lo = bivariate_normal_cdf(h, k, 1.0);
        assert!((lo - std_normal_cdf(h.min(k))).abs() < 1e-15);
        let anti = bivariate_normal_cdf(h, k, -1.0);
        let expect = (std_normal_cdf(h) + std_normal_cdf(k) - 1.0).max(0.0);
        assert!((anti - expect).abs() < 1e-15);
        let anti2 = bivariate_normal_cdf(1.0, 0.5, -1.0);
        let expect2 = std_normal_cdf(1.0) + std_normal_cdf(0.5) - 1.0;
        assert!((anti2 - expect2).abs() < 1e-15);
    }

    #[test]
    fn bivariate_margins_and_symmetry() {
        for &(h, k, r) in &[(0.4, -1.2, 0.3), (-2.0, 1.5, -0.96), (1.1, 1.3, 0.97)] {
            assert!((bivariate_normal_cdf(h, k, r) - bivariate_normal_cdf(k, h, r)).abs() < 1e-15);
        }
        assert!((bivariate_normal_cdf(0.7, 40.0, 0.6) - std_normal_cdf(0.7)).abs() < 1e-15);
        assert_eq!(bivariate_normal_cdf(f64::NEG_INFINITY, 1.0, 0.2), 0.0);
        assert_eq!(bivariate_normal_cdf(f64::INFINITY, 0.0, 0.2), 0.5);
    }

    #[test]
    fn negative_high_correlation_reflection() {
        // P(X<=h, Y<=k; -r) = Phi(h) - P(X<=h, Y<=-k; r)
        for &(h, k, r) in &[(0.5, 0.2, 0.95), (-1.0, 0.4, 0.99), (2.0, -1.5, 0.93), (-0.3, -0.8, 0.999)] {
            let lhs = bivariate_normal_cdf(h, k, -r);
            let rhs = std_normal_cdf(h) - bivariate_normal_cdf(h, -k, r);
            assert!((lhs - rhs).abs() < 1e-14, "({h},{k},{r}): {lhs} vs {rhs}");
        }
    }
}
