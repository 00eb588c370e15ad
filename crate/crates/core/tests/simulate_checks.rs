use ndarray::Array2;
use symcl::inference::gev_qq;
use symcl::models::{extremal_coefficient, Dependence, GevParams, MarginSpec, SiteLayout};
use symcl::simulate::{sample_sites, simulate, simulate_smith, SimConfig, Window};

fn gumbel_cdf(y: f64) -> f64 {
    (-(-y).exp()).exp()
}

fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter().enumerate().fold(0.0f64, |d, (i, &v)| {
        let f = cdf(v);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Madogram estimate of the pairwise extremal coefficient under Gumbel margins.
fn empirical_extremal(x: &Array2<f64>, a: usize, b: usize) -> f64 {
    let n = x.nrows() as f64;
    let nu = x.rows().into_iter().map(|r| 0.5 * (gumbel_cdf(r[a]) - gumbel_cdf(r[b])).abs()).sum::<f64>() / n;
    (1.0 + 2.0 * nu) / (1.0 - 2.0 * nu)
}

#[test]
fn site_coordinates_are_uniform_on_the_window() {
    let mut cfg = SimConfig::new(5, 4000, 1, Dependence::new(300.0, 0.0, 300.0).unwrap(), MarginSpec::gumbel());
    cfg.window = Window { x_min: -10.0, x_max: 30.0, y_min: 0.0, y_max: 80.0 };
    let layout = sample_sites(&cfg).unwrap();
    let n = layout.len() as f64;
    let mx = layout.sites().iter().map(|s| s.x).sum::<f64>() / n;
    let my = layout.sites().iter().map(|s| s.y).sum::<f64>() / n;
    // Uniform means with standard errors width / sqrt(12 n).
    assert!((mx - 10.0).abs() < 4.0 * 40.0 / (12.0 * n).sqrt());
    assert!((my - 40.0).abs() < 4.0 * 80.0 / (12.0 * n).sqrt());
    assert!(layout.sites().iter().all(|s| (-10.0..=30.0).contains(&s.x) && (0.0..=80.0).contains(&s.y)));
    let xs: Vec<f64> = layout.sites().iter().map(|s| (s.x + 10.0) / 40.0).collect();
    assert!(ks_statistic(&xs, |u| u.clamp(0.0, 1.0)) < 1.63 / n.sqrt());
}

#[test]
fn stronger_dependence_gives_smaller_extremal_coefficients() {
    let layout = SiteLayout::from_coords(&[(10.0, 10.0), (22.0, 15.0), (14.0, 30.0)]).unwrap();
    let mut last = Vec::new();
    for s in [50.0, 300.0, 2000.0] {
        let dep = Dependence::new(s, 0.0, s).unwrap();
        let cfg = SimConfig::new(8, 3, 5000, dep, MarginSpec::gumbel());
        let x = simulate_smith(&layout, &cfg).unwrap();
        let now: Vec<f64> = [(0, 1), (0, 2), (1, 2)].iter().map(|&(a, b)| empirical_extremal(&x, a, b)).collect();
        for (i, &(a, b)) in [(0, 1), (0, 2), (1, 2)].iter().enumerate() {
            let model = extremal_coefficient(&dep, layout.coords(a), layout.coords(b)).unwrap();
            assert!((now[i] - model).abs() < 0.05, "sigma {s}, pair ({a},{b}): {} vs {model}", now[i]);
            if let Some(prev) = last.get(i) {
                assert!(now[i] < *prev);
            }
        }
        last = now;
    }
}

#[test]
fn margins_fall_inside_a_qq_band() {
    let margins = MarginSpec::Constant { mu: 5.0, sigma: 2.0, xi: -0.1 };
    let cfg = SimConfig::new(21, 3, 4000, Dependence::new(300.0, 0.0, 300.0).unwrap(), margins);
    let (_, x) = simulate(&cfg).unwrap();
    let g = GevParams::new(5.0, 2.0, -0.1).unwrap();
    for k in 0..3 {
        let pairs = gev_qq(&x.column(k).to_vec(), &g).unwrap();
        let n = pairs.len();
        // Central 98% of order statistics: an asymptotic band on the quantile scale.
        for (r, &(emp, theo)) in pairs.iter().enumerate().skip(n / 100).take(n - n / 50) {
            let p = (r as f64 + 0.5) / n as f64;
            let inv_density = (-g.log_pdf(theo)).exp();
            let band = 4.0 * (p * (1.0 - p) / n as f64).sqrt() * inv_density;
            assert!((emp - theo).abs() < band, "site {k}, rank {r}: {emp} vs {theo} (band {band})");
        }
    }
}

/// Max-stability: the componentwise maximum of two independent blocks of
/// unit-Gumbel realisations, shifted by log 2, has the original law.
#[test]
fn block_maxima_are_max_stable() {
    let dep = Dependence::new(300.0, 50.0, 200.0).unwrap();
    let layout = SiteLayout::from_coords(&[(5.0, 5.0), (20.0, 12.0)]).unwrap();
    let mut a = SimConfig::new(31, 2, 6000, dep, MarginSpec::gumbel());
    let x = simulate_smith(&layout, &a).unwrap();
    a.replicate = 1;
    let y = simulate_smith(&layout, &a).unwrap();
    a.replicate = 2;
    let z = simulate_smith(&layout, &a).unwrap();
    let diag_max: Vec<f64> = x.rows().into_iter().zip(y.rows()).map(|(r, s)| r[0].max(s[0]).max(r[1].max(s[1])) - 2f64.ln()).collect();
    let diag: Vec<f64> = z.rows().into_iter().map(|r| r[0].max(r[1])).collect();
    // Two-sample KS at the 0.1% level.
    let n = diag.len() as f64;
    let mut all: Vec<(f64, bool)> = diag.iter().map(|&v| (v, true)).chain(diag_max.iter().map(|&v| (v, false))).collect();
    all.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (mut fa, mut fb, mut d) = (0.0, 0.0, 0.0f64);
    for (_, first) in all {
        if first {
            fa += 1.0 / n;
        } else {
            fb += 1.0 / n;
        }
        d = d.max((fa - fb).abs());
    }
    assert!(d < 1.95 * (2.0 / n).sqrt(), "KS distance {d}");
}
