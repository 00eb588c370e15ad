//! Python bindings: simulation, histogram aggregation, symbolic and classic
//! composite-likelihood fits and sandwich standard errors.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::Array2;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use symcl_core::histogram::{aggregate, make_grid, HistogramSeries as CoreSeries};
use symcl_core::inference::{
    default_theta0, default_theta0_data, fit_scaled, return_level as core_return_level, sandwich, ClassicObjective,
    FitOptions, FitResult as CoreFit, Objective, ParamKind, ParamVector, SymbolicObjective,
};
use symcl_core::io::HistogramFile;
use symcl_core::likelihood::{count_terms as core_count_terms, CompositeConfig};
use symcl_core::models::{
    bivariate_normal_cdf as core_bvn, smith_cdf as core_smith_cdf, Dependence, GevParams, MarginSpec, SiteLayout,
    SmithParams,
};
use symcl_core::simulate::{simulate as core_simulate, SimConfig};

create_exception!(symcl, SymclError, PyException);
create_exception!(symcl, NumericalError, SymclError);

fn err(e: symcl_core::Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        SymclError::new_err(e.to_string())
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let k = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != k) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    let n = rows.len();
    Array2::from_shape_vec((n, k), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn layout(coords: Vec<(f64, f64)>) -> PyResult<SiteLayout> {
    SiteLayout::from_coords(&coords).map_err(err)
}

fn margins(values: Vec<f64>) -> PyResult<MarginSpec> {
    match values.as_slice() {
        [mu, sigma, xi] => Ok(MarginSpec::Constant { mu: *mu, sigma: *sigma, xi: *xi }),
        [a0, a1, a2, b0, b1, b2, xi] => {
            Ok(MarginSpec::SpatiallyVarying { alpha: [*a0, *a1, *a2], beta: [*b0, *b1, *b2], xi: *xi })
        }
        _ => Err(PyValueError::new_err("margins take 3 values (mu, sigma, xi) or 7 (alpha0..2, beta0..2, xi)")),
    }
}

fn kind(name: &str) -> PyResult<ParamKind> {
    match name {
        "constant" => Ok(ParamKind::Constant),
        "spatial" => Ok(ParamKind::Spatial),
        _ => Err(PyValueError::new_err(format!("margins must be 'constant' or 'spatial', got {name:?}"))),
    }
}

fn coordinate_scale(layout: &SiteLayout) -> f64 {
    let [sx, sy] = layout.coordinate_spread();
    0.5 * (sx + sy)
}

/// Sparse K-dimensional histograms over a shared bin grid.
#[pyclass(module = "symcl", frozen)]
struct HistogramSeries {
    inner: CoreSeries,
}

#[pymethods]
impl HistogramSeries {
    /// Bins the rows of `data` (N lists of K values) into `t` histograms
    /// with `bins` equal-width bins per margin.
    #[staticmethod]
    #[pyo3(signature = (data, bins=25, t=1))]
    fn aggregate(data: Vec<Vec<f64>>, bins: usize, t: usize) -> PyResult<Self> {
        let x = matrix(data)?;
        let grid = Arc::new(make_grid(x.view(), bins, None).map_err(err)?);
        Ok(Self { inner: aggregate(x.view(), grid, t).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let file: HistogramFile = serde_json::from_str(text).map_err(|e| SymclError::new_err(e.to_string()))?;
        Ok(Self { inner: file.to_series().map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&HistogramFile::from_series(&self.inner, None))
            .map_err(|e| SymclError::new_err(e.to_string()))
    }

    /// Single histogram holding all counts.
    fn merged(&self) -> Self {
        Self { inner: self.inner.merged() }
    }

    #[getter]
    fn dims(&self) -> usize {
        self.inner.dims()
    }

    #[getter]
    fn total(&self) -> u64 {
        self.inner.total()
    }

    #[getter]
    fn breakpoints(&self) -> Vec<Vec<f64>> {
        self.inner.grid().all_breakpoints().to_vec()
    }

    /// Nonempty bins of histogram `t` as (1-based bin, count) pairs.
    fn counts(&self, t: usize) -> PyResult<Vec<(Vec<u32>, u64)>> {
        let h = self
            .inner
            .histograms()
            .get(t)
            .ok_or_else(|| PyValueError::new_err(format!("histogram {t} out of range")))?;
        Ok(h.iter().map(|(b, n)| (b.clone(), n)).collect())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("HistogramSeries(histograms={}, dims={}, total={})", self.inner.len(), self.inner.dims(), self.inner.total())
    }
}

/// Estimates and diagnostics of a composite-likelihood fit.
#[pyclass(module = "symcl", frozen)]
struct FitResult {
    inner: CoreFit,
}

#[pymethods]
impl FitResult {
    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names.clone()
    }

    #[getter]
    fn theta_hat(&self) -> Vec<f64> {
        self.inner.theta_hat.clone()
    }

    #[getter]
    fn loglik(&self) -> f64 {
        self.inner.loglik
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn floored_bins(&self) -> u64 {
        self.inner.floored_bins
    }

    #[getter]
    fn std_errors(&self) -> Option<Vec<f64>> {
        self.inner.std_errors.clone()
    }

    #[getter]
    fn godambe(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.g_hat.clone()
    }

    /// Estimates keyed by parameter name.
    fn as_dict(&self) -> BTreeMap<String, f64> {
        self.inner.names.iter().cloned().zip(self.inner.theta_hat.iter().copied()).collect()
    }

    /// Return level at every site for the fitted margins.
    #[pyo3(signature = (coords, years, blocks_per_year=1.0))]
    fn return_levels(&self, coords: Vec<(f64, f64)>, years: f64, blocks_per_year: f64) -> PyResult<Vec<f64>> {
        let layout = layout(coords)?;
        let params = self.inner.params().map_err(err)?;
        params
            .margins
            .at_all(&layout)
            .map_err(err)?
            .iter()
            .map(|g| core_return_level(g, years, blocks_per_year).map_err(err))
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| SymclError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: serde_json::from_str(text).map_err(|e| SymclError::new_err(e.to_string()))? })
    }

    fn __repr__(&self) -> String {
        let parts: Vec<String> =
            self.inner.names.iter().zip(&self.inner.theta_hat).map(|(n, v)| format!("{n}={v:.6}")).collect();
        format!("FitResult({}, loglik={:.6})", parts.join(", "), self.inner.loglik)
    }
}

fn run_fit(objective: &dyn Objective, theta0: ParamVector, layout: &SiteLayout, max_iter: usize) -> PyResult<FitResult> {
    let options = FitOptions { max_iter, ..FitOptions::default() };
    let inner = fit_scaled(objective, &theta0, &options, Some(coordinate_scale(layout))).map_err(err)?;
    Ok(FitResult { inner })
}

fn start(theta0: Option<Vec<f64>>, kind: ParamKind, default: impl FnOnce() -> symcl_core::Result<ParamVector>) -> PyResult<ParamVector> {
    match theta0 {
        Some(v) => ParamVector::new(kind, v).map_err(err),
        None => default().map_err(err),
    }
}

/// Symbolic composite-likelihood fit of the Smith model to histograms.
#[pyfunction]
#[pyo3(signature = (series, coords, order=2, margins="constant", theta0=None, max_iter=5000))]
fn fit(
    py: Python<'_>,
    series: &HistogramSeries,
    coords: Vec<(f64, f64)>,
    order: usize,
    margins: &str,
    theta0: Option<Vec<f64>>,
    max_iter: usize,
) -> PyResult<FitResult> {
    let kind = kind(margins)?;
    let layout = layout(coords)?;
    let merged = series.inner.merged();
    py.detach(|| {
        let obj = SymbolicObjective::new(&merged, &layout, &CompositeConfig::new(order), kind).map_err(err)?;
        let theta0 = start(theta0, kind, || default_theta0(&merged, &layout, kind))?;
        run_fit(&obj, theta0, &layout, max_iter)
    })
}

/// Classic composite-likelihood fit on micro-data (finite-difference densities).
#[pyfunction]
#[pyo3(signature = (data, coords, order=2, margins="constant", theta0=None, max_iter=5000))]
fn fit_classic(
    py: Python<'_>,
    data: Vec<Vec<f64>>,
    coords: Vec<(f64, f64)>,
    order: usize,
    margins: &str,
    theta0: Option<Vec<f64>>,
    max_iter: usize,
) -> PyResult<FitResult> {
    let kind = kind(margins)?;
    let layout = layout(coords)?;
    let x = matrix(data)?;
    py.detach(|| {
        let obj = ClassicObjective::new(x.view(), &layout, &CompositeConfig::new(order), kind).map_err(err)?;
        let theta0 = start(theta0, kind, || default_theta0_data(x.view(), &layout, kind))?;
        run_fit(&obj, theta0, &layout, max_iter)
    })
}

/// Copy of `fit` with sandwich matrices and standard errors computed from
/// the histograms of `series` (its number of histograms sets T).
#[pyfunction]
#[pyo3(signature = (fit, series, coords, order=2))]
fn variance(py: Python<'_>, fit: &FitResult, series: &HistogramSeries, coords: Vec<(f64, f64)>, order: usize) -> PyResult<FitResult> {
    let layout = layout(coords)?;
    let mut inner = fit.inner.clone();
    py.detach(|| {
        let obj = SymbolicObjective::new(&series.inner, &layout, &CompositeConfig::new(order), inner.kind).map_err(err)?;
        let v = sandwich(&obj, &inner.theta_hat).map_err(err)?;
        inner.attach_variance(&v);
        Ok(FitResult { inner })
    })
}

/// Simulates `n` Smith realisations at `k` random sites.
/// Returns `(coords, data)` with `data` as `n` rows of `k` values.
#[pyfunction]
#[pyo3(signature = (k, n, sigma, margins=vec![0.0, 1.0, 0.0], seed=0, replicate=0))]
#[allow(clippy::type_complexity)]
fn simulate(
    py: Python<'_>,
    k: usize,
    n: usize,
    sigma: (f64, f64, f64),
    margins: Vec<f64>,
    seed: u64,
    replicate: u64,
) -> PyResult<(Vec<(f64, f64)>, Vec<Vec<f64>>)> {
    let dep = Dependence::new(sigma.0, sigma.1, sigma.2).map_err(err)?;
    let mut config = SimConfig::new(seed, k, n, dep, self::margins(margins)?);
    config.replicate = replicate;
    let (layout, data) = py.detach(|| core_simulate(&config)).map_err(err)?;
    let coords = layout.sites().iter().map(|s| (s.x, s.y)).collect();
    Ok((coords, data.rows().into_iter().map(|r| r.to_vec()).collect()))
}

/// Smith joint CDF at `y` for 2 or 3 of the given sites.
#[pyfunction]
#[pyo3(signature = (y, sites, sigma, coords, margins=vec![0.0, 1.0, 0.0]))]
fn smith_cdf(y: Vec<f64>, sites: Vec<usize>, sigma: (f64, f64, f64), coords: Vec<(f64, f64)>, margins: Vec<f64>) -> PyResult<f64> {
    let params = SmithParams {
        dependence: Dependence::new(sigma.0, sigma.1, sigma.2).map_err(err)?,
        margins: self::margins(margins)?,
    };
    core_smith_cdf(&y, &sites, &params, &layout(coords)?).map_err(err)
}

#[pyfunction]
fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> f64 {
    core_bvn(h, k, rho)
}

/// Level exceeded on average once every `years` years.
#[pyfunction]
#[pyo3(signature = (mu, sigma, xi, years, blocks_per_year=1.0))]
fn return_level(mu: f64, sigma: f64, xi: f64, years: f64, blocks_per_year: f64) -> PyResult<f64> {
    let g = GevParams::new(mu, sigma, xi).map_err(err)?;
    core_return_level(&g, years, blocks_per_year).map_err(err)
}

/// Classic and symbolic term counts as a dict.
#[pyfunction]
#[pyo3(signature = (n, k, order=2, bins=None))]
fn count_terms(n: u64, k: u64, order: u32, bins: Option<u64>) -> PyResult<BTreeMap<String, Option<u64>>> {
    let c = core_count_terms(n, k, order, bins, None).map_err(err)?;
    Ok(BTreeMap::from([("classic".into(), Some(c.classic)), ("symbolic_max".into(), c.symbolic_max)]))
}

#[pymodule]
#[pyo3(name = "symcl")]
fn symcl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SymclError", m.py().get_type::<SymclError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<HistogramSeries>()?;
    m.add_class::<FitResult>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(fit_classic, m)?)?;
    m.add_function(wrap_pyfunction!(variance, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(smith_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(bivariate_normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(return_level, m)?)?;
    m.add_function(wrap_pyfunction!(count_terms, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
