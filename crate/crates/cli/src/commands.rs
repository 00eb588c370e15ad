use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context as _, Result};
use ndarray::Array2;
use serde_json::json;

use symcl::histogram::{aggregate_with, block_maxima, detrend_columns, make_grid, HistogramSeries};
use symcl::inference::{
    default_theta0, default_theta0_data, fit_scaled, gev_qq, return_level, sandwich, ClassicObjective, FitOptions,
    FitResult, Objective, ParamKind, ParamVector, SymbolicObjective,
};
use symcl::io::{read_histograms, read_micro_csv, read_sites_csv, write_micro_csv, write_sites_csv, HistogramFile};
use symcl::likelihood::{count_terms, CompositeConfig};
use symcl::models::{Dependence, MarginSpec, SiteLayout};
use symcl::simulate::{simulate as run_simulation, SimConfig, Window};

use crate::manifest::{manifest_path, write_atomic, RunManifest};
use crate::{AggregateArgs, BenchArgs, FitArgs, MarginKind, ReportArgs, SimulateArgs, VarianceArgs};

/// Invalid flag combinations detected after parsing.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub struct Context {
    pub seed: u64,
    pub threads: usize,
}

impl Context {
    fn manifest<T: serde::Serialize>(&self, command: &str, args: &T) -> Result<RunManifest> {
        Ok(RunManifest::new(command, serde_json::to_value(args)?, self.seed, self.threads))
    }
}

fn write_json_atomic<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn to_csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> symcl::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn read_micro(path: &Path) -> Result<symcl::io::MicroData> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_micro_csv(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn read_sites(path: &Path) -> Result<SiteLayout> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_sites_csv(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn read_fit(path: &Path) -> Result<FitResult> {
    symcl::io::read_json(path).with_context(|| format!("reading {}", path.display()))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn margin_spec(values: &[f64]) -> Result<MarginSpec> {
    match values {
        [mu, sigma, xi] => Ok(MarginSpec::Constant { mu: *mu, sigma: *sigma, xi: *xi }),
        [a0, a1, a2, b0, b1, b2, xi] => {
            Ok(MarginSpec::SpatiallyVarying { alpha: [*a0, *a1, *a2], beta: [*b0, *b1, *b2], xi: *xi })
        }
        _ => Err(usage(format!("--margins takes 3 or 7 values, got {}", values.len()))),
    }
}

fn dependence(values: &[f64]) -> Result<Dependence> {
    match values {
        [s11, s12, s22] => Ok(Dependence::new(*s11, *s12, *s22)?),
        _ => Err(usage(format!("--sigma takes 3 values, got {}", values.len()))),
    }
}

fn param_kind(kind: MarginKind) -> ParamKind {
    match kind {
        MarginKind::Constant => ParamKind::Constant,
        MarginKind::Spatial => ParamKind::Spatial,
    }
}

fn coordinate_scale(layout: &SiteLayout) -> f64 {
    let [sx, sy] = layout.coordinate_spread();
    0.5 * (sx + sy)
}

/// Site ids stored with a histogram file must match the sites CSV.
fn check_site_ids(meta: &Option<serde_json::Value>, layout: &SiteLayout, k: usize) -> Result<()> {
    if layout.len() != k {
        bail!(symcl::Error::InvalidArgument(format!("{} sites for {k} data columns", layout.len())));
    }
    if let Some(ids) = meta.as_ref().and_then(|m| m.get("sites")).and_then(|v| v.as_array()) {
        let ids: Vec<&str> = ids.iter().filter_map(|v| v.as_str()).collect();
        let expect = layout.ids();
        if ids != expect {
            bail!(symcl::Error::InvalidArgument(format!(
                "histogram columns {ids:?} do not match the sites file {expect:?}"
            )));
        }
    }
    Ok(())
}

pub fn simulate(ctx: &Context, args: &SimulateArgs) -> Result<()> {
    let mut manifest = ctx.manifest("simulate", args)?;
    let w = &args.window;
    if w.len() != 4 {
        return Err(usage(format!("--window takes 4 values (x_min,x_max,y_min,y_max), got {}", w.len())));
    }
    let mut config = SimConfig::new(ctx.seed, args.k, args.n, dependence(&args.sigma)?, margin_spec(&args.margins)?);
    config.window = Window { x_min: w[0], x_max: w[1], y_min: w[2], y_max: w[3] };
    config.replicate = args.replicate;

    let start = Instant::now();
    let (layout, data) = run_simulation(&config)?;
    manifest.time("simulate", start.elapsed().as_secs_f64());

    let sites = args.out_dir.join("sites.csv");
    let micro = args.out_dir.join("data.csv");
    let meta = args.out_dir.join("simulation.json");
    write_atomic(&sites, &to_csv_bytes(|b| write_sites_csv(b, &layout))?)?;
    write_atomic(&micro, &to_csv_bytes(|b| write_micro_csv(b, &layout.ids(), data.view()))?)?;
    let mut sidecar = serde_json::to_value(&config)?;
    sidecar["truncation_radius"] = json!(config.truncation_radius());
    sidecar["stop_rule"] = json!("stop when the next storm's largest possible value is below every site's running maximum");
    write_json_atomic(&meta, &sidecar)?;
    for p in [&sites, &micro, &meta] {
        manifest.output(p)?;
    }
    manifest.write(&args.out_dir.join("manifest.json"))
}

pub fn aggregate(ctx: &Context, args: &AggregateArgs) -> Result<()> {
    let mut manifest = ctx.manifest("aggregate", args)?;
    manifest.input(&args.input)?;
    let micro = read_micro(&args.input)?;

    let start = Instant::now();
    let mut data = micro.data;
    if let Some(len) = args.block_len {
        data = block_maxima(data.view(), len)?;
    }
    if args.detrend {
        data = detrend_columns(data.view())?;
    }
    let breaks: Option<Vec<Vec<f64>>> = match &args.breaks {
        Some(p) => {
            manifest.input(p)?;
            Some(symcl::io::read_json(p).with_context(|| format!("reading {}", p.display()))?)
        }
        None => None,
    };
    let grid = Arc::new(make_grid(data.view(), args.bins, breaks.as_deref())?);
    let series = aggregate_with(data.view(), grid, args.t, args.clamp)?;
    manifest.time("aggregate", start.elapsed().as_secs_f64());

    let meta = json!({
        "sites": micro.ids,
        "rows": data.nrows(),
        "bins": args.bins,
        "breakpoint_rule": if breaks.is_some() { "explicit" } else { "equal_width" },
        "block_len": args.block_len,
        "detrend": args.detrend,
    });
    write_json_atomic(&args.output, &HistogramFile::from_series(&series, Some(meta)))?;
    manifest.output(&args.output)?;
    manifest.write(&manifest_path(&args.output))
}

/// Objective for the input: histograms (symbolic) or micro-data (classic).
enum Loaded {
    Symbolic(HistogramSeries),
    Classic(Array2<f64>),
}

fn load_input(path: &Path, classic: bool, layout: &SiteLayout) -> Result<Loaded> {
    if classic {
        if is_json(path) {
            return Err(usage("--classic needs a micro-data CSV, not a histogram file"));
        }
        let micro = read_micro(path)?;
        if micro.ids != layout.ids() {
            bail!(symcl::Error::InvalidArgument(format!(
                "data columns {:?} do not match the sites file {:?}",
                micro.ids,
                layout.ids()
            )));
        }
        return Ok(Loaded::Classic(micro.data));
    }
    if !is_json(path) {
        return Err(usage("symbolic fits read a histogram JSON; aggregate the CSV first or pass --classic"));
    }
    let (series, meta) = read_histograms(path).with_context(|| format!("reading {}", path.display()))?;
    check_site_ids(&meta, layout, series.dims())?;
    Ok(Loaded::Symbolic(series))
}

pub fn fit(ctx: &Context, args: &FitArgs) -> Result<()> {
    let mut manifest = ctx.manifest("fit", args)?;
    manifest.input(&args.input)?;
    manifest.input(&args.sites)?;
    let layout = read_sites(&args.sites)?;
    let kind = param_kind(args.margins);
    let config = CompositeConfig::new(args.order as usize);
    let options = FitOptions { max_iter: args.max_iter, restarts: args.restarts, ..FitOptions::default() };

    let start = Instant::now();
    let mut metadata = serde_json::Map::new();
    let (objective, theta0): (Box<dyn Objective>, ParamVector) = match load_input(&args.input, args.classic, &layout)? {
        Loaded::Symbolic(series) => {
            // All histograms share one grid, so the fit only needs their sum.
            let merged = series.merged();
            metadata.insert("mode".into(), json!("symbolic"));
            metadata.insert("rows".into(), json!(merged.total()));
            metadata.insert("histograms".into(), json!(series.len()));
            metadata.insert(
                "bins".into(),
                json!((0..merged.dims()).map(|k| merged.grid().bins(k)).collect::<Vec<_>>()),
            );
            let theta0 = default_theta0(&merged, &layout, kind)?;
            let obj = SymbolicObjective::new(&merged, &layout, &config, kind)?;
            metadata.insert("terms".into(), json!(obj.composite().term_count()));
            (Box::new(obj), theta0)
        }
        Loaded::Classic(data) => {
            metadata.insert("mode".into(), json!("classic"));
            metadata.insert("rows".into(), json!(data.nrows()));
            let theta0 = default_theta0_data(data.view(), &layout, kind)?;
            (Box::new(ClassicObjective::new(data.view(), &layout, &config, kind)?), theta0)
        }
    };
    manifest.time("aggregate", start.elapsed().as_secs_f64());
    let theta0 = match &args.theta0 {
        Some(v) => ParamVector::new(kind, v.clone()).map_err(|e| usage(format!("--theta0: {e}")))?,
        None => theta0,
    };

    let start = Instant::now();
    let mut result = fit_scaled(objective.as_ref(), &theta0, &options, Some(coordinate_scale(&layout)))?;
    manifest.time("optimize", start.elapsed().as_secs_f64());
    metadata.insert("order".into(), json!(args.order));
    metadata.insert("sites".into(), json!(layout.len()));
    metadata.insert("theta0".into(), json!(theta0.values));
    result.metadata.extend(metadata);

    write_json_atomic(&args.output, &result)?;
    manifest.output(&args.output)?;
    manifest.write(&manifest_path(&args.output))
}

pub fn variance(ctx: &Context, args: &VarianceArgs) -> Result<()> {
    let mut manifest = ctx.manifest("variance", args)?;
    for p in [&args.fit, &args.input, &args.sites] {
        manifest.input(p)?;
    }
    let mut result = read_fit(&args.fit)?;
    let layout = read_sites(&args.sites)?;
    let order = result.metadata.get("order").and_then(|v| v.as_u64()).unwrap_or(2) as usize;
    let config = CompositeConfig::new(order);
    let kind = result.kind;

    let start = Instant::now();
    let objective: Box<dyn Objective> = if args.classic {
        match load_input(&args.input, true, &layout)? {
            Loaded::Classic(data) => Box::new(ClassicObjective::new(data.view(), &layout, &config, kind)?),
            Loaded::Symbolic(..) => unreachable!(),
        }
    } else if is_json(&args.input) {
        if args.t.is_some() {
            return Err(usage("--T re-aggregates micro-data; a histogram file already fixes T"));
        }
        match load_input(&args.input, false, &layout)? {
            Loaded::Symbolic(series) => Box::new(SymbolicObjective::new(&series, &layout, &config, kind)?),
            Loaded::Classic(_) => unreachable!(),
        }
    } else {
        let t = args.t.ok_or_else(|| usage("micro-data input needs --T (or --classic)"))?;
        let micro = read_micro(&args.input)?;
        check_site_ids(&Some(json!({ "sites": micro.ids })), &layout, micro.data.ncols())?;
        let grid = Arc::new(make_grid(micro.data.view(), args.bins, None)?);
        let series = aggregate_with(micro.data.view(), grid, t, false)?;
        Box::new(SymbolicObjective::new(&series, &layout, &config, kind)?)
    };
    manifest.time("aggregate", start.elapsed().as_secs_f64());

    let start = Instant::now();
    let v = sandwich(objective.as_ref(), &result.theta_hat)?;
    manifest.time("variance", start.elapsed().as_secs_f64());
    result.attach_variance(&v);
    result.metadata.insert("variance_mode".into(), json!(if args.classic { "classic" } else { "symbolic" }));
    if let Some(t) = args.t {
        result.metadata.insert("variance_histograms".into(), json!(t));
    }
    write_json_atomic(&args.output, &result)?;
    manifest.output(&args.output)?;
    manifest.write(&manifest_path(&args.output))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| anyhow!("csv buffer: {e}"))
}

pub fn report(ctx: &Context, args: &ReportArgs) -> Result<()> {
    let mut manifest = ctx.manifest("report", args)?;
    let mut outputs: Vec<PathBuf> = Vec::new();

    if let Some(fit_path) = &args.fit {
        let sites_path = args.sites.as_ref().ok_or_else(|| usage("--fit needs --sites"))?;
        manifest.input(fit_path)?;
        manifest.input(sites_path)?;
        let fit = read_fit(fit_path)?;
        let layout = read_sites(sites_path)?;
        let margins = fit.params()?.margins.at_all(&layout)?;

        let mut rows = Vec::new();
        for (site, g) in layout.sites().iter().zip(&margins) {
            let level = return_level(g, args.years, args.blocks_per_year)?;
            rows.push(vec![
                site.id.clone(),
                site.x.to_string(),
                site.y.to_string(),
                g.mu.to_string(),
                g.sigma.to_string(),
                g.xi.to_string(),
                level.to_string(),
            ]);
        }
        let path = args.out_dir.join("return_levels.csv");
        write_atomic(&path, &csv_bytes(&["site", "x", "y", "mu", "sigma", "xi", "return_level"], rows)?)?;
        outputs.push(path);

        if let Some(data_path) = &args.data {
            manifest.input(data_path)?;
            let micro = read_micro(data_path)?;
            check_site_ids(&Some(json!({ "sites": micro.ids })), &layout, micro.data.ncols())?;
            let mut rows = Vec::new();
            for (k, g) in margins.iter().enumerate() {
                for (emp, theo) in gev_qq(&micro.data.column(k).to_vec(), g)? {
                    rows.push(vec![micro.ids[k].clone(), emp.to_string(), theo.to_string()]);
                }
            }
            let path = args.out_dir.join("qq.csv");
            write_atomic(&path, &csv_bytes(&["site", "empirical", "theoretical"], rows)?)?;
            outputs.push(path);
        }
    } else if args.data.is_some() {
        return Err(usage("--data needs --fit and --sites"));
    }

    if let Some(t) = &args.terms {
        let (n, k, order, bins) = match t.as_slice() {
            [n, k, j] => (*n, *k, *j, None),
            [n, k, j, b] => (*n, *k, *j, Some(*b)),
            _ => return Err(usage("--terms takes N,K,order[,B]")),
        };
        let order = u32::try_from(order).map_err(|_| usage("order must be 2 or 3"))?;
        let c = count_terms(n, k, order, bins, None)?;
        let row = vec![
            n.to_string(),
            k.to_string(),
            order.to_string(),
            bins.map(|b| b.to_string()).unwrap_or_default(),
            c.classic.to_string(),
            c.symbolic_max.map(|v| v.to_string()).unwrap_or_default(),
        ];
        let path = args.out_dir.join("term_counts.csv");
        write_atomic(&path, &csv_bytes(&["n", "k", "order", "bins", "classic", "symbolic_max"], [row])?)?;
        outputs.push(path);
    }

    if !args.replicates.is_empty() {
        let mut fits = Vec::with_capacity(args.replicates.len());
        for p in &args.replicates {
            manifest.input(p)?;
            fits.push(read_fit(p)?);
        }
        let names = fits[0].names.clone();
        if fits.iter().any(|f| f.names != names) {
            bail!(symcl::Error::InvalidArgument("replicate fits have different parameter layouts".into()));
        }
        if let Some(truth) = &args.truth {
            if truth.len() != names.len() {
                return Err(usage(format!("--truth needs {} values", names.len())));
            }
        }
        let n = fits.len() as f64;
        let mut rows = Vec::new();
        for (i, name) in names.iter().enumerate() {
            let mean = fits.iter().map(|f| f.theta_hat[i]).sum::<f64>() / n;
            let sd = if fits.len() > 1 {
                (fits.iter().map(|f| (f.theta_hat[i] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                f64::NAN
            };
            let mut row = vec![name.clone(), mean.to_string(), sd.to_string(), fits.len().to_string()];
            if let Some(truth) = &args.truth {
                row.push(truth[i].to_string());
                row.push((mean - truth[i]).to_string());
            }
            rows.push(row);
        }
        let mut header = vec!["parameter", "mean", "sd", "replicates"];
        if args.truth.is_some() {
            header.extend(["truth", "bias"]);
        }
        let path = args.out_dir.join("replicates.csv");
        write_atomic(&path, &csv_bytes(&header, rows)?)?;
        outputs.push(path);
    }

    if outputs.is_empty() {
        return Err(usage("nothing to report: pass --fit/--sites, --terms or --replicates"));
    }
    for p in &outputs {
        manifest.output(p)?;
    }
    manifest.write(&args.out_dir.join("report.manifest.json"))
}

pub fn bench(ctx: &Context, args: &BenchArgs) -> Result<()> {
    let mut manifest = ctx.manifest("bench", args)?;
    let dep = dependence(&args.sigma)?;
    let config = CompositeConfig::pairwise();
    let kind = ParamKind::Constant;
    let options = FitOptions { max_iter: args.max_iter, ..FitOptions::default() };
    let mut rows = Vec::new();
    for &n in &args.n {
        let (layout, data) = run_simulation(&SimConfig::new(ctx.seed, args.k, n, dep, MarginSpec::gumbel()))?;
        let scale = Some(coordinate_scale(&layout));

        let start = Instant::now();
        let grid = Arc::new(make_grid(data.view(), args.bins, None)?);
        let series = aggregate_with(data.view(), grid, args.t, false)?.merged();
        let t_hist = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let obj = SymbolicObjective::new(&series, &layout, &config, kind)?;
        let sym = fit_scaled(&obj, &default_theta0(&series, &layout, kind)?, &options, scale)?;
        let t_s = start.elapsed().as_secs_f64();

        let (t_c, iter_c) = if args.no_classic {
            (String::new(), String::new())
        } else {
            let start = Instant::now();
            let obj = ClassicObjective::new(data.view(), &layout, &config, kind)?;
            let cl = fit_scaled(&obj, &default_theta0_data(data.view(), &layout, kind)?, &options, scale)?;
            (start.elapsed().as_secs_f64().to_string(), cl.iterations.to_string())
        };
        manifest.time("aggregate", t_hist);
        manifest.time("optimize", t_s);
        rows.push(vec![
            n.to_string(),
            args.k.to_string(),
            args.bins.to_string(),
            args.t.to_string(),
            t_s.to_string(),
            t_c,
            t_hist.to_string(),
            sym.iterations.to_string(),
            iter_c,
        ]);
    }
    let header = ["n", "k", "bins", "histograms", "t_s", "t_c", "t_hist", "iterations_s", "iterations_c"];
    write_atomic(&args.output, &csv_bytes(&header, rows)?)?;
    manifest.output(&args.output)?;
    manifest.write(&manifest_path(&args.output))
}
