//! Interchange formats.
//!
//! - Micro-data CSV: a header row of site ids, then one row per observation.
//! - Sites CSV: columns `id,x,y`.
//! - Histogram JSON: `{breakpoints, histograms: [{span: [lo, hi], counts: [{bin, n}]}], meta}`
//!   with 1-based bins and half-open row spans.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{BinGrid, HistogramSeries, SparseHistogram};
use crate::models::{Site, SiteLayout};

/// Site ids from the header and the `N x K` data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroData {
    pub ids: Vec<String>,
    pub data: Array2<f64>,
}

pub fn read_micro_csv(reader: impl Read) -> Result<MicroData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let ids: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if ids.is_empty() || ids.iter().any(String::is_empty) {
        return Err(Error::Format("micro-data header must name every column".into()));
    }
    let k = ids.len();
    let mut flat = Vec::new();
    let mut rows = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != k {
            return Err(Error::Format(format!("row {row} has {} fields, expected {k}", rec.len())));
        }
        for (column, field) in rec.iter().enumerate() {
            let value: f64 = field
                .parse()
                .map_err(|_| Error::Format(format!("row {row}, column {column}: cannot parse {field:?}")))?;
            if !value.is_finite() {
                return Err(Error::NonFiniteData { row, column, value });
            }
            flat.push(value);
        }
        rows += 1;
    }
    let data = Array2::from_shape_vec((rows, k), flat).expect("row lengths checked");
    Ok(MicroData { ids, data })
}

pub fn write_micro_csv(writer: impl Write, ids: &[String], data: ArrayView2<'_, f64>) -> Result<()> {
    if ids.len() != data.ncols() {
        return Err(Error::InvalidArgument(format!("{} ids for {} columns", ids.len(), data.ncols())));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ids)?;
    for row in data.rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sites_csv(reader: impl Read) -> Result<SiteLayout> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let sites = rdr.deserialize::<Site>().collect::<std::result::Result<Vec<_>, _>>()?;
    SiteLayout::new(sites)
}

pub fn write_sites_csv(writer: impl Write, layout: &SiteLayout) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in layout.sites() {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCount {
    pub bin: Vec<u32>,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRecord {
    pub span: [usize; 2],
    pub counts: Vec<BinCount>,
}

/// Serialized form of a [`HistogramSeries`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramFile {
    pub breakpoints: Vec<Vec<f64>>,
    pub histograms: Vec<HistogramRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

impl HistogramFile {
    pub fn from_series(series: &HistogramSeries, meta: Option<serde_json::Value>) -> Self {
        let histograms = series
            .histograms()
            .iter()
            .zip(series.spans())
            .map(|(h, span)| HistogramRecord {
                span: [span.start, span.end],
                counts: h.iter().map(|(bin, n)| BinCount { bin: bin.clone(), n }).collect(),
            })
            .collect();
        Self { breakpoints: series.grid().all_breakpoints().to_vec(), histograms, meta }
    }

    pub fn to_series(&self) -> Result<HistogramSeries> {
        let grid = Arc::new(BinGrid::new(self.breakpoints.clone())?);
        let mut hists = Vec::with_capacity(self.histograms.len());
        let mut spans = Vec::with_capacity(self.histograms.len());
        for rec in &self.histograms {
            hists.push(SparseHistogram::from_counts(grid.clone(), rec.counts.iter().map(|c| (c.bin.clone(), c.n)))?);
            spans.push(rec.span[0]..rec.span[1]);
        }
        HistogramSeries::new(grid, hists, spans)
    }
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_histograms(path: impl AsRef<Path>) -> Result<(HistogramSeries, Option<serde_json::Value>)> {
    let file: HistogramFile = read_json(path)?;
    Ok((file.to_series()?, file.meta))
}
