use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::Arc;

use ndarray::ArrayView2;
use rayon::prelude::*;

use super::grid::BinGrid;
use super::validate_index_set;
use crate::error::{Error, Result};

/// K-length bin multi-index, 1-based in every margin.
pub type BinIndex = Vec<u32>;

/// Rows binned per parallel work unit. Fixed so results never depend on the
/// worker count.
const CHUNK_ROWS: usize = 4096;

/// A K-dimensional histogram stored as nonzero `(bin, count)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHistogram {
    grid: Arc<BinGrid>,
    counts: BTreeMap<BinIndex, u64>,
    total: u64,
}

impl SparseHistogram {
    pub fn empty(grid: Arc<BinGrid>) -> Self {
        Self { grid, counts: BTreeMap::new(), total: 0 }
    }

    /// Builds a histogram from `(bin, count)` pairs; duplicates are summed and
    /// zero counts dropped.
    pub fn from_counts(grid: Arc<BinGrid>, entries: impl IntoIterator<Item = (BinIndex, u64)>) -> Result<Self> {
        let mut h = Self::empty(grid);
        for (bin, n) in entries {
            h.check_bin(&bin)?;
            if n > 0 {
                *h.counts.entry(bin).or_insert(0) += n;
                h.total += n;
            }
        }
        Ok(h)
    }

    fn check_bin(&self, bin: &[u32]) -> Result<()> {
        if bin.len() != self.grid.dims() {
            return Err(Error::InvalidArgument(format!(
                "bin {bin:?} has {} coordinates, grid has {} margins",
                bin.len(),
                self.grid.dims()
            )));
        }
        for (k, &b) in bin.iter().enumerate() {
            if b < 1 || b as usize > self.grid.bins(k) {
                return Err(Error::InvalidArgument(format!(
                    "bin {bin:?} out of range in margin {k} (1..={})",
                    self.grid.bins(k)
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &Arc<BinGrid> {
        &self.grid
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, bin: &[u32]) -> u64 {
        self.counts.get(bin).copied().unwrap_or(0)
    }

    /// Number of occupied bins.
    pub fn occupied(&self) -> usize {
        self.counts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BinIndex, u64)> + '_ {
        self.counts.iter().map(|(b, &n)| (b, n))
    }

    fn add_all(&mut self, other: &BTreeMap<BinIndex, u64>) {
        for (bin, &n) in other {
            *self.counts.entry(bin.clone()).or_insert(0) += n;
            self.total += n;
        }
    }

    /// Sparse marginal counts over `index_set` (0-based margins).
    pub fn project(&self, index_set: &[usize]) -> Result<BTreeMap<BinIndex, u64>> {
        validate_index_set(index_set, self.grid.dims())?;
        let mut out: BTreeMap<BinIndex, u64> = BTreeMap::new();
        for (bin, &n) in &self.counts {
            let key: BinIndex = index_set.iter().map(|&i| bin[i]).collect();
            *out.entry(key).or_insert(0) += n;
        }
        Ok(out)
    }
}

/// T histograms on one shared grid, each covering a contiguous block of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSeries {
    grid: Arc<BinGrid>,
    histograms: Vec<SparseHistogram>,
    spans: Vec<Range<usize>>,
}

impl HistogramSeries {
    pub fn new(grid: Arc<BinGrid>, histograms: Vec<SparseHistogram>, spans: Vec<Range<usize>>) -> Result<Self> {
        if histograms.is_empty() {
            return Err(Error::InvalidArgument("a histogram series needs at least one histogram".into()));
        }
        if histograms.len() != spans.len() {
            return Err(Error::InvalidArgument(format!(
                "{} histograms but {} block spans",
                histograms.len(),
                spans.len()
            )));
        }
        let mut next = 0;
        for (t, (h, span)) in histograms.iter().zip(&spans).enumerate() {
            if !Arc::ptr_eq(&h.grid, &grid) && *h.grid != *grid {
                return Err(Error::InvalidArgument(format!("histogram {t} uses a different grid")));
            }
            if span.start != next || span.end < span.start {
                return Err(Error::InvalidArgument(format!(
                    "block spans must be contiguous and ordered; span {t} is {span:?}"
                )));
            }
            if h.total != (span.end - span.start) as u64 {
                return Err(Error::InvalidArgument(format!(
                    "histogram {t} holds {} observations but spans {} rows",
                    h.total,
                    span.end - span.start
                )));
            }
            next = span.end;
        }
        // Share one allocation so every histogram references the identical grid.
        let histograms = histograms
            .into_iter()
            .map(|h| SparseHistogram { grid: grid.clone(), ..h })
            .collect();
        Ok(Self { grid, histograms, spans })
    }

    pub fn grid(&self) -> &Arc<BinGrid> {
        &self.grid
    }

    pub fn histograms(&self) -> &[SparseHistogram] {
        &self.histograms
    }

    pub fn spans(&self) -> &[Range<usize>] {
        &self.spans
    }

    /// Number of histograms T.
    pub fn len(&self) -> usize {
        self.histograms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.histograms.is_empty()
    }

    /// Total observations N.
    pub fn total(&self) -> u64 {
        self.histograms.iter().map(|h| h.total).sum()
    }

    pub fn dims(&self) -> usize {
        self.grid.dims()
    }
}

/// Splits `n` rows into `t` contiguous blocks whose sizes differ by at most
/// one; the first `n mod t` blocks get the extra row.
pub(crate) fn block_spans(n: usize, t: usize) -> Vec<Range<usize>> {
    let base = n / t;
    let rem = n % t;
    let mut start = 0;
    (0..t)
        .map(|i| {
            let len = base + usize::from(i < rem);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Bins the rows of `data` into `t` temporal blocks on `grid`.
pub fn aggregate(data: ArrayView2<'_, f64>, grid: Arc<BinGrid>, t: usize) -> Result<HistogramSeries> {
    aggregate_with(data, grid, t, false)
}

/// [`aggregate`] with optional clamping of out-of-grid values into the edge bins.
pub fn aggregate_with(data: ArrayView2<'_, f64>, grid: Arc<BinGrid>, t: usize, clamp: bool) -> Result<HistogramSeries> {
    let (n, k) = data.dim();
    if k != grid.dims() {
        return Err(Error::InvalidArgument(format!("data has {k} columns, grid has {} margins", grid.dims())));
    }
    if t < 1 {
        return Err(Error::InvalidArgument("number of histograms T must be at least 1".into()));
    }
    if t > n {
        return Err(Error::InvalidArgument(format!("T = {t} exceeds the number of rows N = {n}")));
    }
    let spans = block_spans(n, t);

    // (block, row range) work units in row order
    let units: Vec<(usize, Range<usize>)> = spans
        .iter()
        .enumerate()
        .flat_map(|(b, span)| {
            let mut out = Vec::new();
            let mut s = span.start;
            while s < span.end {
                let e = (s + CHUNK_ROWS).min(span.end);
                out.push((b, s..e));
                s = e;
            }
            out
        })
        .collect();

    let partials: Vec<Result<BTreeMap<BinIndex, u64>>> = units
        .par_iter()
        .map(|(_, rows)| bin_rows(data, &grid, rows.clone(), clamp))
        .collect();

    let mut histograms: Vec<SparseHistogram> = (0..t).map(|_| SparseHistogram::empty(grid.clone())).collect();
    for ((block, _), partial) in units.iter().zip(partials) {
        histograms[*block].add_all(&partial?);
    }
    HistogramSeries::new(grid, histograms, spans)
}

fn bin_rows(data: ArrayView2<'_, f64>, grid: &BinGrid, rows: Range<usize>, clamp: bool) -> Result<BTreeMap<BinIndex, u64>> {
    let mut local: BTreeMap<BinIndex, u64> = BTreeMap::new();
    let k = grid.dims();
    for row in rows {
        let mut bin = Vec::with_capacity(k);
        for col in 0..k {
            let v = data[[row, col]];
            if !v.is_finite() {
                return Err(Error::NonFiniteData { row, column: col, value: v });
            }
            let b = if clamp {
                grid.locate_clamped(col, v)
            } else {
                grid.locate(col, v).ok_or_else(|| {
                    let (lo, hi) = grid.span(col);
                    Error::OutsideGrid { row, margin: col, value: v, lo, hi }
                })?
            };
            bin.push(b);
        }
        *local.entry(bin).or_insert(0) += 1;
    }
    Ok(local)
}

/// Bin-wise sum of all histograms in the series.
pub fn merge(series: &HistogramSeries) -> SparseHistogram {
    let mut out = SparseHistogram::empty(series.grid.clone());
    for h in &series.histograms {
        out.add_all(&h.counts);
    }
    out
}

impl HistogramSeries {
    /// The series collapsed into a single histogram spanning all rows.
    pub fn merged(&self) -> HistogramSeries {
        let h = merge(self);
        let n = h.total as usize;
        HistogramSeries { grid: self.grid.clone(), histograms: vec![h], spans: vec![0..n] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn unit_grid(k: usize, b: usize) -> Arc<BinGrid> {
        let br: Vec<f64> = (0..=b).map(|i| i as f64 / b as f64).collect();
        Arc::new(BinGrid::new(vec![br; k]).unwrap())
    }

    #[test]
    fn block_split_rules() {
        assert_eq!(block_spans(6, 3), vec![0..2, 2..4, 4..6]);
        let sizes: Vec<usize> = block_spans(7, 3).iter().map(|r| r.len()).collect();
        assert_eq!(sizes, vec![3, 2, 2]);
    }

    #[test]
    fn aggregate_counts_and_spans() {
        let data = array![[0.1, 0.9], [0.1, 0.9], [0.6, 0.2], [0.5, 0.5], [0.9, 0.1], [0.2, 0.7]];
        let series = aggregate(data.view(), unit_grid(2, 2), 3).unwrap();
        assert_eq!(series.spans(), &[0..2, 2..4, 4..6]);
        assert_eq!(series.histograms()[0].get(&[1, 2]), 2);
        assert_eq!(series.histograms()[1].get(&[2, 1]), 1);
        assert_eq!(series.histograms()[1].get(&[1, 1]), 1);
        assert_eq!(series.total(), 6);
        let m = merge(&series);
        assert_eq!(m.total(), 6);
        assert_eq!(m.get(&[1, 2]), 3);
    }

    #[test]
    fn merge_is_additive() {
        let grid = unit_grid(1, 2);
        let a = SparseHistogram::from_counts(grid.clone(), [(vec![1], 2)]).unwrap();
        let b = SparseHistogram::from_counts(grid.clone(), [(vec![1], 3)]).unwrap();
        let s = HistogramSeries::new(grid, vec![a.clone(), b], vec![0..2, 2..5]).unwrap();
        let m = merge(&s);
        assert_eq!(m.get(&[1]), 5);
        assert_eq!(m.occupied(), 1);
        let single = HistogramSeries::new(a.grid().clone(), vec![a.clone()], vec![0..2]).unwrap();
        assert_eq!(merge(&single), a);
    }

    #[test]
    fn outside_grid_is_an_error_unless_clamped() {
        let data = array![[0.5], [1.5]];
        match aggregate(data.view(), unit_grid(1, 4), 1) {
            Err(Error::OutsideGrid { row, margin, value, .. }) => {
                assert_eq!((row, margin), (1, 0));
                assert_eq!(value, 1.5);
            }
            other => panic!("unexpected {other:?}"),
        }
        let s = aggregate_with(data.view(), unit_grid(1, 4), 1, true).unwrap();
        assert_eq!(s.histograms()[0].get(&[4]), 1);
        assert!(aggregate(data.view(), unit_grid(1, 4), 3).is_err());
    }

    #[test]
    fn zero_counts_are_not_stored() {
        let grid = unit_grid(2, 3);
        let h = SparseHistogram::from_counts(grid, [(vec![1, 1], 0), (vec![2, 3], 4)]).unwrap();
        assert_eq!(h.occupied(), 1);
        assert_eq!(h.total(), 4);
        assert!(SparseHistogram::from_counts(unit_grid(2, 3), [(vec![0, 1], 1)]).is_err());
        assert!(SparseHistogram::from_counts(unit_grid(2, 3), [(vec![1, 4], 1)]).is_err());
    }

    #[test]
    fn chunked_binning_matches_direct_count() {
        let n = 3 * CHUNK_ROWS + 17;
        let data = Array2::from_shape_fn((n, 2), |(i, j)| ((i * 31 + j * 17) % 97) as f64 / 97.0 + 1e-3);
        let grid = unit_grid(2, 5);
        let series = aggregate(data.view(), grid.clone(), 1).unwrap();
        let mut direct: BTreeMap<BinIndex, u64> = BTreeMap::new();
        for row in data.rows() {
            let b: BinIndex = (0..2).map(|k| grid.locate(k, row[k]).unwrap()).collect();
            *direct.entry(b).or_insert(0) += 1;
        }
        let got: BTreeMap<BinIndex, u64> = series.histograms()[0].iter().map(|(b, n)| (b.clone(), n)).collect();
        assert_eq!(got, direct);
    }
}
