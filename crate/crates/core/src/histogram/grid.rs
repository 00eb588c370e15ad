use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-margin breakpoints `y_0 < y_1 < ... < y_B`; bin `b` (1-based) covers
/// the half-open interval `(y_{b-1}, y_b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    breaks: Vec<Vec<f64>>,
}

impl BinGrid {
    pub fn new(breaks: Vec<Vec<f64>>) -> Result<Self> {
        if breaks.is_empty() {
            return Err(Error::InvalidArgument("bin grid needs at least one margin".into()));
        }
        for (k, b) in breaks.iter().enumerate() {
            if b.len() < 2 {
                return Err(Error::InvalidArgument(format!("margin {k} needs at least 2 breakpoints")));
            }
            if b.len() - 1 > u32::MAX as usize {
                return Err(Error::InvalidArgument(format!("margin {k} has too many bins")));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("margin {k} has non-finite breakpoints")));
            }
            if b.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!("margin {k} breakpoints are not strictly increasing")));
            }
        }
        Ok(Self { breaks })
    }

    /// Number of margins K.
    pub fn dims(&self) -> usize {
        self.breaks.len()
    }

    /// Number of bins `B^k` in margin `k`.
    pub fn bins(&self, k: usize) -> usize {
        self.breaks[k].len() - 1
    }

    pub fn breakpoints(&self, k: usize) -> &[f64] {
        &self.breaks[k]
    }

    pub fn all_breakpoints(&self) -> &[Vec<f64>] {
        &self.breaks
    }

    pub fn span(&self, k: usize) -> (f64, f64) {
        let b = &self.breaks[k];
        (b[0], b[b.len() - 1])
    }

    /// 1-based bin containing `value`, or `None` outside `(y_0, y_B]`.
    #[inline]
    pub fn locate(&self, k: usize, value: f64) -> Option<u32> {
        let b = &self.breaks[k];
        let i = b.partition_point(|&y| y < value);
        if i == 0 || i == b.len() {
            None
        } else {
            Some(i as u32)
        }
    }

    /// Like [`locate`](Self::locate) but maps values outside the grid into the edge bins.
    #[inline]
    pub fn locate_clamped(&self, k: usize, value: f64) -> u32 {
        let b = &self.breaks[k];
        let i = b.partition_point(|&y| y < value);
        i.clamp(1, b.len() - 1) as u32
    }

    /// Width of 1-based bin `b` in margin `k`.
    pub fn bin_width(&self, k: usize, b: u32) -> f64 {
        let br = &self.breaks[k];
        br[b as usize] - br[b as usize - 1]
    }

    pub fn bin_midpoint(&self, k: usize, b: u32) -> f64 {
        let br = &self.breaks[k];
        0.5 * (br[b as usize] + br[b as usize - 1])
    }
}

/// Bin counts for [`make_grid`]: one value broadcast to every margin, or one per margin.
#[derive(Debug, Clone, PartialEq)]
pub enum BinsPerMargin {
    Uniform(usize),
    PerMargin(Vec<usize>),
}

impl BinsPerMargin {
    fn get(&self, k: usize) -> usize {
        match self {
            BinsPerMargin::Uniform(b) => *b,
            BinsPerMargin::PerMargin(v) => v[k],
        }
    }
}

impl From<usize> for BinsPerMargin {
    fn from(b: usize) -> Self {
        BinsPerMargin::Uniform(b)
    }
}

/// Builds a grid over the columns of `data`.
///
/// Without explicit breakpoints, margin `k` gets `B^k` equal-width bins over
/// `[min_k - delta_k, max_k]` with `delta_k = 1e-9 (max_k - min_k)` (or `1e-9`
/// for a constant column), so the minimum lands in bin 1.
pub fn make_grid(
    data: ArrayView2<'_, f64>,
    bins: impl Into<BinsPerMargin>,
    explicit_breaks: Option<&[Vec<f64>]>,
) -> Result<BinGrid> {
    let bins = bins.into();
    let (n, k) = data.dim();
    if let Some(br) = explicit_breaks {
        if br.len() != k {
            return Err(Error::InvalidArgument(format!(
                "{} explicit breakpoint lists for {k} margins",
                br.len()
            )));
        }
        return BinGrid::new(br.to_vec());
    }
    if n == 0 {
        return Err(Error::InvalidArgument("cannot build a grid from zero rows".into()));
    }
    if let BinsPerMargin::PerMargin(v) = &bins {
        if v.len() != k {
            return Err(Error::InvalidArgument(format!("{} bin counts for {k} margins", v.len())));
        }
    }
    let mut breaks = Vec::with_capacity(k);
    for (col_idx, col) in data.columns().into_iter().enumerate() {
        let b = bins.get(col_idx);
        if b < 1 {
            return Err(Error::InvalidArgument(format!("margin {col_idx} needs at least one bin")));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (row, &v) in col.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteData { row, column: col_idx, value: v });
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let range = hi - lo;
        let delta = if range > 0.0 { 1e-9 * range } else { 1e-9 };
        let start = lo - delta;
        let width = (hi - start) / b as f64;
        let mut br: Vec<f64> = (0..b).map(|i| start + i as f64 * width).collect();
        br.push(hi);
        breaks.push(br);
    }
    BinGrid::new(breaks)
}
