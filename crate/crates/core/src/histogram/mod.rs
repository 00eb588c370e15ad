//! Bin grids, temporal aggregation of micro-data into sparse K-dimensional
//! histograms, and projection onto marginal index sets.

mod grid;
mod marginal;
mod preprocess;
mod sparse;

pub use grid::{make_grid, BinGrid, BinsPerMargin};
pub use marginal::{marginalize, MarginalHistogram};
pub use preprocess::{block_maxima, detrend, detrend_columns};
pub use sparse::{aggregate, aggregate_with, merge, BinIndex, HistogramSeries, SparseHistogram};

/// Checks that `index_set` is nonempty, strictly increasing and below `k`.
pub(crate) fn validate_index_set(index_set: &[usize], k: usize) -> crate::Result<()> {
    if index_set.is_empty() {
        return Err(crate::Error::InvalidArgument("empty index set".into()));
    }
    if index_set.windows(2).any(|w| w[0] >= w[1]) {
        return Err(crate::Error::InvalidArgument(format!(
            "index set {index_set:?} is not strictly increasing"
        )));
    }
    if let Some(&last) = index_set.last() {
        if last >= k {
            return Err(crate::Error::InvalidArgument(format!(
                "index set {index_set:?} out of range for {k} margins"
            )));
        }
    }
    Ok(())
}
