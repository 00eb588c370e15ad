use serde::Serialize;

use super::all_tuples;
use crate::error::{Error, Result};
use crate::histogram::HistogramSeries;

/// Number of log-likelihood terms under the classic and symbolic constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TermCounts {
    /// `N * C(K, j)`.
    pub classic: u64,
    /// `B^j * C(K, j)` when `B` is given.
    pub symbolic_max: Option<u64>,
    /// Nonempty marginal bins summed over tuples and histograms.
    pub symbolic_actual: Option<u64>,
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

pub fn count_terms(n: u64, k: u64, j: u32, bins: Option<u64>, actual: Option<&HistogramSeries>) -> Result<TermCounts> {
    if !(2..=3).contains(&j) {
        return Err(Error::InvalidArgument(format!("term counts are defined for j = 2 or 3, got {j}")));
    }
    let tuples = binomial(k, j as u64);
    let symbolic_actual = match actual {
        Some(series) => {
            let mut total = 0u64;
            for tuple in all_tuples(series.dims(), j as usize) {
                for h in series.histograms() {
                    total += h.project(&tuple)?.len() as u64;
                }
            }
            Some(total)
        }
        None => None,
    };
    Ok(TermCounts {
        classic: n * tuples,
        symbolic_max: bins.map(|b| b.pow(j) * tuples),
        symbolic_actual,
    })
}
