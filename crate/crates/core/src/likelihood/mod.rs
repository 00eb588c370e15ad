//! Bin probabilities, symbolic (histogram) composite log-likelihoods and the
//! classic micro-data composite log-likelihood used as an oracle.

mod classic;
mod symbolic;
mod terms;

pub use classic::{classic_composite_loglik, fd_density, ClassicComposite};
pub use symbolic::{
    bin_probability, symbolic_composite_loglik, symbolic_marginal_loglik, BlockLogLik, SymbolicComposite,
};
pub use terms::{count_terms, TermCounts};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lower bound applied to bin probabilities before taking logs.
pub const DEFAULT_PROBABILITY_FLOOR: f64 = 1e-300;

/// Which j-tuples of sites enter the composite likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TupleSet {
    /// Every strictly increasing j-subset of the K sites.
    All,
    /// An explicit list of 0-based site tuples.
    Explicit(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeConfig {
    /// Tuple size j (2 or 3).
    pub order: usize,
    pub tuples: TupleSet,
    pub probability_floor: f64,
}

impl CompositeConfig {
    pub fn new(order: usize) -> Self {
        Self { order, tuples: TupleSet::All, probability_floor: DEFAULT_PROBABILITY_FLOOR }
    }

    pub fn pairwise() -> Self {
        Self::new(2)
    }

    pub fn triplewise() -> Self {
        Self::new(3)
    }

    pub fn with_tuples(mut self, tuples: Vec<Vec<usize>>) -> Self {
        self.tuples = TupleSet::Explicit(tuples);
        self
    }

    /// The concrete tuple list for `k` sites, validated and in lexicographic
    /// order. The composite is a sum over a set of tuples, so the order of an
    /// explicit list does not affect any result, down to rounding.
    pub fn resolve(&self, k: usize) -> Result<Vec<Vec<usize>>> {
        if !(2..=3).contains(&self.order) {
            return Err(Error::InvalidArgument(format!("composite order must be 2 or 3, got {}", self.order)));
        }
        if !(self.probability_floor > 0.0) {
            return Err(Error::InvalidArgument("probability floor must be positive".into()));
        }
        match &self.tuples {
            TupleSet::All => {
                if k < self.order {
                    return Err(Error::InvalidArgument(format!(
                        "order {} needs at least {} sites, got {k}",
                        self.order, self.order
                    )));
                }
                Ok(all_tuples(k, self.order))
            }
            TupleSet::Explicit(list) => {
                if list.is_empty() {
                    return Err(Error::InvalidArgument("explicit tuple set is empty".into()));
                }
                for t in list {
                    if t.len() != self.order {
                        return Err(Error::InvalidArgument(format!(
                            "tuple {t:?} does not have length {}",
                            self.order
                        )));
                    }
                    crate::histogram::validate_index_set(t, k)?;
                }
                let mut sorted = list.clone();
                sorted.sort();
                if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                    return Err(Error::InvalidArgument(format!("tuple {:?} is listed twice", w[0])));
                }
                Ok(sorted)
            }
        }
    }
}

/// All strictly increasing `j`-subsets of `0..k` in lexicographic order.
pub fn all_tuples(k: usize, j: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(j);
    fn rec(start: usize, k: usize, j: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == j {
            out.push(cur.clone());
            return;
        }
        for i in start..k {
            cur.push(i);
            rec(i + 1, k, j, cur, out);
            cur.pop();
        }
    }
    rec(0, k, j, &mut cur, &mut out);
    out
}

/// Log-likelihood kernel (multinomial coefficients dropped) plus the number of
/// bins where the probability floor was applied.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LogLikValue {
    pub value: f64,
    pub floored_bins: u64,
}
