use super::sparse::{BinIndex, SparseHistogram};
use super::validate_index_set;
use crate::error::{Error, Result};

/// Dense cells above which a marginal is refused (guards against B^j blowups).
const MAX_DENSE_CELLS: usize = 1 << 28;

/// Dense j-dimensional projection of a histogram onto the margins `index_set`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalHistogram {
    index_set: Vec<usize>,
    shape: Vec<usize>,
    counts: Vec<u64>,
    total: u64,
}

impl MarginalHistogram {
    /// Dense marginal from sparse `(bin, count)` entries; bins are 1-based.
    pub fn from_sparse<'a>(
        index_set: Vec<usize>,
        shape: Vec<usize>,
        entries: impl IntoIterator<Item = (&'a BinIndex, u64)>,
    ) -> Result<Self> {
        let cells = shape.iter().try_fold(1usize, |acc, &b| acc.checked_mul(b));
        let cells = match cells {
            Some(c) if c <= MAX_DENSE_CELLS => c,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "dense marginal of shape {shape:?} is too large"
                )))
            }
        };
        let mut m = Self { index_set, shape, counts: vec![0; cells], total: 0 };
        for (bin, n) in entries {
            let off = m.offset(bin).ok_or_else(|| {
                Error::InvalidArgument(format!("bin {bin:?} outside marginal shape {:?}", m.shape))
            })?;
            m.counts[off] += n;
            m.total += n;
        }
        Ok(m)
    }

    pub fn index_set(&self) -> &[usize] {
        &self.index_set
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn offset(&self, bin: &[u32]) -> Option<usize> {
        if bin.len() != self.shape.len() {
            return None;
        }
        let mut off = 0usize;
        for (&b, &n) in bin.iter().zip(&self.shape) {
            if b < 1 || b as usize > n {
                return None;
            }
            off = off * n + (b as usize - 1);
        }
        Some(off)
    }

    fn bin_at(&self, mut off: usize) -> BinIndex {
        let mut bin = vec![0u32; self.shape.len()];
        for (slot, &n) in bin.iter_mut().zip(&self.shape).rev() {
            *slot = (off % n) as u32 + 1;
            off /= n;
        }
        bin
    }

    /// Count in 1-based bin `bin`; 0 outside the shape.
    pub fn get(&self, bin: &[u32]) -> u64 {
        self.offset(bin).map_or(0, |o| self.counts[o])
    }

    /// Nonempty bins in row-major order.
    pub fn nonempty(&self) -> impl Iterator<Item = (BinIndex, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(o, &n)| (self.bin_at(o), n))
    }

    /// Further projection onto `positions` within this marginal's index set.
    pub fn marginalize(&self, positions: &[usize]) -> Result<MarginalHistogram> {
        validate_index_set(positions, self.index_set.len())?;
        let index_set = positions.iter().map(|&p| self.index_set[p]).collect();
        let shape = positions.iter().map(|&p| self.shape[p]).collect();
        let projected: Vec<(BinIndex, u64)> = self
            .nonempty()
            .map(|(bin, n)| (positions.iter().map(|&p| bin[p]).collect(), n))
            .collect();
        MarginalHistogram::from_sparse(index_set, shape, projected.iter().map(|(b, n)| (b, *n)))
    }
}

/// Projects `hist` onto the 0-based margins `index_set` by summing out the rest.
pub fn marginalize(hist: &SparseHistogram, index_set: &[usize]) -> Result<MarginalHistogram> {
    let projected = hist.project(index_set)?;
    let shape = index_set.iter().map(|&i| hist.grid().bins(i)).collect();
    MarginalHistogram::from_sparse(index_set.to_vec(), shape, projected.iter().map(|(b, &n)| (b, n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::BinGrid;
    use std::sync::Arc;

    fn grid(k: usize, b: usize) -> Arc<BinGrid> {
        Arc::new(BinGrid::new(vec![(0..=b).map(|i| i as f64).collect(); k]).unwrap())
    }

    #[test]
    fn row_sum_projection() {
        let h = SparseHistogram::from_counts(grid(2, 2), [(vec![1, 1], 2), (vec![1, 2], 3)]).unwrap();
        let m = marginalize(&h, &[0]).unwrap();
        assert_eq!(m.get(&[1]), 5);
        assert_eq!(m.get(&[2]), 0);
        assert_eq!(m.total(), 5);
    }

    #[test]
    fn identity_projection_is_dense_form() {
        let h = SparseHistogram::from_counts(grid(3, 2), [(vec![1, 2, 1], 2), (vec![2, 2, 2], 1)]).unwrap();
        let m = marginalize(&h, &[0, 1, 2]).unwrap();
        assert_eq!(m.shape(), &[2, 2, 2]);
        let back: Vec<(BinIndex, u64)> = m.nonempty().collect();
        assert_eq!(back, vec![(vec![1, 2, 1], 2), (vec![2, 2, 2], 1)]);
    }

    #[test]
    fn rejects_bad_index_sets() {
        let h = SparseHistogram::from_counts(grid(3, 2), [(vec![1, 2, 1], 2)]).unwrap();
        assert!(marginalize(&h, &[]).is_err());
        assert!(marginalize(&h, &[1, 0]).is_err());
        assert!(marginalize(&h, &[0, 3]).is_err());
        assert!(marginalize(&h, &[1, 1]).is_err());
    }

    #[test]
    fn nested_projection() {
        let h = SparseHistogram::from_counts(
            grid(3, 3),
            [(vec![1, 2, 3], 2), (vec![3, 2, 1], 1), (vec![1, 1, 3], 4)],
        )
        .unwrap();
        let direct = marginalize(&h, &[0, 2]).unwrap();
        let via = marginalize(&h, &[0, 1, 2]).unwrap().marginalize(&[0, 2]).unwrap();
        assert_eq!(direct, via);
        assert_eq!(direct.get(&[1, 3]), 6);
    }
}
