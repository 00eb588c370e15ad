use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;

use super::{CompositeConfig, LogLikValue};
use crate::error::{Error, Result};
use crate::histogram::{BinGrid, HistogramSeries, MarginalHistogram};
use crate::models::JointCdf;

/// Inclusion–exclusion results in `[-NEG_TOLERANCE, 0)` are rounding noise.
const NEG_TOLERANCE: f64 = 1e-10;
/// Corners evaluated per parallel work item.
const CORNER_CHUNK: usize = 256;

/// Clamps an inclusion–exclusion sum into `[0, 1]`.
fn clamp_probability(p: f64, sites: &[usize], bin: &[u32]) -> Result<f64> {
    if p.is_nan() || p < -NEG_TOLERANCE {
        return Err(Error::NegativeProbability { sites: sites.to_vec(), bin: bin.to_vec(), value: p });
    }
    Ok(p.clamp(0.0, 1.0))
}

#[inline]
fn corner_sign(j: usize, mask: usize) -> f64 {
    if (j - mask.count_ones() as usize) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_bin(grid: &BinGrid, index_set: &[usize], bin: &[u32]) -> Result<()> {
    if index_set.is_empty() || index_set.len() > 3 || bin.len() != index_set.len() {
        return Err(Error::InvalidArgument(format!(
            "bin {bin:?} does not match index set {index_set:?} (1 to 3 margins)"
        )));
    }
    for (&k, &b) in index_set.iter().zip(bin) {
        if k >= grid.dims() {
            return Err(Error::InvalidArgument(format!("margin {k} outside a {}-margin grid", grid.dims())));
        }
        if b < 1 || b as usize > grid.bins(k) {
            return Err(Error::InvalidArgument(format!("bin {b} out of range 1..={} on margin {k}", grid.bins(k))));
        }
    }
    Ok(())
}

/// Model probability of the rectangle `bin` (1-based, half-open on the left)
/// for the margins `index_set`, by inclusion–exclusion over its corners.
pub fn bin_probability<M: JointCdf + ?Sized>(model: &M, grid: &BinGrid, index_set: &[usize], bin: &[u32]) -> Result<f64> {
    check_bin(grid, index_set, bin)?;
    let j = index_set.len();
    let mut y = [0.0; 3];
    let mut p = 0.0;
    for mask in 0..(1usize << j) {
        for i in 0..j {
            let idx = bin[i] as usize - 1 + ((mask >> i) & 1);
            y[i] = grid.breakpoints(index_set[i])[idx];
        }
        p += corner_sign(j, mask) * model.cdf(index_set, &y[..j])?;
    }
    clamp_probability(p, index_set, bin)
}

/// Symbolic log-likelihood kernel of one marginal histogram:
/// `sum_b s_b log max(P_b, floor)` over nonempty bins.
pub fn symbolic_marginal_loglik<M: JointCdf + ?Sized>(
    marg: &MarginalHistogram,
    model: &M,
    grid: &BinGrid,
    floor: f64,
) -> Result<LogLikValue> {
    if marg.total() == 0 {
        return Err(Error::InvalidArgument("marginal histogram is empty".into()));
    }
    let mut out = LogLikValue::default();
    for (bin, n) in marg.nonempty() {
        let p = bin_probability(model, grid, marg.index_set(), &bin)?;
        if p < floor {
            out.floored_bins += 1;
        }
        out.value += n as f64 * p.max(floor).ln();
    }
    Ok(out)
}

/// Log-likelihood split by histogram plus the overall total.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLogLik {
    pub per_block: Vec<f64>,
    pub value: LogLikValue,
}

/// Nonempty marginal bins of one tuple across all histograms, with the
/// distinct rectangle corners they reference.
///
/// Each distinct bin is evaluated once. The total is accumulated from
/// integer counts pooled over histograms in bin order, so it does not depend
/// on how the data were split into histograms.
#[derive(Debug, Clone)]
struct TupleTerms {
    sites: Vec<usize>,
    /// Breakpoint indices (0-based) per distinct corner, `j` per corner.
    corners: Vec<u32>,
    /// Distinct 1-based bins (`j` per bin) in sorted order.
    bins: Vec<u32>,
    /// `2^j` corner ids per distinct bin.
    corner_ids: Vec<u32>,
    /// Count per distinct bin pooled over histograms.
    pooled: Vec<u64>,
    /// Number of histograms in which each distinct bin is nonempty.
    occurrences: Vec<u32>,
    /// Per (histogram, bin) cell, ordered by histogram.
    cell_block: Vec<u32>,
    cell_bin: Vec<u32>,
    cell_count: Vec<u64>,
}

impl TupleTerms {
    fn build(series: &HistogramSeries, sites: &[usize]) -> Result<Self> {
        let j = sites.len();
        let projected = series
            .histograms()
            .iter()
            .map(|h| h.project(sites))
            .collect::<Result<Vec<_>>>()?;
        let mut distinct: BTreeMap<&[u32], (u64, u32)> = BTreeMap::new();
        for p in &projected {
            for (bin, &n) in p {
                let e = distinct.entry(bin.as_slice()).or_insert((0, 0));
                e.0 += n;
                e.1 += 1;
            }
        }
        let mut terms = Self {
            sites: sites.to_vec(),
            corners: Vec::new(),
            bins: Vec::with_capacity(distinct.len() * j),
            corner_ids: Vec::with_capacity(distinct.len() << j),
            pooled: Vec::with_capacity(distinct.len()),
            occurrences: Vec::with_capacity(distinct.len()),
            cell_block: Vec::new(),
            cell_bin: Vec::new(),
            cell_count: Vec::new(),
        };
        let mut corner_lookup: HashMap<[u32; 3], u32> = HashMap::new();
        let mut bin_lookup: HashMap<&[u32], u32> = HashMap::with_capacity(distinct.len());
        for (i, (&bin, &(n, occ))) in distinct.iter().enumerate() {
            bin_lookup.insert(bin, i as u32);
            terms.bins.extend_from_slice(bin);
            terms.pooled.push(n);
            terms.occurrences.push(occ);
            for mask in 0..(1usize << j) {
                let mut key = [0u32; 3];
                for d in 0..j {
                    key[d] = bin[d] - 1 + ((mask >> d) & 1) as u32;
                }
                let next = corner_lookup.len() as u32;
                let id = *corner_lookup.entry(key).or_insert_with(|| {
                    terms.corners.extend_from_slice(&key[..j]);
                    next
                });
                terms.corner_ids.push(id);
            }
        }
        for (t, p) in projected.iter().enumerate() {
            for (bin, &n) in p {
                terms.cell_block.push(t as u32);
                terms.cell_bin.push(bin_lookup[bin.as_slice()]);
                terms.cell_count.push(n);
            }
        }
        Ok(terms)
    }

    fn cells(&self) -> usize {
        self.cell_count.len()
    }

    /// Tuple total, per-histogram partial sums `(block, value)` and the
    /// number of floored cells.
    fn evaluate<M: JointCdf + ?Sized>(
        &self,
        model: &M,
        transformed: &[Vec<f64>],
        floor: f64,
        blocks: usize,
    ) -> Result<(f64, Vec<(u32, f64)>, u64)> {
        let j = self.sites.len();
        let cdf: Vec<f64> = self
            .corners
            .par_chunks(j * CORNER_CHUNK)
            .map(|chunk| {
                let mut u = [0.0; 3];
                chunk
                    .chunks(j)
                    .map(|c| {
                        for i in 0..j {
                            u[i] = transformed[self.sites[i]][c[i] as usize];
                        }
                        model.cdf_transformed(&self.sites, &u[..j])
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<Vec<f64>>>>()?
            .concat();

        let ncorner = 1usize << j;
        let nbins = self.pooled.len();
        let mut log_p = Vec::with_capacity(nbins);
        let mut total = 0.0;
        let mut floored = 0u64;
        for b in 0..nbins {
            let ids = &self.corner_ids[b * ncorner..(b + 1) * ncorner];
            let mut p = 0.0;
            for (mask, &id) in ids.iter().enumerate() {
                p += corner_sign(j, mask) * cdf[id as usize];
            }
            let p = clamp_probability(p, &self.sites, &self.bins[b * j..(b + 1) * j])?;
            if p < floor {
                floored += self.occurrences[b] as u64;
            }
            let lp = p.max(floor).ln();
            total += self.pooled[b] as f64 * lp;
            log_p.push(lp);
        }

        if blocks == 1 {
            return Ok((total, vec![(0, total)], floored));
        }
        let mut partial: Vec<(u32, f64)> = Vec::new();
        for c in 0..self.cells() {
            let term = self.cell_count[c] as f64 * log_p[self.cell_bin[c] as usize];
            let block = self.cell_block[c];
            match partial.last_mut() {
                Some((b, v)) if *b == block => *v += term,
                _ => partial.push((block, term)),
            }
        }
        Ok((total, partial, floored))
    }
}

/// j-wise symbolic composite log-likelihood over a histogram series.
///
/// Marginal histograms do not depend on the parameters, so they are projected
/// once here and reused by every evaluation.
#[derive(Debug, Clone)]
pub struct SymbolicComposite {
    grid: Arc<BinGrid>,
    order: usize,
    blocks: usize,
    floor: f64,
    tuples: Vec<TupleTerms>,
}

impl SymbolicComposite {
    pub fn new(series: &HistogramSeries, config: &CompositeConfig) -> Result<Self> {
        let tuples = config.resolve(series.dims())?;
        let tuples = tuples
            .par_iter()
            .map(|t| TupleTerms::build(series, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: series.grid().clone(),
            order: config.order,
            blocks: series.len(),
            floor: config.probability_floor,
            tuples,
        })
    }

    pub fn grid(&self) -> &Arc<BinGrid> {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of histograms `T`.
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn tuples(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.tuples.iter().map(|t| t.sites.as_slice())
    }

    /// Number of log-likelihood terms (nonempty marginal bins over tuples and histograms).
    pub fn term_count(&self) -> u64 {
        self.tuples.iter().map(|t| t.cells() as u64).sum()
    }

    /// `sum s log(bin volume)` over all terms. Since `P_b ~ f vol_b` for small
    /// bins, the kernel minus this offset approaches the micro-data composite
    /// log-likelihood as the grid is refined.
    pub fn log_volume_offset(&self) -> f64 {
        let mut total = 0.0;
        for t in &self.tuples {
            let j = t.sites.len();
            for (b, &n) in t.pooled.iter().enumerate() {
                let vol: f64 = (0..j)
                    .map(|i| self.grid.bin_width(t.sites[i], t.bins[b * j + i]).ln())
                    .sum();
                total += n as f64 * vol;
            }
        }
        total
    }

    /// Evaluates the composite log-likelihood, keeping per-histogram sums.
    /// The total is bit-identical for any split of the same data into
    /// histograms over a common grid; the per-histogram sums add up to it up
    /// to rounding.
    pub fn evaluate<M: JointCdf + ?Sized>(&self, model: &M) -> Result<BlockLogLik> {
        let transformed: Vec<Vec<f64>> = (0..self.grid.dims())
            .map(|k| self.grid.breakpoints(k).iter().map(|&y| model.transform(k, y)).collect())
            .collect();
        let partials = self
            .tuples
            .par_iter()
            .map(|t| t.evaluate(model, &transformed, self.floor, self.blocks))
            .collect::<Result<Vec<_>>>()?;
        let mut per_block = vec![0.0; self.blocks];
        let mut floored_bins = 0;
        let mut value = 0.0;
        for (total, partial, floored) in partials {
            value += total;
            floored_bins += floored;
            for (b, v) in partial {
                per_block[b as usize] += v;
            }
        }
        Ok(BlockLogLik { per_block, value: LogLikValue { value, floored_bins } })
    }

    pub fn loglik<M: JointCdf + ?Sized>(&self, model: &M) -> Result<LogLikValue> {
        Ok(self.evaluate(model)?.value)
    }
}

/// One-shot evaluation of the symbolic composite log-likelihood.
pub fn symbolic_composite_loglik<M: JointCdf + ?Sized>(
    series: &HistogramSeries,
    model: &M,
    config: &CompositeConfig,
) -> Result<LogLikValue> {
    SymbolicComposite::new(series, config)?.loglik(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::{aggregate, marginalize, SparseHistogram};
    use crate::models::{Dependence, MarginSpec, SiteLayout, SmithJoint, SmithParams};
    use ndarray::Array2;

    /// Independent uniform margins on [0, 1].
    struct Uniform;

    impl JointCdf for Uniform {
        fn transform(&self, _site: usize, y: f64) -> f64 {
            y.clamp(0.0, 1.0)
        }

        fn cdf_transformed(&self, _sites: &[usize], u: &[f64]) -> Result<f64> {
            Ok(u.iter().product())
        }
    }

    fn unit_grid(k: usize, b: usize) -> Arc<BinGrid> {
        Arc::new(BinGrid::new(vec![(0..=b).map(|i| i as f64 / b as f64).collect(); k]).unwrap())
    }

    fn smith_fixture() -> (SiteLayout, SmithParams) {
        let layout = SiteLayout::from_coords(&[(0.0, 0.0), (2.0, 1.0), (0.5, 3.0)]).unwrap();
        let params = SmithParams {
            dependence: Dependence::new(4.0, 1.0, 3.0).unwrap(),
            margins: MarginSpec::Constant { mu: 0.0, sigma: 1.0, xi: 0.1 },
        };
        (layout, params)
    }

    #[test]
    fn uniform_two_by_two() {
        let grid = unit_grid(2, 2);
        let h = SparseHistogram::from_counts(grid.clone(), vec![(vec![1, 1], 3), (vec![1, 2], 1)]).unwrap();
        let m = marginalize(&h, &[0, 1]).unwrap();
        let ll = symbolic_marginal_loglik(&m, &Uniform, &grid, 1e-300).unwrap();
        assert!((ll.value - 4.0 * 0.25f64.ln()).abs() < 1e-14);
        assert_eq!(ll.floored_bins, 0);
    }

    #[test]
    fn whole_support_bin_has_unit_probability() {
        let (layout, params) = smith_fixture();
        let model = SmithJoint::new(&params, &layout).unwrap();
        let grid = BinGrid::new(vec![vec![-1e6, 1e6]; 3]).unwrap();
        let p = bin_probability(&model, &grid, &[0, 2], &[1, 1]).unwrap();
        assert!((p - 1.0).abs() < 1e-6);
        let p = bin_probability(&model, &grid, &[0, 1, 2], &[1, 1, 1]).unwrap();
        assert!((p - 1.0).abs() < 1e-6);
    }

    #[test]
    fn adjacent_bins_add_up() {
        let (layout, params) = smith_fixture();
        let model = SmithJoint::new(&params, &layout).unwrap();
        let fine = BinGrid::new(vec![vec![-1.0, 0.0, 0.7, 2.0]; 3]).unwrap();
        let a = bin_probability(&model, &fine, &[0, 1], &[1, 2]).unwrap();
        let b = bin_probability(&model, &fine, &[0, 1], &[2, 2]).unwrap();
        let joint = BinGrid::new(vec![vec![-1.0, 0.7, 2.0], vec![-1.0, 0.0, 0.7, 2.0], vec![0.0, 1.0]]).unwrap();
        let u = bin_probability(&model, &joint, &[0, 1], &[1, 2]).unwrap();
        assert!((a + b - u).abs() < 1e-14);
    }

    #[test]
    fn bin_probability_rejects_bad_bins() {
        let grid = unit_grid(2, 2);
        assert!(bin_probability(&Uniform, &grid, &[0, 1], &[0, 1]).is_err());
        assert!(bin_probability(&Uniform, &grid, &[0, 1], &[1, 3]).is_err());
        assert!(bin_probability(&Uniform, &grid, &[0, 2], &[1, 1]).is_err());
    }

    fn data(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, 3), |(r, c)| ((r * 7 + c * 13) % 17) as f64 / 17.0 + 0.01)
    }

    #[test]
    fn composite_matches_sum_of_marginals() {
        let grid = unit_grid(3, 4);
        let x = data(40);
        let series = aggregate(x.view(), grid.clone(), 4).unwrap();
        let cfg = CompositeConfig::pairwise();
        let (layout, params) = smith_fixture();
        let model = SmithJoint::new(
            &SmithParams { margins: MarginSpec::Constant { mu: 0.3, sigma: 0.2, xi: 0.0 }, ..params },
            &layout,
        )
        .unwrap();
        let got = symbolic_composite_loglik(&series, &model, &cfg).unwrap();
        let mut expect = 0.0;
        for h in series.histograms() {
            for t in super::super::all_tuples(3, 2) {
                let m = marginalize(h, &t).unwrap();
                if m.total() > 0 {
                    expect += symbolic_marginal_loglik(&m, &model, &grid, 1e-300).unwrap().value;
                }
            }
        }
        assert!((got.value - expect).abs() < 1e-10 * expect.abs());
        let merged = symbolic_composite_loglik(&series.merged(), &model, &cfg).unwrap();
        assert_eq!(got.value, merged.value);
    }

    #[test]
    fn per_block_sums_to_total() {
        let grid = unit_grid(3, 4);
        let series = aggregate(data(30).view(), grid, 3).unwrap();
        let sc = SymbolicComposite::new(&series, &CompositeConfig::triplewise()).unwrap();
        let r = sc.evaluate(&Uniform).unwrap();
        assert_eq!(r.per_block.len(), 3);
        let s: f64 = r.per_block.iter().sum();
        assert!((s - r.value.value).abs() < 1e-10 * s.abs());
        // independent uniforms: every cell has probability 4^-3
        assert!((r.value.value - 30.0 * (1.0f64 / 64.0).ln()).abs() < 1e-10);
    }

    #[test]
    fn floor_is_reported() {
        struct Zero;
        impl JointCdf for Zero {
            fn transform(&self, _s: usize, y: f64) -> f64 {
                y
            }
            fn cdf_transformed(&self, _s: &[usize], _u: &[f64]) -> Result<f64> {
                Ok(0.0)
            }
        }
        let grid = unit_grid(2, 2);
        let series = aggregate(Array2::from_elem((5, 2), 0.3).view(), grid, 1).unwrap();
        let v = symbolic_composite_loglik(&series, &Zero, &CompositeConfig::pairwise()).unwrap();
        assert_eq!(v.floored_bins, 1);
        assert!((v.value - 5.0 * 1e-300f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn negative_probability_is_an_error() {
        struct Decreasing;
        impl JointCdf for Decreasing {
            fn transform(&self, _s: usize, y: f64) -> f64 {
                y
            }
            fn cdf_transformed(&self, _s: &[usize], u: &[f64]) -> Result<f64> {
                Ok(1.0 - u[0] * u[1])
            }
        }
        let grid = unit_grid(2, 2);
        let err = bin_probability(&Decreasing, &grid, &[0, 1], &[2, 1]).unwrap_err();
        assert!(err.is_numerical());
    }
}
