use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use super::{BlockLogLik, CompositeConfig, LogLikValue};
use crate::error::{Error, Result};
use crate::models::JointCdf;

/// Rows per parallel work item.
const ROW_CHUNK: usize = 512;

/// Relative finite-difference step for an order-`j` density. Three-fold
/// differencing loses more digits to cancellation, so it uses a wider step.
pub(crate) fn fd_step(j: usize) -> f64 {
    if j >= 3 {
        1e-3
    } else {
        1e-4
    }
}

/// Density of `sites` at `x` by central differencing of the joint CDF over
/// the `2^j` corners `x ± h`, `h = step (1 + |x|)`, normalized by `prod(2h)`.
pub fn fd_density<M: JointCdf + ?Sized>(model: &M, sites: &[usize], x: &[f64], step: f64) -> Result<f64> {
    let j = sites.len();
    if j == 0 || j > 3 || x.len() != j {
        return Err(Error::InvalidArgument("finite-difference density needs 1 to 3 coordinates".into()));
    }
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    let mut vol = 1.0;
    for i in 0..j {
        let h = step * (1.0 + x[i].abs());
        lo[i] = model.transform(sites[i], x[i] - h);
        hi[i] = model.transform(sites[i], x[i] + h);
        vol *= 2.0 * h;
    }
    Ok(corner_difference(model, sites, &lo[..j], &hi[..j])? / vol)
}

fn corner_difference<M: JointCdf + ?Sized>(model: &M, sites: &[usize], lo: &[f64], hi: &[f64]) -> Result<f64> {
    let j = sites.len();
    let mut u = [0.0; 3];
    let mut acc = 0.0;
    for mask in 0..(1usize << j) {
        let mut ones = 0;
        for i in 0..j {
            if (mask >> i) & 1 == 1 {
                u[i] = hi[i];
                ones += 1;
            } else {
                u[i] = lo[i];
            }
        }
        let f = model.cdf_transformed(sites, &u[..j])?;
        acc += if (j - ones) % 2 == 0 { f } else { -f };
    }
    Ok(acc)
}

/// Classic j-wise composite log-likelihood of micro-data, with densities
/// from finite differences of the joint CDF.
#[derive(Debug, Clone)]
pub struct ClassicComposite {
    data: Array2<f64>,
    order: usize,
    tuples: Vec<Vec<usize>>,
    step: f64,
}

impl ClassicComposite {
    pub fn new(data: ArrayView2<'_, f64>, config: &CompositeConfig) -> Result<Self> {
        let tuples = config.resolve(data.ncols())?;
        if data.nrows() == 0 {
            return Err(Error::InvalidArgument("micro-data has no rows".into()));
        }
        for ((row, column), &value) in data.indexed_iter() {
            if !value.is_finite() {
                return Err(Error::NonFiniteData { row, column, value });
            }
        }
        Ok(Self { data: data.to_owned(), order: config.order, tuples, step: fd_step(config.order) })
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }

    fn row_value<M: JointCdf + ?Sized>(&self, model: &M, row: usize, lo: &mut [f64], hi: &mut [f64], vol: &mut [f64]) -> Result<f64> {
        let x = self.data.row(row);
        for (k, &v) in x.iter().enumerate() {
            let h = self.step * (1.0 + v.abs());
            lo[k] = model.transform(k, v - h);
            hi[k] = model.transform(k, v + h);
            vol[k] = 2.0 * h;
        }
        let mut total = 0.0;
        let (mut tl, mut th) = ([0.0; 3], [0.0; 3]);
        for t in &self.tuples {
            let mut v = 1.0;
            for (i, &k) in t.iter().enumerate() {
                tl[i] = lo[k];
                th[i] = hi[k];
                v *= vol[k];
            }
            let j = t.len();
            let g = corner_difference(model, t, &tl[..j], &th[..j])? / v;
            if !(g > 0.0) {
                return Err(Error::NonPositiveDensity { row, sites: t.clone(), value: g });
            }
            total += g.ln();
        }
        Ok(total)
    }

    /// Per-observation composite log-likelihood (summed over tuples) and total.
    pub fn evaluate<M: JointCdf + ?Sized>(&self, model: &M) -> Result<BlockLogLik> {
        let n = self.data.nrows();
        let k = self.data.ncols();
        let chunks: Vec<usize> = (0..n).step_by(ROW_CHUNK).collect();
        let per_row = chunks
            .par_iter()
            .map(|&start| {
                let (mut lo, mut hi, mut vol) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
                (start..(start + ROW_CHUNK).min(n))
                    .map(|r| self.row_value(model, r, &mut lo, &mut hi, &mut vol))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?
            .concat();
        let value = per_row.iter().sum();
        Ok(BlockLogLik { per_block: per_row, value: LogLikValue { value, floored_bins: 0 } })
    }

    pub fn loglik<M: JointCdf + ?Sized>(&self, model: &M) -> Result<LogLikValue> {
        Ok(self.evaluate(model)?.value)
    }
}

pub fn classic_composite_loglik<M: JointCdf + ?Sized>(
    data: ArrayView2<'_, f64>,
    model: &M,
    config: &CompositeConfig,
) -> Result<LogLikValue> {
    ClassicComposite::new(data, config)?.loglik(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Dependence, GevParams, MarginSpec, SiteLayout, SmithJoint, SmithParams};
    use ndarray::array;

    #[test]
    fn independence_limit_factorizes() {
        // Sites far apart relative to Sigma: the pairwise density is the product of margins.
        let layout = SiteLayout::from_coords(&[(0.0, 0.0), (1e3, 0.0), (0.0, 1e3)]).unwrap();
        let margins = MarginSpec::Constant { mu: 1.0, sigma: 2.0, xi: 0.1 };
        let params = SmithParams { dependence: Dependence::new(1.0, 0.0, 1.0).unwrap(), margins };
        let model = SmithJoint::new(&params, &layout).unwrap();
        let x = array![[0.5, 1.5, 3.0], [2.0, -0.5, 1.0], [4.0, 2.5, 0.8]];
        let got = classic_composite_loglik(x.view(), &model, &CompositeConfig::pairwise()).unwrap();
        let g = GevParams::new(1.0, 2.0, 0.1).unwrap();
        let expect: f64 = 2.0 * x.iter().map(|&v| g.log_pdf(v)).sum::<f64>();
        assert!((got.value - expect).abs() < 1e-6, "{} vs {}", got.value, expect);
    }

    #[test]
    fn triple_density_factorizes_too() {
        let layout = SiteLayout::from_coords(&[(0.0, 0.0), (1e3, 0.0), (0.0, 1e3)]).unwrap();
        let params = SmithParams {
            dependence: Dependence::new(1.0, 0.0, 1.0).unwrap(),
            margins: MarginSpec::Constant { mu: 0.0, sigma: 1.0, xi: 0.0 },
        };
        let model = SmithJoint::new(&params, &layout).unwrap();
        let g = GevParams::gumbel();
        let x = [0.3, -0.4, 1.2];
        let d = fd_density(&model, &[0, 1, 2], &x, fd_step(3)).unwrap();
        let expect: f64 = x.iter().map(|&v| g.log_pdf(v)).sum();
        assert!((d.ln() - expect).abs() < 1e-5);
    }

    #[test]
    fn outside_support_reports_location() {
        let layout = SiteLayout::from_coords(&[(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let params = SmithParams {
            dependence: Dependence::new(1.0, 0.0, 1.0).unwrap(),
            margins: MarginSpec::Constant { mu: 0.0, sigma: 1.0, xi: 0.5 },
        };
        let model = SmithJoint::new(&params, &layout).unwrap();
        let x = array![[0.5, 0.5], [-5.0, 0.1]];
        match classic_composite_loglik(x.view(), &model, &CompositeConfig::pairwise()) {
            Err(Error::NonPositiveDensity { row, .. }) => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite_data() {
        let x = array![[0.5, f64::NAN]];
        assert!(ClassicComposite::new(x.view(), &CompositeConfig::pairwise()).is_err());
    }
}
