use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Column-wise maxima over consecutive blocks of `block_len` rows; a trailing
/// partial block is dropped.
pub fn block_maxima(data: ArrayView2<'_, f64>, block_len: usize) -> Result<Array2<f64>> {
    if block_len < 1 {
        return Err(Error::InvalidArgument("block length must be at least 1".into()));
    }
    let (m, k) = data.dim();
    if m < block_len {
        return Err(Error::InvalidArgument(format!("{m} rows cannot fill a block of {block_len}")));
    }
    let blocks = m / block_len;
    let mut out = Array2::from_elem((blocks, k), f64::NEG_INFINITY);
    for (r, chunk) in data.axis_chunks_iter(Axis(0), block_len).take(blocks).enumerate() {
        for row in chunk.rows() {
            for (o, &v) in out.row_mut(r).iter_mut().zip(row) {
                *o = o.max(v);
            }
        }
    }
    Ok(out)
}

/// Residuals of the least-squares line fitted against the row index.
pub fn detrend(column: &[f64]) -> Result<Vec<f64>> {
    let m = column.len();
    if m < 2 {
        return Err(Error::InvalidArgument("detrending needs at least 2 values".into()));
    }
    let n = m as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = column.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, &y) in column.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    Ok(column
        .iter()
        .enumerate()
        .map(|(i, &y)| y - y_mean - slope * (i as f64 - x_mean))
        .collect())
}

/// [`detrend`] applied to every column.
pub fn detrend_columns(data: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let mut out = data.to_owned();
    for mut col in out.columns_mut() {
        let d = detrend(&col.to_vec())?;
        col.iter_mut().zip(d).for_each(|(c, v)| *c = v);
    }
    Ok(out)
}
