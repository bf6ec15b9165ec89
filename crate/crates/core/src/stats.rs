//! Median and median absolute deviation.

use crate::error::{Error, Result};

/// Consistency constant making the MAD an estimator of the Gaussian standard deviation.
pub const GAUSSIAN_MAD_SCALE: f64 = 1.4826;

/// Sample median; the midpoint of the two central order statistics for even lengths.
pub fn median(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// `scale_c * median(|x_i - median(xs)|)`.
pub fn mad(xs: &[f64], scale_c: f64) -> Result<f64> {
    let m = median(xs)?;
    let dev: Vec<f64> = xs.iter().map(|x| (x - m).abs()).collect();
    Ok(scale_c * median(&dev)?)
}
