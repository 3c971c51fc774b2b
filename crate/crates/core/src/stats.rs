//! Small statistics helpers shared by the estimators and the harness.

use crate::error::{invalid, Result};

/// Median; the mean of the two central values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mean of a series and its batch-means standard error with `batches`
/// contiguous batches. Trailing samples that do not fill a batch are dropped
/// from the error estimate but kept in the mean.
pub fn batch_means(series: &[f64], batches: usize) -> Result<(f64, f64)> {
    if batches < 2 || series.len() < batches {
        return Err(invalid(format!(
            "{} samples cannot form {batches} batches",
            series.len()
        )));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let size = series.len() / batches;
    let bm: Vec<f64> = (0..batches)
        .map(|b| series[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let bmean = bm.iter().sum::<f64>() / batches as f64;
    let var = bm.iter().map(|x| (x - bmean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok((mean, (var / batches as f64).sqrt()))
}

/// Least-squares slope of `log2(err)` against `log2(dt)`.
pub fn convergence_order(dts: &[f64], errors: &[f64]) -> f64 {
    let x: Vec<f64> = dts.iter().map(|v| v.log2()).collect();
    let y: Vec<f64> = errors.iter().map(|v| v.log2()).collect();
    crate::besov::fit::ls_slope(&x, &y)
}
