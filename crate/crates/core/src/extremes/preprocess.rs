use ndarray::{Array2, ArrayView1, Axis};

use crate::{Error, Result};

/// Default centred moving-average window (odd, about ten days of daily data).
pub const DEFAULT_MA_WINDOW: usize = 11;

/// `x − μ̂`, where `μ̂` is the centred moving average of each column.
///
/// Near the ends the window is clipped to the available observations. Missing
/// values (NaN) are skipped in the mean and stay missing in the residuals.
pub fn moving_average_residuals(x: &Array2<f64>, window: usize) -> Result<Array2<f64>> {
    let n = x.nrows();
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Config(format!("moving-average window must be odd and positive, got {window}")));
    }
    if window > n {
        return Err(Error::Config(format!("moving-average window {window} exceeds series length {n}")));
    }
    let half = window / 2;
    let mut out = Array2::from_elem(x.dim(), f64::NAN);
    for (col_in, mut col_out) in x.axis_iter(Axis(1)).zip(out.axis_iter_mut(Axis(1))) {
        for k in 0..n {
            let v = col_in[k];
            if v.is_nan() {
                continue;
            }
            let (lo, hi) = (k.saturating_sub(half), (k + half).min(n - 1));
            let (sum, count) = (lo..=hi)
                .map(|j| col_in[j])
                .filter(|v| !v.is_nan())
                .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            col_out[k] = v - sum / count as f64;
        }
    }
    Ok(out)
}

/// Columnwise maxima over consecutive non-overlapping blocks of `m` rows.
///
/// The trailing partial block is dropped. A block whose entries are all
/// missing yields NaN.
pub fn block_maxima(x: &Array2<f64>, m: usize) -> Result<Array2<f64>> {
    let n = x.nrows();
    if m == 0 || m > n {
        return Err(Error::Config(format!("block length must lie in [1, {n}], got {m}")));
    }
    let blocks = n / m;
    let mut out = Array2::from_elem((blocks, x.ncols()), f64::NAN);
    for b in 0..blocks {
        let chunk = x.slice(ndarray::s![b * m..(b + 1) * m, ..]);
        for (j, col) in chunk.axis_iter(Axis(1)).enumerate() {
            let best = col.iter().copied().filter(|v| !v.is_nan()).fold(f64::NAN, f64::max);
            out[[b, j]] = best;
        }
    }
    Ok(out)
}

/// Ordinal ranks (1-based) of the present entries of a column; missing entries get 0.
///
/// Ties are broken by first occurrence.
pub fn ordinal_ranks(col: ArrayView1<'_, f64>) -> (Vec<usize>, usize) {
    let mut order: Vec<usize> = (0..col.len()).filter(|&i| !col[i].is_nan()).collect();
    order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
    let mut ranks = vec![0; col.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    (ranks, order.len())
}

/// Empirical transform to unit Fréchet: rank `r` of `N` present values maps to
/// `−1 / log(r / (N + 1))`; missing entries (rank zero) map to 0.
pub fn rank_transform_frechet(y: &Array2<f64>) -> Result<Array2<f64>> {
    if y.nrows() < 2 {
        return Err(Error::Shape(format!("rank transform needs at least 2 rows, got {}", y.nrows())));
    }
    let mut out = Array2::zeros(y.dim());
    for (col_in, mut col_out) in y.axis_iter(Axis(1)).zip(out.axis_iter_mut(Axis(1))) {
        let (ranks, present) = ordinal_ranks(col_in);
        let denom = (present + 1) as f64;
        for (o, r) in col_out.iter_mut().zip(ranks) {
            *o = if r > 0 { -1.0 / (r as f64 / denom).ln() } else { 0.0 };
        }
    }
    Ok(out)
}
