use ndarray::Array2;

use super::{build_covariance, covariance::GaussianField, CorrelationModel, FieldSample, SiteSet};
use crate::rng::StreamKey;
use crate::Result;

/// `n` i.i.d. draws of `N(0, M)` on `sites`; row `r` comes from `key.stream(r)`.
pub fn sample_gaussian_field(sites: &SiteSet, model: &CorrelationModel, n: usize, key: StreamKey) -> Result<Array2<f64>> {
    let field = GaussianField::from_covariance(&build_covariance(sites, model)?)?;
    let d = sites.len();
    let mut out = Array2::zeros((n, d));
    let mut z = vec![0.0; d];
    for (r, mut row) in out.rows_mut().into_iter().enumerate() {
        let mut rng = key.stream(r as u64);
        field.sample_into(&mut rng, &mut z, row.as_slice_mut().expect("contiguous row"));
    }
    Ok(out)
}

/// `log Φ(z)` for the standard normal CDF, accurate in both tails.
pub fn log_normal_cdf(z: f64) -> f64 {
    let half_erfc = |t: f64| 0.5 * libm::erfc(t / std::f64::consts::SQRT_2);
    if z < 0.0 {
        half_erfc(-z).ln()
    } else {
        (-half_erfc(z)).ln_1p()
    }
}

/// Maps a standard normal value to unit Fréchet, `−1 / log Φ(z)`.
#[inline]
pub fn gaussian_to_frechet(z: f64) -> f64 {
    -1.0 / log_normal_cdf(z)
}

/// Gaussian field with margins turned to unit Fréchet.
pub fn simulate_extreme_gaussian(sites: &SiteSet, model: &CorrelationModel, n: usize, key: StreamKey) -> Result<FieldSample> {
    let z = sample_gaussian_field(sites, model, n, key)?;
    Ok(FieldSample {
        values: z.mapv(gaussian_to_frechet),
        site_hash: sites.fingerprint(),
        approximate_reps: 0,
    })
}
