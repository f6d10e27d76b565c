use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SiteSet;
use crate::{Error, Result};

/// First nugget tried on the diagonal before factorization.
pub const BASE_NUGGET: f64 = 1e-10;
/// Largest nugget tried before the site set is declared degenerate.
pub const MAX_NUGGET: f64 = 1e-6;

/// Powered-exponential dependence model, `ρ(h) = exp(-(h/σ)^δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationModel {
    pub scale: f64,
    pub smoothness: f64,
}

impl CorrelationModel {
    pub fn new(scale: f64, smoothness: f64) -> Result<Self> {
        let model = Self { scale, smoothness };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidModel(format!("scale must be > 0, got {}", self.scale)));
        }
        if !(self.smoothness > 0.0 && self.smoothness <= 2.0) {
            return Err(Error::InvalidModel(format!(
                "smoothness must lie in (0, 2], got {}",
                self.smoothness
            )));
        }
        Ok(())
    }

    /// Semivariogram `γ(h) = (h/σ)^δ`.
    #[inline]
    pub fn semivariogram(&self, h: f64) -> f64 {
        (h / self.scale).powf(self.smoothness)
    }

    #[inline]
    pub fn correlation(&self, h: f64) -> f64 {
        (-self.semivariogram(h)).exp()
    }
}

/// Correlation matrix `M[i][j] = ρ(‖s_i − s_j‖)`, without nugget.
pub fn build_covariance(sites: &SiteSet, model: &CorrelationModel) -> Result<Array2<f64>> {
    model.validate()?;
    let d = sites.len();
    Ok(Array2::from_shape_fn((d, d), |(i, j)| {
        if i == j {
            1.0
        } else {
            model.correlation(sites.distance(i, j))
        }
    }))
}

/// Lower Cholesky factor together with the nugget that made it succeed.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    pub lower: Array2<f64>,
    pub nugget: f64,
}

fn cholesky_in_place(a: &mut Array2<f64>) -> bool {
    let n = a.nrows();
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= a[[j, k]] * a[[j, k]];
        }
        if diag.is_nan() || diag <= 0.0 || !diag.is_finite() {
            return false;
        }
        let diag = diag.sqrt();
        a[[j, j]] = diag;
        for i in (j + 1)..n {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = v / diag;
        }
        for k in (j + 1)..n {
            a[[j, k]] = 0.0;
        }
    }
    true
}

/// Factorizes `m + nugget·I`, escalating the nugget tenfold from
/// [`BASE_NUGGET`] up to [`MAX_NUGGET`]. The nugget is relative to the
/// largest diagonal entry when that exceeds one.
pub fn cholesky_with_nugget(m: &Array2<f64>) -> Result<CholeskyFactor> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Shape(format!("covariance is {}x{}", n, m.ncols())));
    }
    let scale = m.diag().iter().fold(1.0_f64, |acc, v| acc.max(*v));
    let mut nugget = BASE_NUGGET;
    loop {
        let mut a = m.clone();
        for i in 0..n {
            a[[i, i]] += nugget * scale;
        }
        if cholesky_in_place(&mut a) {
            return Ok(CholeskyFactor {
                lower: a,
                nugget: nugget * scale,
            });
        }
        if nugget >= MAX_NUGGET {
            return Err(Error::DegenerateSites { nugget });
        }
        nugget *= 10.0;
    }
}

/// Zero-mean Gaussian vector sampler `L·z` over a fixed covariance.
#[derive(Debug, Clone)]
pub struct GaussianField {
    // Packed lower triangle, row-major.
    packed: Vec<f64>,
    dim: usize,
}

impl GaussianField {
    pub fn from_covariance(m: &Array2<f64>) -> Result<Self> {
        let factor = cholesky_with_nugget(m)?;
        Ok(Self::from_factor(&factor.lower))
    }

    pub fn from_factor(lower: &Array2<f64>) -> Self {
        let dim = lower.nrows();
        let mut packed = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in 0..=i {
                packed.push(lower[[i, j]]);
            }
        }
        Self { packed, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes one draw into `out`; `z` is scratch of the same length.
    #[inline]
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mut offset = 0;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.packed[offset..offset + i + 1];
            *o = row.iter().zip(&z[..=i]).map(|(l, z)| l * z).sum();
            offset += i + 1;
        }
    }
}
