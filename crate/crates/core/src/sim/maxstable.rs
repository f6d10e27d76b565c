//! Exact simulation of simple max-stable processes and their inversion.
//!
//! Smith and Schlather use the spectral representation `max_i ξ_i W_i(s)`
//! with `ξ_i = 1/Γ_i`, `Γ_i` the partial sums of unit exponentials. Storms
//! are spawned while `ξ_i · B_W` exceeds the current minimum over sites, where
//! `B_W` bounds `sup_s W(s)`; once that fails no later storm can raise any site.
//!
//! Brown-Resnick and extremal-t spectral functions have no usable bound, so
//! they are simulated through extremal functions (Dombry, Engelke and Oesting,
//! 2016): for each site `j` in turn, Poisson points are drawn from the spectral
//! law normalised at `s_j` until they can no longer exceed `Z(s_j)`, and a
//! point is kept only if it stays below `Z` at every earlier site. This is
//! exact and costs about `d` spectral draws per replication.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Exp1};

use super::{covariance::GaussianField, CorrelationModel, FieldSample, MaxStableKind, SiteSet};
use crate::rng::StreamKey;
use crate::{Error, Result};

/// Safety budget of Poisson points per replication (or per anchor site).
pub const STORM_CAP: usize = 1_000_000;
/// Degrees of freedom of the extremal-t spectral function.
pub const EXTREMAL_T_DOF: f64 = 3.0;
/// Gaussian quantile bounding `sup max(0, ε)` for Schlather storms.
const GAUSSIAN_BOUND_Z: f64 = 4.5;
/// Margin (in units of σ) added around the site bounding box for Smith storm centres.
pub const SMITH_MARGIN: f64 = 4.0;

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// `1 / E[max(0, Z)^ν]` for standard normal `Z`.
pub fn extremal_t_constant(nu: f64) -> f64 {
    std::f64::consts::PI.sqrt() * 2f64.powf(1.0 - nu / 2.0) / libm::tgamma((nu + 1.0) / 2.0)
}

enum Spectral {
    Smith {
        coords: Vec<[f64; 2]>,
        lo: [f64; 2],
        width: [f64; 2],
        // area / (2πσ²): peak height of a storm profile
        peak: f64,
        inv_two_var: f64,
    },
    Schlather {
        field: GaussianField,
    },
}

/// Spectral law normalised at one anchor site, over the remaining sites.
struct Anchored {
    field: Option<GaussianField>,
    // Brown-Resnick: γ(s_k − s_j); extremal-t: ρ(s_k − s_j)
    shift: Vec<f64>,
}

enum Extremal {
    BrownResnick(Vec<Anchored>),
    ExtremalT { anchors: Vec<Anchored>, chi2: ChiSquared<f64> },
}

struct Scratch {
    z: Vec<f64>,
    eps: Vec<f64>,
}

impl Spectral {
    fn new(kind: MaxStableKind, model: &CorrelationModel, sites: &SiteSet) -> Result<Self> {
        Ok(match kind {
            MaxStableKind::Smith => {
                let (lo, hi) = sites.bounding_box();
                let margin = SMITH_MARGIN * model.scale;
                let lo = [lo[0] - margin, lo[1] - margin];
                let width = [hi[0] - lo[0] + margin, hi[1] - lo[1] + margin];
                let var = model.scale * model.scale;
                Spectral::Smith {
                    coords: sites.coords().to_vec(),
                    lo,
                    width,
                    peak: width[0] * width[1] / (2.0 * std::f64::consts::PI * var),
                    inv_two_var: 0.5 / var,
                }
            }
            _ => Spectral::Schlather {
                field: GaussianField::from_covariance(&super::build_covariance(sites, model)?)?,
            },
        })
    }

    fn bound(&self) -> f64 {
        match self {
            Spectral::Smith { peak, .. } => *peak,
            Spectral::Schlather { .. } => SQRT_2PI * GAUSSIAN_BOUND_Z,
        }
    }

    #[inline]
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut Scratch, w: &mut [f64]) {
        match self {
            Spectral::Smith {
                coords,
                lo,
                width,
                peak,
                inv_two_var,
            } => {
                let cx = lo[0] + width[0] * rng.random::<f64>();
                let cy = lo[1] + width[1] * rng.random::<f64>();
                for (out, p) in w.iter_mut().zip(coords) {
                    let r2 = (p[0] - cx).powi(2) + (p[1] - cy).powi(2);
                    *out = peak * (-r2 * inv_two_var).exp();
                }
            }
            Spectral::Schlather { field } => {
                field.sample_into(rng, &mut scratch.z, w);
                for v in w.iter_mut() {
                    *v = SQRT_2PI * v.max(0.0);
                }
            }
        }
    }

    /// One replication into `x`. Returns `true` when the storm budget ran out.
    fn replicate<R: Rng + ?Sized>(&self, bound: f64, rng: &mut R, scratch: &mut Scratch, w: &mut [f64], x: &mut [f64]) -> bool {
        x.fill(0.0);
        let mut arrival = 0.0;
        for _ in 0..STORM_CAP {
            arrival += rng.sample::<f64, _>(Exp1);
            let xi = 1.0 / arrival;
            let floor = x.iter().copied().fold(f64::INFINITY, f64::min);
            if xi * bound <= floor {
                return false;
            }
            self.draw(rng, scratch, w);
            for (xs, ws) in x.iter_mut().zip(w.iter()) {
                *xs = xs.max(xi * ws);
            }
        }
        true
    }
}

impl Extremal {
    fn new(kind: MaxStableKind, model: &CorrelationModel, sites: &SiteSet) -> Result<Self> {
        let d = sites.len();
        let nu = EXTREMAL_T_DOF;
        let mut anchors = Vec::with_capacity(d);
        for j in 0..d {
            let others: Vec<usize> = (0..d).filter(|&k| k != j).collect();
            let shift: Vec<f64> = others
                .iter()
                .map(|&k| {
                    let h = sites.distance(k, j);
                    if kind == MaxStableKind::BrownResnick {
                        model.semivariogram(h)
                    } else {
                        model.correlation(h)
                    }
                })
                .collect();
            let field = if others.is_empty() {
                None
            } else {
                let cov = Array2::from_shape_fn((d - 1, d - 1), |(a, b)| {
                    let h = sites.distance(others[a], others[b]);
                    if kind == MaxStableKind::BrownResnick {
                        // Cov(ε_k − ε_j, ε_l − ε_j) = γ_kj + γ_lj − γ_kl
                        shift[a] + shift[b] - model.semivariogram(h)
                    } else {
                        (model.correlation(h) - shift[a] * shift[b]) / (nu + 1.0)
                    }
                });
                Some(GaussianField::from_covariance(&cov)?)
            };
            anchors.push(Anchored { field, shift });
        }
        Ok(match kind {
            MaxStableKind::BrownResnick => Extremal::BrownResnick(anchors),
            _ => Extremal::ExtremalT {
                anchors,
                chi2: ChiSquared::new(nu + 1.0).expect("positive degrees of freedom"),
            },
        })
    }

    /// Draws the spectral function normalised at site `j` (so `y[j] = 1`).
    #[inline]
    fn draw<R: Rng + ?Sized>(&self, j: usize, rng: &mut R, scratch: &mut Scratch, y: &mut [f64]) {
        let (anchor, student) = match self {
            Extremal::BrownResnick(anchors) => (&anchors[j], None),
            Extremal::ExtremalT { anchors, chi2 } => (&anchors[j], Some(chi2)),
        };
        y[j] = 1.0;
        let Some(field) = &anchor.field else { return };
        field.sample_into(rng, &mut scratch.z, &mut scratch.eps);
        let (before, after) = y.split_at_mut(j);
        let rest = before.iter_mut().chain(after[1..].iter_mut());
        match student {
            None => {
                for ((out, e), g) in rest.zip(&scratch.eps).zip(&anchor.shift) {
                    *out = (e - g).exp();
                }
            }
            Some(chi2) => {
                // Student process with ν + 1 degrees of freedom located at ρ(· − s_j).
                let scale = ((EXTREMAL_T_DOF + 1.0) / rng.sample(chi2)).sqrt();
                for ((out, e), rho) in rest.zip(&scratch.eps).zip(&anchor.shift) {
                    *out = (rho + scale * e).max(0.0).powf(EXTREMAL_T_DOF);
                }
            }
        }
    }

    fn replicate<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut Scratch, y: &mut [f64], x: &mut [f64]) -> bool {
        x.fill(0.0);
        let mut approximate = false;
        for j in 0..x.len() {
            let mut arrival = rng.sample::<f64, _>(Exp1);
            let mut draws = 0usize;
            while 1.0 / arrival > x[j] {
                if draws == STORM_CAP {
                    approximate = true;
                    break;
                }
                let zeta = 1.0 / arrival;
                self.draw(j, rng, scratch, y);
                draws += 1;
                if (0..j).all(|k| zeta * y[k] < x[k]) {
                    for (xs, ys) in x.iter_mut().zip(y.iter()) {
                        *xs = xs.max(zeta * ys);
                    }
                }
                arrival += rng.sample::<f64, _>(Exp1);
            }
        }
        approximate
    }
}

/// Runs `step` on every row with that row's stream; counts rows reporting `true`.
fn fill_rows(values: &mut Array2<f64>, key: StreamKey, mut step: impl FnMut(&mut ChaCha8Rng, &mut [f64]) -> bool) -> usize {
    let mut flagged = 0;
    for (r, mut row) in values.rows_mut().into_iter().enumerate() {
        let x = row.as_slice_mut().expect("rows of a standard-layout array are contiguous");
        if step(&mut key.stream(r as u64), x) {
            flagged += 1;
        }
    }
    flagged
}

/// Simulates `n` replications of a simple max-stable process on `sites`.
///
/// Replication `r` draws from `key.stream(r)`.
pub fn simulate_max_stable(
    kind: MaxStableKind,
    model: &CorrelationModel,
    sites: &SiteSet,
    n: usize,
    key: StreamKey,
) -> Result<FieldSample> {
    model.validate()?;
    let d = sites.len();
    let mut values = Array2::zeros((n, d));
    let mut scratch = Scratch {
        z: vec![0.0; d],
        eps: vec![0.0; d],
    };
    let mut w = vec![0.0; d];
    let approximate_reps = match kind {
        MaxStableKind::Smith | MaxStableKind::Schlather => {
            let spectral = Spectral::new(kind, model, sites)?;
            let bound = spectral.bound();
            fill_rows(&mut values, key, |rng, x| spectral.replicate(bound, rng, &mut scratch, &mut w, x))
        }
        MaxStableKind::BrownResnick | MaxStableKind::ExtremalT => {
            let extremal = Extremal::new(kind, model, sites)?;
            scratch.z.truncate(d.saturating_sub(1));
            scratch.eps.truncate(d.saturating_sub(1));
            fill_rows(&mut values, key, |rng, x| extremal.replicate(rng, &mut scratch, &mut w, x))
        }
    };
    if approximate_reps > 0 {
        log::warn!("{kind:?}: {approximate_reps}/{n} replications hit the storm budget");
    }
    Ok(FieldSample {
        values,
        site_hash: sites.fingerprint(),
        approximate_reps,
    })
}

/// `y = −1 / log(1 − exp(−1/x))`, the marginal-preserving inversion of a unit Fréchet value.
#[inline]
pub fn invert_frechet(x: f64) -> f64 {
    let a = -1.0 / x;
    let p = a.exp();
    // log(1 − e^a) computed on the accurate branch for each half of the range.
    let log_survival = if p < 0.5 { (-p).ln_1p() } else { (-a.exp_m1()).ln() };
    -1.0 / log_survival
}

/// Entrywise inversion of a max-stable sample into an inverted max-stable sample.
pub fn invert_max_stable(x: &FieldSample) -> Result<FieldSample> {
    if let Some(bad) = x.values.iter().find(|v| v.is_nan() || **v <= 0.0) {
        return Err(Error::Domain(format!("inversion needs positive values, found {bad}")));
    }
    Ok(FieldSample {
        values: x.values.mapv(invert_frechet),
        site_hash: x.site_hash,
        approximate_reps: x.approximate_reps,
    })
}
