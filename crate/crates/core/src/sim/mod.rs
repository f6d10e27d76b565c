//! Spatial process simulation.

mod covariance;
mod gaussian;
mod maxstable;
mod process;
mod sites;

pub use covariance::{build_covariance, cholesky_with_nugget, CholeskyFactor, CorrelationModel, GaussianField, BASE_NUGGET, MAX_NUGGET};
pub use gaussian::{gaussian_to_frechet, log_normal_cdf, sample_gaussian_field, simulate_extreme_gaussian};
pub use maxstable::{
    extremal_t_constant, invert_frechet, invert_max_stable, simulate_max_stable, EXTREMAL_T_DOF, SMITH_MARGIN, STORM_CAP,
};
pub use process::{DependenceClass, Family, FieldSample, MaxStableKind, ProcessSpec};
pub use sites::SiteSet;

use ndarray::Zip;

use crate::rng::{lanes, StreamKey};
use crate::{Error, Result};

/// Simulates `n` replications of any process spec on `sites`.
pub fn simulate(spec: &ProcessSpec, sites: &SiteSet, n: usize, key: StreamKey) -> Result<FieldSample> {
    spec.validate()?;
    match spec {
        ProcessSpec::MaxStable { kind, model } => simulate_max_stable(*kind, model, sites, n, key),
        ProcessSpec::Inverted { kind, model } => invert_max_stable(&simulate_max_stable(*kind, model, sites, n, key)?),
        ProcessSpec::ExtremeGaussian { model } => simulate_extreme_gaussian(sites, model, n, key),
        ProcessSpec::MaxMixture { .. } => simulate_max_mixture(spec, sites, n, key),
    }
}

/// `max(a·X, (1−a)·Y)` for independent AD and AI component draws.
///
/// The components draw from `key.fork(MIX_AD)` and `key.fork(MIX_AI)`.
pub fn simulate_max_mixture(spec: &ProcessSpec, sites: &SiteSet, n: usize, key: StreamKey) -> Result<FieldSample> {
    let ProcessSpec::MaxMixture { weight, ad, ai } = spec else {
        return Err(Error::InvalidModel(format!("{:?} is not a max-mixture", spec.family())));
    };
    spec.validate()?;
    let a = *weight;
    let x = simulate(ad, sites, n, key.fork(lanes::MIX_AD))?;
    let y = simulate(ai, sites, n, key.fork(lanes::MIX_AI))?;
    let mut values = x.values;
    Zip::from(&mut values).and(&y.values).for_each(|xv, &yv| {
        *xv = (a * *xv).max((1.0 - a) * yv);
    });
    Ok(FieldSample {
        values,
        site_hash: x.site_hash,
        approximate_reps: x.approximate_reps.max(y.approximate_reps),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sites() -> SiteSet {
        SiteSet::new(vec![[0.1, 0.2], [0.5, 0.5], [0.9, 0.1]]).unwrap()
    }

    fn model() -> CorrelationModel {
        CorrelationModel::new(0.5, 1.0).unwrap()
    }

    #[test]
    fn degenerate_mixtures_reproduce_components() {
        let ad = ProcessSpec::MaxStable { kind: MaxStableKind::Schlather, model: model() };
        let ai = ProcessSpec::ExtremeGaussian { model: model() };
        let key = StreamKey::new(5, 9);
        let x = simulate(&ad, &sites(), 50, key.fork(lanes::MIX_AD)).unwrap();
        let y = simulate(&ai, &sites(), 50, key.fork(lanes::MIX_AI)).unwrap();
        let one = simulate(&ProcessSpec::mixture(1.0, ad.clone(), ai.clone()).unwrap(), &sites(), 50, key).unwrap();
        let zero = simulate(&ProcessSpec::mixture(0.0, ad, ai).unwrap(), &sites(), 50, key).unwrap();
        assert_eq!(one.values, x.values);
        assert_eq!(zero.values, y.values);
    }

    #[test]
    fn mixture_entry_is_max_of_scaled_components() {
        let ad = ProcessSpec::MaxStable { kind: MaxStableKind::Smith, model: model() };
        let ai = ProcessSpec::Inverted { kind: MaxStableKind::Schlather, model: model() };
        let key = StreamKey::new(2, 2);
        let mix = simulate(&ProcessSpec::mixture(0.3, ad.clone(), ai.clone()).unwrap(), &sites(), 30, key).unwrap();
        let x = simulate(&ad, &sites(), 30, key.fork(lanes::MIX_AD)).unwrap();
        let y = simulate(&ai, &sites(), 30, key.fork(lanes::MIX_AI)).unwrap();
        for ((m, a), b) in mix.values.iter().zip(&x.values).zip(&y.values) {
            assert_eq!(*m, (0.3 * a).max(0.7 * b));
        }
    }

    #[test]
    fn simulate_max_mixture_rejects_other_specs() {
        let ad = ProcessSpec::MaxStable { kind: MaxStableKind::Smith, model: model() };
        assert!(simulate_max_mixture(&ad, &sites(), 1, StreamKey::new(0, 0)).is_err());
    }
}
