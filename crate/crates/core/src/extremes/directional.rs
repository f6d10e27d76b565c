use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

use serde::Serialize;

use super::estimators::{empirical_chi, empirical_chibar, UniformScores};
use crate::sim::SiteSet;
use crate::{Error, Result};

/// Human-readable labels of the four angular classes (bearing 0 = north).
pub const DIRECTION_LABELS: [&str; 4] = ["(-pi/8,pi/8]", "(pi/8,3pi/8]", "(3pi/8,5pi/8]", "(5pi/8,7pi/8]"];

/// Angular class of the undirected pair between `a` and `b`.
///
/// The bearing is measured clockwise from north (`+y`) and folded into
/// `(−π/8, 7π/8]`.
pub fn direction_class(a: [f64; 2], b: [f64; 2]) -> usize {
    let mut theta = (b[0] - a[0]).atan2(b[1] - a[1]);
    while theta <= -FRAC_PI_8 {
        theta += PI;
    }
    while theta > 7.0 * FRAC_PI_8 {
        theta -= PI;
    }
    (((theta - FRAC_PI_8) / FRAC_PI_4).ceil().max(0.0) as usize).min(3)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub direction: usize,
    pub bin: usize,
    /// Mean pair distance in the bin.
    pub h: f64,
    pub chi: f64,
    pub chibar: f64,
    pub pairs: usize,
}

/// Binned `(h, χ̂(h), χ̄̂(h))` curves per angular class, for isotropy checks.
///
/// Distance bins have equal width on `[0, max pair distance]`; empty bins are omitted.
pub fn directional_tail_profile(scores: &UniformScores, sites: &SiteSet, u: f64, n_bins: usize) -> Result<Vec<ProfilePoint>> {
    let d = scores.n_sites();
    if d < 2 {
        return Err(Error::Shape(format!("a profile needs at least 2 sites, got {d}")));
    }
    if sites.len() != d {
        return Err(Error::Shape(format!("{} sites for {d} score columns", sites.len())));
    }
    if n_bins == 0 {
        return Err(Error::Config("n_bins must be positive".into()));
    }
    let h_max = (0..d)
        .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
        .map(|(i, j)| sites.distance(i, j))
        .fold(0.0, f64::max);
    // (sum h, sum chi, sum chibar, count) per (direction, bin)
    let mut acc = vec![[0.0f64; 4]; 4 * n_bins];
    for i in 0..d {
        for j in (i + 1)..d {
            let h = sites.distance(i, j);
            let bin = ((h / h_max * n_bins as f64) as usize).min(n_bins - 1);
            let dir = direction_class(sites.coords()[i], sites.coords()[j]);
            let chi = empirical_chi(scores.column(i), scores.column(j), u)?.value;
            let chibar = empirical_chibar(scores.column(i), scores.column(j), u)?.value;
            let cell = &mut acc[dir * n_bins + bin];
            cell[0] += h;
            cell[1] += chi;
            cell[2] += chibar;
            cell[3] += 1.0;
        }
    }
    Ok(acc
        .iter()
        .enumerate()
        .filter(|(_, c)| c[3] > 0.0)
        .map(|(k, c)| ProfilePoint {
            direction: k / n_bins,
            bin: k % n_bins,
            h: c[0] / c[3],
            chi: c[1] / c[3],
            chibar: c[2] / c[3],
            pairs: c[3] as usize,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn bearing_convention() {
        assert_eq!(direction_class([0.5, 0.2], [0.5, 0.9]), 0);
        assert_eq!(direction_class([0.5, 0.9], [0.5, 0.2]), 0);
        assert_eq!(direction_class([0.0, 0.0], [1.0, 1.0]), 1);
        assert_eq!(direction_class([0.0, 0.0], [1.0, 0.0]), 2);
        assert_eq!(direction_class([1.0, 0.0], [0.0, 0.0]), 2);
        assert_eq!(direction_class([0.0, 1.0], [1.0, 0.0]), 3);
    }

    #[test]
    fn class_boundaries_are_left_open() {
        let at = |theta: f64| direction_class([0.0, 0.0], [theta.sin(), theta.cos()]);
        assert_eq!(at(FRAC_PI_8 - 1e-9), 0);
        assert_eq!(at(FRAC_PI_8 + 1e-9), 1);
        assert_eq!(at(3.0 * FRAC_PI_8 + 1e-9), 2);
        assert_eq!(at(7.0 * FRAC_PI_8 - 1e-9), 3);
        assert_eq!(at(7.0 * FRAC_PI_8 + 1e-9), 0);
    }

    #[test]
    fn single_pair_populates_one_cell() {
        let sites = SiteSet::new(vec![[0.2, 0.2], [0.2, 0.6]]).unwrap();
        let values = Array2::from_shape_fn((100, 2), |(i, j)| (i * (j + 1)) as f64);
        let profile = directional_tail_profile(&UniformScores::from_values(&values), &sites, 0.9, 5).unwrap();
        assert_eq!(profile.len(), 1);
        assert_eq!(profile[0].direction, 0);
        assert_eq!(profile[0].bin, 4);
        assert!((profile[0].h - 0.4).abs() < 1e-12);
    }
}
