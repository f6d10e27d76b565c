use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Ordered observation locations in the unit square.
///
/// Order matters: row/column `i` of every dependence tensor refers to site `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct SiteSet {
    coords: Vec<[f64; 2]>,
}

impl SiteSet {
    pub fn new(coords: Vec<[f64; 2]>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidSites("at least one site is required".into()));
        }
        for (i, &[x, y]) in coords.iter().enumerate() {
            if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
                return Err(Error::InvalidSites(format!(
                    "site {i} at ({x}, {y}) lies outside the unit square"
                )));
            }
        }
        for i in 0..coords.len() {
            for j in (i + 1)..coords.len() {
                if coords[i] == coords[j] {
                    return Err(Error::InvalidSites(format!("sites {i} and {j} coincide")));
                }
            }
        }
        Ok(Self { coords })
    }

    /// Min-max rescales arbitrary planar coordinates into `[0, 1]²`.
    ///
    /// Both axes share one scale factor so distances keep their ratios. A
    /// single site maps to the origin.
    pub fn rescaled(raw: &[[f64; 2]]) -> Result<Self> {
        if raw.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSites("non-finite coordinate".into()));
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in raw {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let scale = if span > 0.0 { 1.0 / span } else { 0.0 };
        let coords = raw
            .iter()
            .map(|p| {
                [
                    ((p[0] - lo[0]) * scale).clamp(0.0, 1.0),
                    ((p[1] - lo[1]) * scale).clamp(0.0, 1.0),
                ]
            })
            .collect();
        Self::new(coords)
    }

    /// `count` sites drawn uniformly on the unit square.
    pub fn uniform<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Result<Self> {
        let coords = (0..count)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        Self::new(coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.coords[i], self.coords[j]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    /// Axis-aligned bounding box as `([xmin, ymin], [xmax, ymax])`.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.coords {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// FNV-1a hash of the coordinate bit patterns, used to identify site sets in manifests.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.coords.iter().flatten() {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

impl TryFrom<Vec<[f64; 2]>> for SiteSet {
    type Error = Error;

    fn try_from(coords: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(coords)
    }
}

impl From<SiteSet> for Vec<[f64; 2]> {
    fn from(sites: SiteSet) -> Self {
        sites.coords
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_outside_points() {
        assert!(SiteSet::new(vec![[0.2, 0.3], [0.2, 0.3]]).is_err());
        assert!(SiteSet::new(vec![[1.2, 0.3]]).is_err());
        assert!(SiteSet::new(vec![]).is_err());
        assert!(SiteSet::new(vec![[0.0, 0.0], [1.0, 1.0]]).is_ok());
    }

    #[test]
    fn rescaling_maps_into_unit_square() {
        let sites = SiteSet::rescaled(&[[10.0, -5.0], [14.0, -5.0], [12.0, -3.0]]).unwrap();
        assert_eq!(sites.coords(), &[[0.0, 0.0], [1.0, 0.0], [0.5, 0.5]]);
    }

    #[test]
    fn fingerprint_depends_on_order() {
        let a = SiteSet::new(vec![[0.1, 0.2], [0.3, 0.4]]).unwrap();
        let b = SiteSet::new(vec![[0.3, 0.4], [0.1, 0.2]]).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
    }
}
