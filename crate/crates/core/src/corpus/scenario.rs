use serde::{Deserialize, Serialize};

use crate::extremes::DEFAULT_THRESHOLD;
use crate::sim::{Family, MaxStableKind};
use crate::{Error, Result};

/// Scale grid of the sequential-parameter scenario (the 0.2 steps plus the endpoint 1.0).
pub const SCALE_GRID: [f64; 6] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
/// Smoothness grid `0.1, 0.3, …, 1.9`.
pub const SMOOTHNESS_GRID: [f64; 10] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7, 1.9];
/// Mixing weights `0.3, 0.4, …, 0.7`.
pub const MIXING_GRID: [f64; 5] = [0.3, 0.4, 0.5, 0.6, 0.7];
/// Held-out scales for the "different scale" group, between the training grid points.
pub const HELD_OUT_SCALES: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
/// Held-out smoothness values for the "different smooth" group.
pub const HELD_OUT_SMOOTHNESS: [f64; 9] = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum SitePolicy {
    /// One site set shared by every dataset: `coords` if given, otherwise
    /// `count` uniform sites drawn once from the corpus seed.
    Fixed {
        count: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coords: Option<Vec<[f64; 2]>>,
    },
    /// Fresh uniform sites for every dataset.
    RandomPerDataset { count: usize },
}

impl SitePolicy {
    pub fn count(&self) -> usize {
        match self {
            SitePolicy::Fixed { count, coords } => coords.as_ref().map_or(*count, Vec::len),
            SitePolicy::RandomPerDataset { count } => *count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParameterPolicy {
    /// Independent uniform draws on `(lo, hi]`.
    Random {
        scale: [f64; 2],
        smoothness: [f64; 2],
        mixing: [f64; 2],
    },
    /// Datasets of each family cycle through the Cartesian grid
    /// `scale × smoothness` (`× mixing` for mixtures), scale varying slowest.
    Grid {
        scale: Vec<f64>,
        smoothness: Vec<f64>,
        mixing: Vec<f64>,
    },
}

impl ParameterPolicy {
    pub fn random_default() -> Self {
        ParameterPolicy::Random {
            scale: [0.0, 1.0],
            smoothness: [0.1, 1.9],
            mixing: [0.0, 1.0],
        }
    }

    pub fn grid_default() -> Self {
        ParameterPolicy::Grid {
            scale: SCALE_GRID.to_vec(),
            smoothness: SMOOTHNESS_GRID.to_vec(),
            mixing: MIXING_GRID.to_vec(),
        }
    }

    fn validate(&self) -> Result<()> {
        let range = |name: &str, r: &[f64; 2], lo: f64, hi: f64| {
            if r[0] < lo || r[1] > hi || r[0] >= r[1] {
                Err(Error::Config(format!("parameters.{name} range {r:?} must be increasing within [{lo}, {hi}]")))
            } else {
                Ok(())
            }
        };
        let values = |name: &str, v: &[f64], ok: &dyn Fn(f64) -> bool| {
            if v.is_empty() || v.iter().any(|x| !ok(*x)) {
                Err(Error::Config(format!("parameters.{name} grid {v:?} is empty or out of range")))
            } else {
                Ok(())
            }
        };
        match self {
            ParameterPolicy::Random { scale, smoothness, mixing } => {
                range("scale", scale, 0.0, f64::MAX)?;
                range("smoothness", smoothness, 0.0, 2.0)?;
                range("mixing", mixing, 0.0, 1.0)
            }
            ParameterPolicy::Grid { scale, smoothness, mixing } => {
                values("scale", scale, &|x| x > 0.0 && x.is_finite())?;
                values("smoothness", smoothness, &|x| x > 0.0 && x <= 2.0)?;
                values("mixing", mixing, &|x| (0.0..=1.0).contains(&x))
            }
        }
    }
}

/// Number of datasets to generate for one family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyCount {
    pub family: Family,
    pub count: usize,
}

/// Every family in generation order.
pub const FAMILY_ORDER: [Family; 10] = [
    Family::Smith,
    Family::Schlather,
    Family::BrownResnick,
    Family::ExtremalT,
    Family::InvSmith,
    Family::InvSchlather,
    Family::InvBrownResnick,
    Family::InvExtremalT,
    Family::ExtremeGaussian,
    Family::MaxMixture,
];

fn split_even(total: usize, parts: usize) -> impl Iterator<Item = usize> {
    (0..parts).map(move |i| total / parts + usize::from(i < total % parts))
}

/// Family counts with `ad` max-stable datasets split evenly over the four
/// models, `ai` datasets split 70/30 between the inverted models (evenly)
/// and the extreme-Gaussian model, and `mixtures` max-mixtures.
pub fn balanced_counts(ad: usize, ai: usize, mixtures: usize) -> Vec<FamilyCount> {
    let inverted = (ai as f64 * 0.7).round() as usize;
    let mut counts: Vec<FamilyCount> = MaxStableKind::ALL
        .iter()
        .zip(split_even(ad, 4))
        .map(|(&k, count)| FamilyCount {
            family: Family::max_stable(k),
            count,
        })
        .collect();
    counts.extend(MaxStableKind::ALL.iter().zip(split_even(inverted, 4)).map(|(&k, count)| FamilyCount {
        family: Family::inverted(k),
        count,
    }));
    counts.push(FamilyCount {
        family: Family::ExtremeGaussian,
        count: ai - inverted,
    });
    counts.push(FamilyCount {
        family: Family::MaxMixture,
        count: mixtures,
    });
    counts.retain(|c| c.count > 0);
    counts
}

/// Held-out evaluation groups generated alongside the main corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSpec {
    /// Datasets per group, balanced over classes like the main corpus.
    pub datasets_per_group: usize,
    pub scales: Vec<f64>,
    pub smoothness: Vec<f64>,
}

impl Default for EvaluationSpec {
    fn default() -> Self {
        Self {
            datasets_per_group: 0,
            scales: HELD_OUT_SCALES.to_vec(),
            smoothness: HELD_OUT_SMOOTHNESS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub scenario: u8,
    pub sites: SitePolicy,
    pub parameters: ParameterPolicy,
    pub counts: Vec<FamilyCount>,
    pub classes: usize,
    #[serde(default = "default_reps")]
    pub n_reps: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub evaluation: EvaluationSpec,
}

fn default_reps() -> usize {
    1000
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl ScenarioSpec {
    /// The three reference scenarios:
    /// 1 random sites and random parameters, 2 fixed sites and random
    /// parameters, 3 fixed sites and grid parameters.
    pub fn preset(scenario: u8, sites: usize, classes: usize, counts: Vec<FamilyCount>) -> Result<Self> {
        let (site_policy, parameters) = match scenario {
            1 => (SitePolicy::RandomPerDataset { count: sites }, ParameterPolicy::random_default()),
            2 => (SitePolicy::Fixed { count: sites, coords: None }, ParameterPolicy::random_default()),
            3 => (SitePolicy::Fixed { count: sites, coords: None }, ParameterPolicy::grid_default()),
            other => return Err(Error::Config(format!("scenario must be 1, 2 or 3, got {other}"))),
        };
        let spec = Self {
            scenario,
            sites: site_policy,
            parameters,
            counts,
            classes,
            n_reps: default_reps(),
            threshold: DEFAULT_THRESHOLD,
            evaluation: EvaluationSpec::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.scenario) {
            return Err(Error::Config(format!("scenario must be 1, 2 or 3, got {}", self.scenario)));
        }
        if self.sites.count() < 2 {
            return Err(Error::Config("sites.count must be at least 2".into()));
        }
        self.parameters.validate()?;
        if self.counts.is_empty() || self.counts.iter().any(|c| c.count == 0) {
            return Err(Error::Config("counts must list at least one family, each with a positive count".into()));
        }
        for (i, c) in self.counts.iter().enumerate() {
            if self.counts[..i].iter().any(|o| o.family == c.family) {
                return Err(Error::Config(format!("family {:?} is listed twice in counts", c.family)));
            }
        }
        let mixtures = self.counts.iter().any(|c| c.family == Family::MaxMixture);
        match (self.classes, mixtures) {
            (2, true) => return Err(Error::Config("a 2-class corpus cannot contain max-mixtures".into())),
            (3, false) => return Err(Error::Config("a 3-class corpus needs max-mixture datasets".into())),
            (2 | 3, _) => {}
            (c, _) => return Err(Error::Config(format!("classes must be 2 or 3, got {c}"))),
        }
        if self.n_reps < 2 {
            return Err(Error::Config("n_reps must be at least 2".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        let e = &self.evaluation;
        if e.datasets_per_group > 0 {
            if e.scales.is_empty() || e.scales.iter().any(|s| s.is_nan() || *s <= 0.0) {
                return Err(Error::Config("evaluation.scales must be non-empty and positive".into()));
            }
            if e.smoothness.is_empty() || e.smoothness.iter().any(|s| !(*s > 0.0 && *s <= 2.0)) {
                return Err(Error::Config("evaluation.smoothness must be non-empty within (0, 2]".into()));
            }
        }
        Ok(())
    }

    pub fn total_datasets(&self) -> usize {
        self.counts.iter().map(|c| c.count).sum()
    }

    pub fn count_of(&self, family: Family) -> usize {
        self.counts.iter().find(|c| c.family == family).map_or(0, |c| c.count)
    }

    /// Per-class split of `n` evaluation datasets into family counts.
    pub(crate) fn evaluation_counts(&self, n: usize) -> Vec<FamilyCount> {
        let per_class: Vec<usize> = split_even(n, self.classes).collect();
        balanced_counts(per_class[0], per_class[1], per_class.get(2).copied().unwrap_or(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_counts_follow_the_composition() {
        let c = balanced_counts(6, 4, 0);
        let ad: usize = c.iter().filter(|c| !c.family.is_inverted() && c.family != Family::ExtremeGaussian).map(|c| c.count).sum();
        assert_eq!(ad, 6);
        assert_eq!(c.iter().map(|c| c.count).sum::<usize>(), 10);
        let c = balanced_counts(100, 100, 20);
        let eg = c.iter().find(|c| c.family == Family::ExtremeGaussian).unwrap().count;
        assert_eq!(eg, 30);
        assert!(c.iter().filter(|c| c.family.is_inverted()).all(|c| c.count == 17 || c.count == 18));
        assert_eq!(c.last().unwrap().count, 20);
    }

    #[test]
    fn presets_and_validation() {
        let s = ScenarioSpec::preset(3, 15, 2, balanced_counts(10, 10, 0)).unwrap();
        assert!(matches!(s.parameters, ParameterPolicy::Grid { .. }));
        assert_eq!(s.total_datasets(), 20);
        assert!(ScenarioSpec::preset(4, 15, 2, balanced_counts(1, 1, 0)).is_err());
        assert!(ScenarioSpec::preset(1, 15, 3, balanced_counts(1, 1, 0)).is_err());
        assert!(ScenarioSpec::preset(1, 15, 2, balanced_counts(1, 1, 1)).is_err());
        assert!(ScenarioSpec::preset(2, 1, 2, balanced_counts(1, 1, 0)).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let s = ScenarioSpec::preset(1, 12, 3, balanced_counts(4, 4, 4)).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioSpec>(&json).unwrap(), s);
        assert!(serde_json::from_str::<ScenarioSpec>(&json.replace("\"classes\"", "\"klasses\"")).is_err());
    }
}
