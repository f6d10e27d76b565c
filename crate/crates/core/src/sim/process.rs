use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::CorrelationModel;
use crate::{Error, Result};

/// Ground-truth dependence class. The discriminant is the network's class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DependenceClass {
    #[serde(rename = "AD")]
    AsymptoticallyDependent = 0,
    #[serde(rename = "AI")]
    AsymptoticallyIndependent = 1,
    #[serde(rename = "MIX")]
    Mixed = 2,
}

impl DependenceClass {
    pub const ALL: [DependenceClass; 3] = [Self::AsymptoticallyDependent, Self::AsymptoticallyIndependent, Self::Mixed];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Self::AsymptoticallyDependent => "AD",
            Self::AsymptoticallyIndependent => "AI",
            Self::Mixed => "MIX",
        }
    }
}

impl fmt::Display for DependenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// The four spectral constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MaxStableKind {
    Smith,
    Schlather,
    BrownResnick,
    ExtremalT,
}

impl MaxStableKind {
    pub const ALL: [MaxStableKind; 4] = [Self::Smith, Self::Schlather, Self::BrownResnick, Self::ExtremalT];
}

/// Flat family name as recorded in manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Smith,
    Schlather,
    BrownResnick,
    ExtremalT,
    InvSmith,
    InvSchlather,
    InvBrownResnick,
    InvExtremalT,
    ExtremeGaussian,
    MaxMixture,
}

impl Family {
    pub fn max_stable(kind: MaxStableKind) -> Self {
        match kind {
            MaxStableKind::Smith => Self::Smith,
            MaxStableKind::Schlather => Self::Schlather,
            MaxStableKind::BrownResnick => Self::BrownResnick,
            MaxStableKind::ExtremalT => Self::ExtremalT,
        }
    }

    pub fn inverted(kind: MaxStableKind) -> Self {
        match kind {
            MaxStableKind::Smith => Self::InvSmith,
            MaxStableKind::Schlather => Self::InvSchlather,
            MaxStableKind::BrownResnick => Self::InvBrownResnick,
            MaxStableKind::ExtremalT => Self::InvExtremalT,
        }
    }

    pub fn is_inverted(self) -> bool {
        matches!(self, Self::InvSmith | Self::InvSchlather | Self::InvBrownResnick | Self::InvExtremalT)
    }
}

/// Generative model with a known dependence class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProcessSpec {
    MaxStable {
        kind: MaxStableKind,
        model: CorrelationModel,
    },
    Inverted {
        kind: MaxStableKind,
        model: CorrelationModel,
    },
    ExtremeGaussian {
        model: CorrelationModel,
    },
    MaxMixture {
        weight: f64,
        ad: Box<ProcessSpec>,
        ai: Box<ProcessSpec>,
    },
}

impl ProcessSpec {
    /// Builds a max-mixture, checking that it nests one AD and one AI component.
    pub fn mixture(weight: f64, ad: ProcessSpec, ai: ProcessSpec) -> Result<Self> {
        let spec = Self::MaxMixture {
            weight,
            ad: Box::new(ad),
            ai: Box::new(ai),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::MaxStable { model, .. } | Self::Inverted { model, .. } | Self::ExtremeGaussian { model } => {
                model.validate()
            }
            Self::MaxMixture { weight, ad, ai } => {
                if !(0.0..=1.0).contains(weight) {
                    return Err(Error::InvalidModel(format!("mixing weight {weight} outside [0, 1]")));
                }
                if matches!(**ad, Self::MaxMixture { .. }) || ad.label() != DependenceClass::AsymptoticallyDependent {
                    return Err(Error::InvalidModel("mixture AD component must be max-stable".into()));
                }
                if matches!(**ai, Self::MaxMixture { .. }) || ai.label() != DependenceClass::AsymptoticallyIndependent {
                    return Err(Error::InvalidModel(
                        "mixture AI component must be inverted max-stable or extreme Gaussian".into(),
                    ));
                }
                ad.validate()?;
                ai.validate()
            }
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Self::MaxStable { kind, .. } => Family::max_stable(*kind),
            Self::Inverted { kind, .. } => Family::inverted(*kind),
            Self::ExtremeGaussian { .. } => Family::ExtremeGaussian,
            Self::MaxMixture { .. } => Family::MaxMixture,
        }
    }

    /// Ground truth. Degenerate mixtures take the class of their surviving component.
    pub fn label(&self) -> DependenceClass {
        match self {
            Self::MaxStable { .. } => DependenceClass::AsymptoticallyDependent,
            Self::Inverted { .. } | Self::ExtremeGaussian { .. } => DependenceClass::AsymptoticallyIndependent,
            Self::MaxMixture { weight, .. } => {
                if *weight >= 1.0 {
                    DependenceClass::AsymptoticallyDependent
                } else if *weight <= 0.0 {
                    DependenceClass::AsymptoticallyIndependent
                } else {
                    DependenceClass::Mixed
                }
            }
        }
    }

    /// Correlation model of the process, or of the AD component for mixtures.
    pub fn model(&self) -> &CorrelationModel {
        match self {
            Self::MaxStable { model, .. } | Self::Inverted { model, .. } | Self::ExtremeGaussian { model } => model,
            Self::MaxMixture { ad, .. } => ad.model(),
        }
    }
}

/// Replications × sites matrix of simulated values.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub values: Array2<f64>,
    /// Fingerprint of the site set the sample was drawn on.
    pub site_hash: u64,
    /// Replications whose storm loop hit its budget before the stopping rule.
    pub approximate_reps: usize,
}

impl FieldSample {
    pub fn n_reps(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_sites(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_approximate(&self) -> bool {
        self.approximate_reps > 0
    }
}
