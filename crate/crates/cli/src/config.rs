//! JSON run configuration.
//!
//! One document configures every command; each command reads its own section
//! and the shared `seed`, `threads` and `out` fields. Command-line flags
//! override the file, and the fully defaulted result is written to
//! `resolved-config.json` in the output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xdep_core::corpus::{balanced_counts, EvaluationSpec, FamilyCount, ParameterPolicy, ScenarioSpec, SitePolicy};
use xdep_core::extremes::DEFAULT_THRESHOLD;
use xdep_core::nn::{TrainConfig, REFERENCE_DENSE_UNITS};

use crate::error::{io_at, CliError, CliResult};

/// Block sizes tried by `predict` when none are configured.
pub const DEFAULT_BLOCK_SIZES: [usize; 7] = [92, 30, 15, 7, 5, 3, 1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub simulate: SimulateSection,
    pub train: TrainSection,
    pub evaluate: EvaluateSection,
    pub predict: PredictSection,
    pub featurize: FeaturizeSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            threads: None,
            out: PathBuf::from("xdep-out"),
            simulate: SimulateSection::default(),
            train: TrainSection::default(),
            evaluate: EvaluateSection::default(),
            predict: PredictSection::default(),
            featurize: FeaturizeSection::default(),
        }
    }
}

/// Dataset counts per class; AD and AI pools are spread over their families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCounts {
    pub ad: usize,
    pub ai: usize,
    #[serde(default)]
    pub mixtures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub scenario: u8,
    pub sites: usize,
    pub site_coords: Option<Vec<[f64; 2]>>,
    pub classes: usize,
    pub datasets: ClassCounts,
    /// Explicit per-family counts; replaces `datasets` when present.
    pub counts: Option<Vec<FamilyCount>>,
    pub parameters: Option<ParameterPolicy>,
    pub n_reps: usize,
    pub threshold: f64,
    pub evaluation: EvaluationSpec,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            scenario: 3,
            sites: 30,
            site_coords: None,
            classes: 2,
            datasets: ClassCounts { ad: 500, ai: 500, mixtures: 0 },
            counts: None,
            parameters: None,
            n_reps: 1000,
            threshold: DEFAULT_THRESHOLD,
            evaluation: EvaluationSpec::default(),
        }
    }
}

impl SimulateSection {
    pub fn scenario_spec(&self) -> CliResult<ScenarioSpec> {
        let counts = self.counts.clone().unwrap_or_else(|| {
            let mixtures = if self.classes == 3 { self.datasets.mixtures } else { 0 };
            balanced_counts(self.datasets.ad, self.datasets.ai, mixtures)
        });
        let mut spec = ScenarioSpec::preset(self.scenario, self.sites, self.classes, counts)
            .map_err(|e| CliError::Config(format!("simulate: {e}")))?;
        if let Some(coords) = &self.site_coords {
            spec.sites = match spec.sites {
                SitePolicy::Fixed { .. } => SitePolicy::Fixed {
                    count: coords.len(),
                    coords: Some(coords.clone()),
                },
                SitePolicy::RandomPerDataset { .. } => {
                    return Err(CliError::Config("simulate.site_coords needs a fixed-site scenario (2 or 3)".into()))
                }
            };
        }
        if let Some(p) = &self.parameters {
            spec.parameters = p.clone();
        }
        spec.n_reps = self.n_reps;
        spec.threshold = self.threshold;
        spec.evaluation = self.evaluation.clone();
        spec.validate().map_err(|e| CliError::Config(format!("simulate: {e}")))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Defaults to `<out>/corpus`.
    pub corpus: Option<PathBuf>,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub classes: usize,
    pub dense_units: [usize; 2],
    /// Continue from `checkpoint.xnn`, `model.xnn` and `history.csv` in the output directory.
    pub resume: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            corpus: None,
            learning_rate: t.learning_rate,
            l2: t.l2,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            classes: t.classes,
            dense_units: REFERENCE_DENSE_UNITS,
            resume: false,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            l2: self.l2,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            classes: self.classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Defaults to `<out>/corpus`.
    pub corpus: Option<PathBuf>,
    /// Defaults to `<out>/model.xnn`.
    pub model: Option<PathBuf>,
    pub l2: f64,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            corpus: None,
            model: None,
            l2: TrainConfig::default().l2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    /// Defaults to `<out>/model.xnn`.
    pub model: Option<PathBuf>,
    pub observations: Option<PathBuf>,
    pub block_sizes: Vec<usize>,
    pub threshold: f64,
    pub moving_average_window: Option<usize>,
    /// Fewer blocks than this flags a row as low confidence.
    pub min_blocks: usize,
}

impl Default for PredictSection {
    fn default() -> Self {
        Self {
            model: None,
            observations: None,
            block_sizes: DEFAULT_BLOCK_SIZES.to_vec(),
            threshold: DEFAULT_THRESHOLD,
            moving_average_window: None,
            min_blocks: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturizeSection {
    pub observations: Option<PathBuf>,
    pub block_size: usize,
    pub threshold: f64,
    pub moving_average_window: Option<usize>,
    pub profile_bins: usize,
}

impl Default for FeaturizeSection {
    fn default() -> Self {
        Self {
            observations: None,
            block_size: 1,
            threshold: DEFAULT_THRESHOLD,
            moving_average_window: None,
            profile_bins: 10,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_at(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fills every defaulted path so the resolved config names real locations.
    pub fn resolve_paths(&mut self) {
        let out = self.out.clone();
        self.train.corpus.get_or_insert_with(|| out.join("corpus"));
        self.evaluate.corpus.get_or_insert_with(|| out.join("corpus"));
        self.evaluate.model.get_or_insert_with(|| out.join("model.xnn"));
        self.predict.model.get_or_insert_with(|| out.join("model.xnn"));
    }

    pub fn require_seed(&self) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::Config("missing required field `seed` (set it in the config or pass --seed)".into()))
    }

    pub fn write_resolved(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join("resolved-config.json");
        let text = serde_json::to_string_pretty(self).expect("config serialises");
        std::fs::write(&path, text + "\n").map_err(io_at(&path))
    }
}
