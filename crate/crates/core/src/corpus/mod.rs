//! Labelled corpora of dependence tensors for the three simulation scenarios.
//!
//! A corpus directory holds `manifest.json` (scenario, seed, one record per
//! dataset and the split map) and `tensors.bin`, the concatenated tensor
//! records at the offsets listed in the manifest.

mod evaluate;
mod generate;
mod scenario;
mod split;

pub use evaluate::{evaluate_model, group_indices, EvaluationReport, GroupResult, REPORT_ROWS};
pub use generate::{generate_corpus, Corpus, CorpusManifest, DatasetRecord, Group, CORPUS_FORMAT, MANIFEST_FILE, TENSORS_FILE};
pub use scenario::{
    balanced_counts, EvaluationSpec, FamilyCount, ParameterPolicy, ScenarioSpec, SitePolicy, FAMILY_ORDER, HELD_OUT_SCALES,
    HELD_OUT_SMOOTHNESS, MIXING_GRID, SCALE_GRID, SMOOTHNESS_GRID,
};
pub use split::{split_corpus, split_records, SplitAssignment, MIN_CLASS_SIZE};
