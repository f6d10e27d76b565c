use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::generate::{CorpusManifest, DatasetRecord, Group};
use crate::rng::{lanes, StreamKey};
use crate::sim::DependenceClass;

/// Smallest class size for which a stratified split is meaningful.
pub const MIN_CLASS_SIZE: usize = 5;

/// Dataset indices per split, each list ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub training: Vec<usize>,
    pub validation: Vec<usize>,
    pub testing: Vec<usize>,
    /// Held-out evaluation groups, never used for fitting.
    pub evaluation: Vec<usize>,
}

/// Stratified 64/16/20 split of the main group.
///
/// Each class is shuffled with its own stream, then `⌊0.16 n⌋` datasets go to
/// validation, `⌊0.20 n⌋` to testing and the rest to training.
pub fn split_records(records: &[DatasetRecord], seed: u64) -> (SplitAssignment, Vec<String>) {
    let mut split = SplitAssignment::default();
    let mut warnings = Vec::new();
    for class in DependenceClass::ALL {
        let mut members: Vec<usize> = records
            .iter()
            .filter(|r| r.group == Group::Main && r.label == class)
            .map(|r| r.index)
            .collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < MIN_CLASS_SIZE {
            warnings.push(format!(
                "class {class} has only {} datasets; its split is degenerate",
                members.len()
            ));
        }
        members.shuffle(&mut StreamKey::new(seed, class.index() as u64).with_lane(lanes::SPLIT).stream(0));
        let n = members.len();
        let n_val = n * 16 / 100;
        let n_test = n * 20 / 100;
        split.validation.extend_from_slice(&members[..n_val]);
        split.testing.extend_from_slice(&members[n_val..n_val + n_test]);
        split.training.extend_from_slice(&members[n_val + n_test..]);
    }
    split.evaluation = records.iter().filter(|r| r.group != Group::Main).map(|r| r.index).collect();
    for list in [&mut split.training, &mut split.validation, &mut split.testing] {
        list.sort_unstable();
    }
    (split, warnings)
}

pub fn split_corpus(manifest: &CorpusManifest, seed: u64) -> (SplitAssignment, Vec<String>) {
    split_records(&manifest.records, seed)
}
