use serde::{Deserialize, Serialize};

use super::generate::{Corpus, Group};
use crate::nn::{evaluate, Network};
use crate::sim::{DependenceClass, Family};
use crate::{Error, Result};

/// Report rows in output order.
pub const REPORT_ROWS: [&str; 10] = [
    "training",
    "validation",
    "testing",
    "Gaussian",
    "AD",
    "AI",
    "mixtures",
    "different-locations",
    "different-scale",
    "different-smooth",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    pub group: String,
    pub datasets: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<GroupResult>,
    /// Rows that were omitted because their group is empty.
    pub warnings: Vec<String>,
}

impl EvaluationReport {
    pub fn row(&self, group: &str) -> Option<&GroupResult> {
        self.rows.iter().find(|r| r.group == group)
    }
}

/// Dataset indices behind a named report row.
///
/// `Gaussian`, `AD`, `AI` and `mixtures` are the test-split datasets of the
/// extreme-Gaussian, max-stable, inverted max-stable and max-mixture families.
pub fn group_indices(corpus: &Corpus, group: &str) -> Result<Vec<usize>> {
    let m = &corpus.manifest;
    let testing_where = |keep: &dyn Fn(Family, DependenceClass) -> bool| {
        m.split
            .testing
            .iter()
            .copied()
            .filter(|&i| keep(m.records[i].family, m.records[i].label))
            .collect::<Vec<_>>()
    };
    let in_group = |g: Group| m.records.iter().filter(|r| r.group == g).map(|r| r.index).collect::<Vec<_>>();
    Ok(match group {
        "training" => m.split.training.clone(),
        "validation" => m.split.validation.clone(),
        "testing" => m.split.testing.clone(),
        "Gaussian" => testing_where(&|f, _| f == Family::ExtremeGaussian),
        "AD" => testing_where(&|f, _| f != Family::MaxMixture && f != Family::ExtremeGaussian && !f.is_inverted()),
        "AI" => testing_where(&|f, _| f.is_inverted()),
        "mixtures" => testing_where(&|f, l| f == Family::MaxMixture && l == DependenceClass::Mixed),
        "different-locations" => in_group(Group::DifferentLocations),
        "different-scale" => in_group(Group::DifferentScale),
        "different-smooth" => in_group(Group::DifferentSmooth),
        other => return Err(Error::Config(format!("unknown evaluation group {other:?}"))),
    })
}

/// Loss and accuracy of `net` on every non-empty report row.
pub fn evaluate_model(net: &Network, corpus: &Corpus, l2: f64) -> Result<EvaluationReport> {
    let m = &corpus.manifest;
    if net.classes() != m.classes {
        return Err(Error::Config(format!("network has {} classes, corpus has {}", net.classes(), m.classes)));
    }
    let mut report = EvaluationReport::default();
    for name in REPORT_ROWS {
        let indices = group_indices(corpus, name)?;
        if indices.is_empty() {
            report.warnings.push(format!("group {name} is empty; row omitted"));
            continue;
        }
        let samples = corpus.labeled(&indices)?;
        let (loss, accuracy) = evaluate(net, &samples, l2)?;
        report.rows.push(GroupResult {
            group: name.into(),
            datasets: indices.len(),
            loss,
            accuracy,
        });
    }
    Ok(report)
}
