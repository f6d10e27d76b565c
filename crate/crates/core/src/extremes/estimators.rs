//! Pairwise empirical tail-dependence estimators on uniform scores.
//!
//! With `Û` the empirical CDF (rank / N) of each column,
//!
//! ```text
//! χ̂(s,t) = 2 − log(N⁻¹ Σ 1{Û(s) < u, Û(t) < u}) / log(N⁻¹ Σ 1{Û(s) < u})
//! χ̄̂(s,t) = 2 log(N⁻¹ Σ 1{Û(s) > u}) / log(N⁻¹ Σ 1{Û(s) > u, Û(t) > u}) − 1
//! ```
//!
//! Zero indicator sums are replaced by one (and flagged) so the logarithms
//! stay finite. Results are clamped to `[0, 1]` and `[−1, 1]`.

use ndarray::{Array2, Axis};

use super::preprocess::ordinal_ranks;
use crate::{Error, Result};

/// Default threshold for both estimators.
pub const DEFAULT_THRESHOLD: f64 = 0.975;

/// Per-column empirical CDF values `rank / N`; NaN marks a missing entry.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformScores {
    columns: Vec<Vec<f64>>,
    n_rows: usize,
}

impl UniformScores {
    /// Scores of raw values; NaN entries are missing.
    pub fn from_values(values: &Array2<f64>) -> Self {
        let columns = values
            .axis_iter(Axis(1))
            .map(|col| {
                let (ranks, present) = ordinal_ranks(col);
                ranks
                    .into_iter()
                    .map(|r| if r == 0 { f64::NAN } else { r as f64 / present as f64 })
                    .collect()
            })
            .collect();
        Self {
            columns,
            n_rows: values.nrows(),
        }
    }

    /// Scores of rank-transformed Fréchet values, where 0 encodes a missing entry.
    pub fn from_frechet(values: &Array2<f64>) -> Self {
        Self::from_values(&values.mapv(|v| if v > 0.0 { v } else { f64::NAN }))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_sites(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().flatten().any(|v| v.is_nan())
    }
}

/// One estimator value plus its bookkeeping flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEstimate {
    pub value: f64,
    /// A zero indicator sum was replaced by one.
    pub corrected: bool,
    /// The estimator had no finite value; `value` is 0.
    pub undefined: bool,
}

impl PairEstimate {
    fn undefined(corrected: bool) -> Self {
        Self {
            value: 0.0,
            corrected,
            undefined: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tail {
    Lower,
    Upper,
}

struct Counts {
    n: usize,
    marginal: usize,
    joint: usize,
}

fn check_inputs(u_s: &[f64], u_t: &[f64], u: f64) -> Result<()> {
    if u_s.len() != u_t.len() {
        return Err(Error::Shape(format!("score columns differ in length: {} vs {}", u_s.len(), u_t.len())));
    }
    if u_s.is_empty() {
        return Err(Error::Shape("score columns are empty".into()));
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Config(format!("threshold must lie in (0, 1), got {u}")));
    }
    Ok(())
}

// Rows missing in either column are skipped (pairwise-complete counting).
fn count(u_s: &[f64], u_t: &[f64], u: f64, tail: Tail) -> Counts {
    let mut c = Counts {
        n: 0,
        marginal: 0,
        joint: 0,
    };
    for (&a, &b) in u_s.iter().zip(u_t) {
        if a.is_nan() || b.is_nan() {
            continue;
        }
        c.n += 1;
        let (ea, eb) = match tail {
            Tail::Lower => (a < u, b < u),
            Tail::Upper => (a > u, b > u),
        };
        if ea {
            c.marginal += 1;
            if eb {
                c.joint += 1;
            }
        }
    }
    c
}

fn corrected_log_mean(k: usize, n: usize, corrected: &mut bool) -> f64 {
    let k = if k == 0 {
        *corrected = true;
        1
    } else {
        k
    };
    (k as f64 / n as f64).ln()
}

/// Empirical upper tail-dependence coefficient `χ̂_u` of two score columns.
pub fn empirical_chi(u_s: &[f64], u_t: &[f64], u: f64) -> Result<PairEstimate> {
    check_inputs(u_s, u_t, u)?;
    let c = count(u_s, u_t, u, Tail::Lower);
    if c.n == 0 {
        return Ok(PairEstimate::undefined(false));
    }
    let mut corrected = false;
    let log_marginal = corrected_log_mean(c.marginal, c.n, &mut corrected);
    let log_joint = corrected_log_mean(c.joint, c.n, &mut corrected);
    if log_marginal == 0.0 {
        return Ok(PairEstimate::undefined(corrected));
    }
    let value = 2.0 - log_joint / log_marginal;
    if !value.is_finite() {
        return Ok(PairEstimate::undefined(corrected));
    }
    Ok(PairEstimate {
        value: value.clamp(0.0, 1.0),
        corrected,
        undefined: false,
    })
}

/// Empirical lower tail-dependence coefficient `χ̄̂_u` of two score columns.
pub fn empirical_chibar(u_s: &[f64], u_t: &[f64], u: f64) -> Result<PairEstimate> {
    check_inputs(u_s, u_t, u)?;
    let c = count(u_s, u_t, u, Tail::Upper);
    if c.n == 0 {
        return Ok(PairEstimate::undefined(false));
    }
    let mut corrected = false;
    let log_marginal = corrected_log_mean(c.marginal, c.n, &mut corrected);
    let log_joint = corrected_log_mean(c.joint, c.n, &mut corrected);
    if log_joint == 0.0 {
        return Ok(PairEstimate::undefined(corrected));
    }
    let value = 2.0 * log_marginal / log_joint - 1.0;
    if !value.is_finite() {
        return Ok(PairEstimate::undefined(corrected));
    }
    Ok(PairEstimate {
        value: value.clamp(-1.0, 1.0),
        corrected,
        undefined: false,
    })
}
