//! Score containers shared by every scorer.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;

use crate::data::{AuditDataset, PointRecord};
use crate::error::{Error, Result};

/// One membership score per audited point, tagged with the producing method.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    /// Method identifier, e.g. `BASE1` or `RMIA(γ=1)`.
    pub method: String,
    /// Method configuration, e.g. `centering=lse`.
    pub config: String,
    pub point_ids: Vec<String>,
    pub scores: Vec<f64>,
}

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Stable hash of `method` and `config`.
    pub fn config_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.method.hash(&mut h);
        self.config.hash(&mut h);
        h.finish()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.point_ids.iter().map(String::as_str).zip(self.scores.iter().copied())
    }
}

/// A point that could not be scored.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub point_id: String,
    pub error: Error,
}

/// Scores for the points that succeeded plus the per-point failures.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub scores: ScoreVector,
    pub failures: Vec<PointFailure>,
}

impl ScoreReport {
    /// The complete score vector, or the first per-point failure in dataset
    /// order.
    pub fn into_scores(self) -> Result<ScoreVector> {
        match self.failures.into_iter().next() {
            Some(f) => Err(f.error),
            None => Ok(self.scores),
        }
    }
}

/// Scores every point independently (in parallel) and collects failures.
/// Non-finite scores are reported as numerical failures.
pub(crate) fn score_points<F>(ds: &AuditDataset, method: &str, config: String, f: F) -> ScoreReport
where
    F: Fn(&PointRecord) -> Result<f64> + Sync,
{
    let results: Vec<Result<f64>> = ds
        .points()
        .par_iter()
        .map(|p| {
            f(p).and_then(|s| {
                if s.is_finite() {
                    Ok(s)
                } else {
                    Err(Error::Numerical(format!("non-finite score for point {}", p.point_id)))
                }
            })
        })
        .collect();
    let mut scores = ScoreVector {
        method: method.to_string(),
        config,
        point_ids: Vec::with_capacity(ds.len()),
        scores: Vec::with_capacity(ds.len()),
    };
    let mut failures = Vec::new();
    for (p, r) in ds.points().iter().zip(results) {
        match r {
            Ok(s) => {
                scores.point_ids.push(p.point_id.clone());
                scores.scores.push(s);
            }
            Err(error) => failures.push(PointFailure {
                point_id: p.point_id.clone(),
                error,
            }),
        }
    }
    ScoreReport { scores, failures }
}
