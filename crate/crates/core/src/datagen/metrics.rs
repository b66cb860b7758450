use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::generate::GroundTruthErrors;
use crate::engine::ErrorReport;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("recall is undefined for an empty truth set")]
    EmptyTruth,
}

/// Number of the first `k` ranked ids that are in `truth`.
pub fn hits_at_k<S: AsRef<str>>(ranked: &[S], truth: &BTreeSet<String>, k: usize) -> usize {
    ranked.iter().take(k).filter(|id| truth.contains(id.as_ref())).count()
}

/// `|top-min(k, n) ∩ truth| / min(k, n)`; 0 for an empty ranking.
pub fn precision_at_k<S: AsRef<str>>(ranked: &[S], truth: &BTreeSet<String>, k: usize) -> Result<f64, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    let n = k.min(ranked.len());
    if n == 0 {
        return Ok(0.0);
    }
    Ok(hits_at_k(ranked, truth, k) as f64 / n as f64)
}

/// `|top-k ∩ truth| / |truth|`.
pub fn recall_at_k<S: AsRef<str>>(ranked: &[S], truth: &BTreeSet<String>, k: usize) -> Result<f64, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    if truth.is_empty() {
        return Err(MetricError::EmptyTruth);
    }
    Ok(hits_at_k(ranked, truth, k) as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthKind {
    MissingTrack,
    MissingObservation,
    GhostTrack,
}

impl TruthKind {
    pub fn ids<'a>(&self, truth: &'a GroundTruthErrors) -> &'a BTreeSet<String> {
        match self {
            TruthKind::MissingTrack => &truth.missing_track,
            TruthKind::MissingObservation => &truth.missing_observation,
            TruthKind::GhostTrack => &truth.ghost_track,
        }
    }
}

/// One ranked candidate: component id and class key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranked {
    pub id: String,
    pub class_key: String,
}

/// Per-scene rankings of a report, keyed by scene id.
pub fn rankings_by_scene(report: &ErrorReport) -> BTreeMap<String, Vec<Ranked>> {
    let mut out: BTreeMap<String, Vec<Ranked>> = BTreeMap::new();
    for e in &report.entries {
        out.entry(e.scene_id.clone()).or_default().push(Ranked {
            id: e.id.clone(),
            class_key: e.class_key.clone(),
        });
    }
    out
}

/// Union of the first `k` candidates of each class, in ranking order.
pub fn top_k_per_class(ranked: &[Ranked], k: usize) -> Vec<&str> {
    let mut taken: BTreeMap<&str, usize> = BTreeMap::new();
    ranked
        .iter()
        .filter(|r| {
            let n = taken.entry(r.class_key.as_str()).or_default();
            *n += 1;
            *n <= k
        })
        .map(|r| r.id.as_str())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMetrics {
    pub k: usize,
    /// `precision_at_k` averaged over scenes with at least one true error.
    pub precision_at_k: f64,
    /// Pooled recall of the per-scene top-k-per-class candidates.
    pub recall_per_class_at_k: f64,
    pub scenes_evaluated: usize,
    pub truth_total: usize,
    pub hits: usize,
}

/// Scores per-scene rankings against truth sidecars.
pub fn evaluate_rankings(
    rankings: &BTreeMap<String, Vec<Ranked>>,
    truths: &[GroundTruthErrors],
    kind: TruthKind,
    k: usize,
) -> Result<BatchMetrics, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    let empty = Vec::new();
    let mut precision_sum = 0.0;
    let mut scenes = 0;
    let mut truth_total = 0;
    let mut hits = 0;
    for truth in truths {
        let ids = kind.ids(truth);
        if ids.is_empty() {
            continue;
        }
        let ranked = rankings.get(&truth.scene_id).unwrap_or(&empty);
        let flat: Vec<&str> = ranked.iter().map(|r| r.id.as_str()).collect();
        precision_sum += precision_at_k(&flat, ids, k)?;
        scenes += 1;
        let per_class = top_k_per_class(ranked, k);
        hits += per_class.iter().filter(|id| ids.contains(**id)).count();
        truth_total += ids.len();
    }
    if truth_total == 0 {
        return Err(MetricError::EmptyTruth);
    }
    Ok(BatchMetrics {
        k,
        precision_at_k: precision_sum / scenes as f64,
        recall_per_class_at_k: hits as f64 / truth_total as f64,
        scenes_evaluated: scenes,
        truth_total,
        hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i:02}")).collect()
    }

    #[test]
    fn precision_examples() {
        let r = ids(10);
        let all: Vec<&str> = r.iter().map(String::as_str).collect();
        assert_eq!(precision_at_k(&r, &truth(&all), 10).unwrap(), 1.0);
        assert_eq!(precision_at_k(&r, &truth(&all[..7]), 10).unwrap(), 0.7);
        let short = ids(5);
        let five: Vec<&str> = short.iter().map(String::as_str).collect();
        assert_eq!(precision_at_k(&short, &truth(&five), 10).unwrap(), 1.0);
        assert_eq!(precision_at_k::<String>(&[], &truth(&["x"]), 10).unwrap(), 0.0);
        assert_eq!(precision_at_k(&r, &truth(&["x"]), 0), Err(MetricError::ZeroK));
    }

    #[test]
    fn recall_examples() {
        let t: BTreeSet<String> = (0..24).map(|i| format!("t{i}")).collect();
        let mut ranked: Vec<String> = (0..18).map(|i| format!("t{i}")).collect();
        ranked.extend(ids(5));
        assert_eq!(recall_at_k(&ranked, &t, 30).unwrap(), 0.75);
        assert_eq!(recall_at_k(&ids(3), &truth(&["c00"]), 3).unwrap(), 1.0);
        assert_eq!(recall_at_k(&ids(3), &truth(&["zz"]), 3).unwrap(), 0.0);
        assert_eq!(recall_at_k(&ids(3), &BTreeSet::new(), 3), Err(MetricError::EmptyTruth));
    }

    #[test]
    fn per_class_cut() {
        let ranked: Vec<Ranked> = ["car", "car", "truck", "car"]
            .iter()
            .enumerate()
            .map(|(i, c)| Ranked {
                id: format!("r{i}"),
                class_key: c.to_string(),
            })
            .collect();
        assert_eq!(top_k_per_class(&ranked, 2), vec!["r0", "r1", "r2"]);
    }
}
