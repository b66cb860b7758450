//! Feature distributions: fitting, evaluation and the persisted model.
//!
//! Learned families report densities; [`FittedDistribution::plausibility`]
//! divides by the modal density so that every family yields a value in
//! `[PLAUSIBILITY_FLOOR, 1]`. The transform is monotone per distribution, so
//! it changes absolute scores but never the order of values within one
//! feature. Manual tables are taken as plausibilities directly.

mod kde;
mod model;

pub use kde::{fit_kde, quantile_subsample, silverman_bandwidth, Kde, MIN_BANDWIDTH};
pub use model::{
    fit_from_scenes, load_model, save_model, DistKey, FeatureInfo, FitConfig, FitMetadata, FittedModel,
    MODEL_FORMAT, MODEL_VERSION,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest plausibility a distribution can return. Exact zeros only come
/// from gating objective functions.
pub const PLAUSIBILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("too few samples to fit: {count} (need at least {min})")]
    TooFewSamples { count: usize, min: usize },
    #[error("feature `{feature}` has too few samples: {count} (need at least {min})")]
    UnderFit {
        feature: String,
        count: usize,
        min: usize,
    },
    #[error("bandwidth must be positive and finite, got {0}")]
    Bandwidth(f64),
    #[error("non-finite sample {0}")]
    NonFiniteSample(f64),
    #[error("feature `{0}` produced no values in the training scenes")]
    NoValues(String),
    #[error("bernoulli feature `{feature}` produced non-binary value {value}")]
    NonBinary { feature: String, value: f64 },
    #[error("no scenes to fit")]
    NoScenes,
    #[error("feature `{0}`: {1}")]
    Feature(String, crate::features::FeatureError),
    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: String, expected: u32 },
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("model i/o: {0}")]
    Io(String),
}

/// Keys within this relative tolerance of a table entry match it.
const KEY_TOLERANCE: f64 = 1e-9;

fn key_matches(key: f64, x: f64) -> bool {
    (key - x).abs() <= KEY_TOLERANCE * key.abs().max(1.0)
}

/// User-specified value to probability map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualTable {
    pub entries: Vec<(f64, f64)>,
    pub default: f64,
}

impl ManualTable {
    pub fn new(entries: Vec<(f64, f64)>, default: f64) -> Self {
        ManualTable { entries, default }
    }

    /// Same probability for every value.
    pub fn constant(p: f64) -> Self {
        Self::new(Vec::new(), p)
    }

    pub fn lookup(&self, x: f64) -> f64 {
        self.entries
            .iter()
            .find(|(k, _)| key_matches(*k, x))
            .map_or(self.default, |&(_, p)| p)
    }

    fn check(&self) -> Result<(), DistError> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.default) || self.entries.iter().any(|&(k, p)| !k.is_finite() || !ok(p)) {
            return Err(DistError::Malformed(
                "manual probabilities must lie in [0, 1] with finite keys".into(),
            ));
        }
        Ok(())
    }
}

/// Empirical probabilities over discrete values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    pub entries: Vec<(f64, f64)>,
    /// Density returned for values outside the table.
    pub floor: f64,
}

impl ProbabilityTable {
    /// Relative frequencies of `values`, sorted by value.
    pub fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut entries: Vec<(f64, f64)> = Vec::new();
        for v in sorted {
            match entries.last_mut() {
                Some((k, c)) if *k == v => *c += 1.0,
                _ => entries.push((v, 1.0)),
            }
        }
        for e in &mut entries {
            e.1 /= n;
        }
        ProbabilityTable {
            entries,
            floor: PLAUSIBILITY_FLOOR,
        }
    }

    pub fn probability(&self, x: f64) -> f64 {
        self.find(x).unwrap_or(self.floor)
    }

    fn find(&self, x: f64) -> Option<f64> {
        self.entries.iter().find(|(k, _)| key_matches(*k, x)).map(|e| e.1)
    }

    pub fn modal(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(0.0, f64::max)
    }

    fn check(&self) -> Result<(), DistError> {
        let total: f64 = self.entries.iter().map(|e| e.1).sum();
        if self.entries.is_empty() || (total - 1.0).abs() > 1e-9 || self.entries.iter().any(|e| e.1 < 0.0) {
            return Err(DistError::Malformed(format!(
                "probability table must be non-empty and sum to 1, sums to {total}"
            )));
        }
        Ok(())
    }
}

/// Distribution family a feature is fitted with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionFamily {
    Kde,
    Categorical,
    Bernoulli,
    Manual(ManualTable),
}

impl DistributionFamily {
    pub fn is_learned(&self) -> bool {
        !matches!(self, DistributionFamily::Manual(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistributionFamily::Kde => "kde",
            DistributionFamily::Categorical => "categorical",
            DistributionFamily::Bernoulli => "bernoulli",
            DistributionFamily::Manual(_) => "manual",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution {
    Kde(Kde),
    Categorical(ProbabilityTable),
    Bernoulli(ProbabilityTable),
    Manual(ManualTable),
}

/// A fitted (or manually specified) feature distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedDistribution {
    /// Number of feature values the fit saw.
    pub sample_count: usize,
    pub distribution: Distribution,
}

impl FittedDistribution {
    pub fn kde(kde: Kde, sample_count: usize) -> Self {
        FittedDistribution {
            sample_count,
            distribution: Distribution::Kde(kde),
        }
    }

    pub fn manual(table: ManualTable) -> Self {
        FittedDistribution {
            sample_count: 0,
            distribution: Distribution::Manual(table),
        }
    }

    pub fn categorical(values: &[f64]) -> Self {
        FittedDistribution {
            sample_count: values.len(),
            distribution: Distribution::Categorical(ProbabilityTable::from_values(values)),
        }
    }

    pub fn bernoulli(table: ProbabilityTable, sample_count: usize) -> Self {
        FittedDistribution {
            sample_count,
            distribution: Distribution::Bernoulli(table),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self.distribution {
            Distribution::Kde(_) => "kde",
            Distribution::Categorical(_) => "categorical",
            Distribution::Bernoulli(_) => "bernoulli",
            Distribution::Manual(_) => "manual",
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match &self.distribution {
            Distribution::Kde(k) => k.density(x),
            Distribution::Categorical(t) | Distribution::Bernoulli(t) => t.probability(x),
            Distribution::Manual(m) => m.lookup(x),
        }
    }

    /// Normalizer for [`FittedDistribution::plausibility`].
    pub fn modal_density(&self) -> f64 {
        match &self.distribution {
            Distribution::Kde(k) => k.modal_density(),
            Distribution::Categorical(t) | Distribution::Bernoulli(t) => t.modal(),
            Distribution::Manual(_) => 1.0,
        }
    }

    /// Density relative to the mode, clamped to `[PLAUSIBILITY_FLOOR, 1]`.
    pub fn plausibility(&self, x: f64) -> f64 {
        let density = match &self.distribution {
            Distribution::Categorical(t) | Distribution::Bernoulli(t) => match t.find(x) {
                Some(p) => p,
                None => return PLAUSIBILITY_FLOOR,
            },
            _ => self.density(x),
        };
        let ratio = density / self.modal_density();
        if ratio.is_nan() {
            return PLAUSIBILITY_FLOOR;
        }
        ratio.clamp(PLAUSIBILITY_FLOOR, 1.0)
    }

    pub fn check(&self) -> Result<(), DistError> {
        match &self.distribution {
            Distribution::Kde(k) => k.check(),
            Distribution::Categorical(t) | Distribution::Bernoulli(t) => t.check(),
            Distribution::Manual(m) => m.check(),
        }
    }
}
