use serde::{Deserialize, Serialize};

use crate::dists::FitConfig;
use crate::engine::{Application, Normalization};
use crate::features::{FeatureRegistry, BUILTIN_NAMES};
use crate::scene::AssociationConfig;

use super::CliError;

/// Uncertainty-sampling baseline parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintyConfig {
    pub threshold: f64,
    pub band: f64,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        UncertaintyConfig {
            threshold: 0.5,
            band: 0.1,
        }
    }
}

/// Settings shared by `fit`, `rank` and `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Application preset, in either spelling.
    pub app: Option<String>,
    /// Features fitted by `fit`.
    pub fit_features: Vec<String>,
    /// Overrides the preset's features in `rank`.
    pub features: Option<Vec<String>>,
    pub normalization: Normalization,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub fit: FitConfig,
    pub association: AssociationConfig,
    pub uncertainty: UncertaintyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            app: None,
            fit_features: BUILTIN_NAMES.iter().map(|s| s.to_string()).collect(),
            features: None,
            normalization: Normalization::default(),
            k: None,
            seed: None,
            fit: FitConfig::default(),
            association: AssociationConfig::default(),
            uncertainty: UncertaintyConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate(&FeatureRegistry::builtin())?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Checks feature names against `registry` and the numeric settings.
    pub fn validate(&self, registry: &FeatureRegistry) -> Result<(), CliError> {
        let names = self.fit_features.iter().map(|n| ("fit_features", n));
        let names = names.chain(self.features.iter().flatten().map(|n| ("features", n)));
        for (key, name) in names {
            if registry.get(name).is_none() {
                return Err(CliError::Config(format!("`{key}` names unknown feature `{name}`")));
            }
        }
        if let Some(app) = &self.app {
            app.parse::<Application>()
                .map_err(|_| CliError::Config(format!("`app`: unknown application `{app}`")))?;
        }
        if self.k == Some(0) {
            return Err(CliError::Config("`k` must be at least 1".into()));
        }
        if self.fit.min_samples == 0 {
            return Err(CliError::Config("`fit.min_samples` must be at least 1".into()));
        }
        for (name, bw) in &self.fit.bandwidth_overrides {
            if !(*bw > 0.0 && bw.is_finite()) {
                return Err(CliError::Config(format!("`fit.bandwidth_overrides.{name}` must be positive")));
            }
        }
        if !(self.uncertainty.band >= 0.0) {
            return Err(CliError::Config("`uncertainty.band` must be non-negative".into()));
        }
        self.association
            .check()
            .map_err(|e| CliError::Config(format!("`association`: {e}")))
    }
}
