use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{fit_kde, quantile_subsample, DistError, DistributionFamily, FittedDistribution, ProbabilityTable};
use crate::features::{for_each_element, FeatureKind, FeatureSpec};
use crate::scene::Scene;

pub const MODEL_FORMAT: &str = "loa-model";
pub const MODEL_VERSION: u32 = 1;

/// Feature name plus class key; `class == None` is the pooled entry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DistKey {
    pub feature: String,
    pub class: Option<String>,
}

impl DistKey {
    pub fn pooled(feature: impl Into<String>) -> Self {
        DistKey {
            feature: feature.into(),
            class: None,
        }
    }

    pub fn class(feature: impl Into<String>, class: impl Into<String>) -> Self {
        DistKey {
            feature: feature.into(),
            class: Some(class.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub min_samples: usize,
    /// KDE sample cap; larger sample sets are reduced to evenly spaced
    /// order statistics. 0 keeps everything.
    pub max_kde_samples: usize,
    pub bandwidth_overrides: BTreeMap<String, f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            min_samples: 20,
            max_kde_samples: 2000,
            bandwidth_overrides: BTreeMap::new(),
        }
    }
}

/// Description of one feature the model was fitted for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub kind: FeatureKind,
    pub class_conditional: bool,
    pub family: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitMetadata {
    pub scene_count: usize,
    /// sha256 of the fit configuration and feature list.
    pub config_hash: String,
    pub features: Vec<FeatureInfo>,
    /// Classes that fell back to the pooled entry, by feature.
    pub fallback_classes: BTreeMap<String, Vec<String>>,
}

/// Fitted distributions keyed by feature and class.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FittedModel {
    pub entries: BTreeMap<DistKey, FittedDistribution>,
    pub metadata: FitMetadata,
}

#[derive(Serialize, Deserialize)]
struct ModelEntry {
    feature: String,
    class: Option<String>,
    #[serde(flatten)]
    dist: FittedDistribution,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    metadata: FitMetadata,
    entries: Vec<ModelEntry>,
}

impl FittedModel {
    pub fn insert(&mut self, key: DistKey, dist: FittedDistribution) {
        self.entries.insert(key, dist);
    }

    /// Exact entry for `(feature, class)`.
    pub fn get(&self, feature: &str, class: Option<&str>) -> Option<&FittedDistribution> {
        self.entries.get(&DistKey {
            feature: feature.to_string(),
            class: class.map(str::to_string),
        })
    }

    /// Class entry if fitted, otherwise the pooled entry.
    pub fn lookup(&self, feature: &str, class: Option<&str>) -> Option<&FittedDistribution> {
        class
            .and_then(|c| self.get(feature, Some(c)))
            .or_else(|| self.get(feature, None))
    }

    pub fn has_feature(&self, feature: &str) -> bool {
        self.get(feature, None).is_some()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            metadata: self.metadata.clone(),
            entries: self
                .entries
                .iter()
                .map(|(k, d)| ModelEntry {
                    feature: k.feature.clone(),
                    class: k.class.clone(),
                    dist: d.clone(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, DistError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| DistError::Malformed(e.to_string()))?;
        match value.get("format").and_then(|f| f.as_str()) {
            Some(MODEL_FORMAT) => {}
            other => {
                return Err(DistError::Malformed(format!(
                    "expected format `{MODEL_FORMAT}`, found {other:?}"
                )))
            }
        }
        match value.get("version") {
            Some(v) if v.as_u64() == Some(MODEL_VERSION as u64) => {}
            v => {
                return Err(DistError::Version {
                    found: v.map_or("none".to_string(), |v| v.to_string()),
                    expected: MODEL_VERSION,
                })
            }
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| DistError::Malformed(e.to_string()))?;
        let mut model = FittedModel {
            entries: BTreeMap::new(),
            metadata: file.metadata,
        };
        for e in file.entries {
            e.dist
                .check()
                .map_err(|err| DistError::Malformed(format!("entry `{}`: {err}", e.feature)))?;
            let key = DistKey {
                feature: e.feature,
                class: e.class,
            };
            if model.entries.insert(key.clone(), e.dist).is_some() {
                return Err(DistError::Malformed(format!("duplicate entry {key:?}")));
            }
        }
        Ok(model)
    }

    /// sha256 of the serialized model, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

pub fn save_model(model: &FittedModel, path: impl AsRef<Path>) -> Result<(), DistError> {
    let path = path.as_ref();
    fs::write(path, model.to_json()).map_err(|e| DistError::Io(format!("{}: {e}", path.display())))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FittedModel, DistError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DistError::Io(format!("{}: {e}", path.display())))?;
    FittedModel::from_json(&text)
}

fn config_hash(config: &FitConfig, features: &[FeatureInfo]) -> String {
    let blob = serde_json::to_string(&(config, features)).expect("config serializes");
    hex::encode(Sha256::digest(blob.as_bytes()))
}

fn fit_family(
    spec: &FeatureSpec,
    values: &[f64],
    config: &FitConfig,
) -> Result<FittedDistribution, DistError> {
    if values.len() < config.min_samples.max(1) {
        return Err(DistError::UnderFit {
            feature: spec.name.clone(),
            count: values.len(),
            min: config.min_samples.max(1),
        });
    }
    match &spec.family {
        DistributionFamily::Kde => {
            let kept = quantile_subsample(values, config.max_kde_samples);
            let bandwidth = config.bandwidth_overrides.get(&spec.name).copied();
            let kde = fit_kde(&kept, bandwidth, 1)?;
            Ok(FittedDistribution::kde(kde, values.len()))
        }
        DistributionFamily::Categorical => Ok(FittedDistribution::categorical(values)),
        DistributionFamily::Bernoulli => {
            if let Some(&v) = values.iter().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(DistError::NonBinary {
                    feature: spec.name.clone(),
                    value: v,
                });
            }
            Ok(FittedDistribution::bernoulli(ProbabilityTable::from_values(values), values.len()))
        }
        DistributionFamily::Manual(t) => Ok(FittedDistribution::manual(t.clone())),
    }
}

/// Extracts every feature over `scenes` and fits one distribution per
/// feature, plus one per class for class-conditional features.
///
/// Class-conditional features always get a pooled entry as well; classes
/// with fewer than `min_samples` values are served by it and listed in
/// `metadata.fallback_classes`. Manual features are stored as given.
pub fn fit_from_scenes(
    scenes: &[Scene],
    specs: &[FeatureSpec],
    config: &FitConfig,
) -> Result<FittedModel, DistError> {
    if scenes.is_empty() {
        return Err(DistError::NoScenes);
    }
    let features: Vec<FeatureInfo> = specs
        .iter()
        .map(|s| FeatureInfo {
            name: s.name.clone(),
            kind: s.kind(),
            class_conditional: s.class_conditional,
            family: s.family.name().to_string(),
        })
        .collect();
    let mut model = FittedModel {
        entries: BTreeMap::new(),
        metadata: FitMetadata {
            scene_count: scenes.len(),
            config_hash: config_hash(config, &features),
            features,
            fallback_classes: BTreeMap::new(),
        },
    };

    for spec in specs {
        if let DistributionFamily::Manual(t) = &spec.family {
            model.insert(DistKey::pooled(&spec.name), FittedDistribution::manual(t.clone()));
            continue;
        }
        let mut pooled = Vec::new();
        let mut by_class: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for scene in scenes {
            for_each_element(scene, spec.kind(), |el| {
                let v = spec
                    .extract(&el, scene)
                    .map_err(|e| DistError::Feature(spec.name.clone(), e))?;
                pooled.push(v);
                if let Some(c) = spec.class_key(&el) {
                    by_class.entry(c.to_string()).or_default().push(v);
                }
                Ok::<_, DistError>(())
            })?;
        }
        if pooled.is_empty() {
            return Err(DistError::NoValues(spec.name.clone()));
        }
        model.insert(DistKey::pooled(&spec.name), fit_family(spec, &pooled, config)?);
        let mut fallback = Vec::new();
        for (class, values) in by_class {
            if values.len() < config.min_samples {
                fallback.push(class);
                continue;
            }
            model.insert(DistKey::class(&spec.name, class), fit_family(spec, &values, config)?);
        }
        if !fallback.is_empty() {
            model.metadata.fallback_classes.insert(spec.name.clone(), fallback);
        }
    }
    Ok(model)
}
