use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::AssociationConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("config parse error: {0}")]
    Parse(String),
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Per-class object statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassProfile {
    pub name: String,
    /// Relative frequency in the object mix.
    pub weight: f64,
    /// Box shape (length, width, height); rescaled to the sampled volume.
    pub dims: [f64; 3],
    pub volume_mean: f64,
    pub volume_std: f64,
    /// m/s
    pub speed_mean: f64,
    pub speed_std: f64,
}

impl ClassProfile {
    fn new(name: &str, weight: f64, dims: [f64; 3], volume: (f64, f64), speed: (f64, f64)) -> Self {
        ClassProfile {
            name: name.into(),
            weight,
            dims,
            volume_mean: volume.0,
            volume_std: volume.1,
            speed_mean: speed.0,
            speed_std: speed.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub model_source: String,
    pub human_source: String,
    /// Per-frame probability the model detects an object.
    pub model_detection_prob: f64,
    /// Center noise std, meters.
    pub model_center_noise: f64,
    /// Relative extent noise std.
    pub model_extent_noise: f64,
    pub human_center_noise: f64,
    pub human_extent_noise: f64,
    pub confidence_min: f64,
    pub confidence_max: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            model_source: "lidar".into(),
            human_source: "vendor".into(),
            model_detection_prob: 0.98,
            model_center_noise: 0.03,
            model_extent_noise: 0.02,
            human_center_noise: 0.02,
            human_extent_noise: 0.01,
            confidence_min: 0.55,
            confidence_max: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorConfig {
    /// Probability that an object gets no human labels at all.
    pub human_track_drop: f64,
    /// Per-frame probability a human box is missing from a labeled object.
    pub human_box_drop: f64,
    /// Expected ghost tracks per real object.
    pub ghost_rate: f64,
    /// Ghost volumes are the class mean times `1 + U(-j, j)`.
    pub ghost_volume_jitter: f64,
    /// Std of each ghost box's offset from its anchor, meters.
    pub ghost_jump_std: f64,
    pub ghost_min_frames: usize,
    pub ghost_max_frames: usize,
    pub ghost_confidence_min: f64,
    pub ghost_confidence_max: f64,
}

impl Default for ErrorConfig {
    fn default() -> Self {
        ErrorConfig {
            human_track_drop: 0.1,
            human_box_drop: 0.02,
            ghost_rate: 0.05,
            ghost_volume_jitter: 0.6,
            ghost_jump_std: 3.0,
            ghost_min_frames: 3,
            ghost_max_frames: 12,
            ghost_confidence_min: 0.3,
            ghost_confidence_max: 0.9,
        }
    }
}

impl ErrorConfig {
    /// No injected errors.
    pub fn none() -> Self {
        ErrorConfig {
            human_track_drop: 0.0,
            human_box_drop: 0.0,
            ghost_rate: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Scenes written by `synth`; scene `i` uses seed `seed + i`.
    pub scene_count: usize,
    pub frame_count: usize,
    /// Seconds between frames.
    pub frame_period: f64,
    pub object_count: usize,
    /// Lateral distance between the lanes objects travel in, meters.
    pub lane_spacing: f64,
    /// Shortest object lifetime, frames.
    pub min_lifetime: usize,
    pub classes: Vec<ClassProfile>,
    pub sensor: SensorConfig,
    pub errors: ErrorConfig,
    pub association: AssociationConfig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            scene_count: 1,
            frame_count: 150,
            frame_period: 0.1,
            object_count: 40,
            lane_spacing: 5.0,
            min_lifetime: 20,
            classes: vec![
                ClassProfile::new("car", 0.5, [4.5, 1.9, 1.6], (9.0, 0.5), (4.0, 1.0)),
                ClassProfile::new("truck", 0.2, [8.0, 2.8, 2.0], (45.0, 3.0), (3.5, 1.0)),
                ClassProfile::new("pedestrian", 0.15, [0.7, 0.7, 1.75], (0.85, 0.08), (0.8, 0.2)),
                ClassProfile::new("motorcycle", 0.15, [2.2, 0.9, 1.3], (2.5, 0.25), (2.5, 0.6)),
            ],
            sensor: SensorConfig::default(),
            errors: ErrorConfig::default(),
            association: AssociationConfig {
                iou_threshold: 0.5,
                max_gap: 2,
            },
        }
    }
}

const UNSIGNED_KEYS: [&str; 8] = [
    "seed",
    "scene_count",
    "frame_count",
    "object_count",
    "min_lifetime",
    "errors.ghost_min_frames",
    "errors.ghost_max_frames",
    "association.max_gap",
];

fn lookup<'a>(table: &'a toml::Table, path: &str) -> Option<&'a toml::Value> {
    let mut parts = path.split('.');
    let mut v = table.get(parts.next()?)?;
    for p in parts {
        v = v.as_table()?.get(p)?;
    }
    Some(v)
}

impl GeneratorConfig {
    /// Parses TOML, naming the offending key on any invalid value.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for key in UNSIGNED_KEYS {
            if let Some(toml::Value::Integer(n)) = lookup(&table, key) {
                if *n < 0 {
                    return Err(invalid(key, format!("must be non-negative, got {n}")));
                }
            }
        }
        let config: GeneratorConfig = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("generator config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let prob = |key: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(invalid(key, format!("probability must lie in [0, 1], got {p}")))
            }
        };
        let nonneg = |key: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(key, format!("must be non-negative and finite, got {v}")))
            }
        };
        if !(self.frame_period > 0.0 && self.frame_period.is_finite()) {
            return Err(invalid("frame_period", format!("must be positive, got {}", self.frame_period)));
        }
        if self.frame_count == 0 {
            return Err(invalid("frame_count", "must be at least 1"));
        }
        if self.min_lifetime == 0 || self.min_lifetime > self.frame_count {
            return Err(invalid(
                "min_lifetime",
                format!("must lie in 1..={} (frame_count)", self.frame_count),
            ));
        }
        nonneg("lane_spacing", self.lane_spacing)?;
        if self.classes.is_empty() {
            return Err(invalid("classes", "at least one class is required"));
        }
        for (i, c) in self.classes.iter().enumerate() {
            let key = |f: &str| format!("classes[{i}].{f}");
            if c.name.is_empty() {
                return Err(invalid(key("name"), "must be non-empty"));
            }
            nonneg(&key("weight"), c.weight)?;
            nonneg(&key("volume_std"), c.volume_std)?;
            nonneg(&key("speed_std"), c.speed_std)?;
            nonneg(&key("speed_mean"), c.speed_mean)?;
            if !(c.volume_mean > 0.0) {
                return Err(invalid(key("volume_mean"), "must be positive"));
            }
            if c.dims.iter().any(|d| !(*d > 0.0)) {
                return Err(invalid(key("dims"), "extents must be positive"));
            }
        }
        if self.classes.iter().all(|c| c.weight == 0.0) {
            return Err(invalid("classes", "at least one class needs positive weight"));
        }
        let s = &self.sensor;
        prob("sensor.model_detection_prob", s.model_detection_prob)?;
        nonneg("sensor.model_center_noise", s.model_center_noise)?;
        nonneg("sensor.model_extent_noise", s.model_extent_noise)?;
        nonneg("sensor.human_center_noise", s.human_center_noise)?;
        nonneg("sensor.human_extent_noise", s.human_extent_noise)?;
        prob("sensor.confidence_min", s.confidence_min)?;
        prob("sensor.confidence_max", s.confidence_max)?;
        if s.confidence_min > s.confidence_max {
            return Err(invalid("sensor.confidence_min", "must not exceed sensor.confidence_max"));
        }
        if s.model_source == s.human_source {
            return Err(invalid("sensor.human_source", "must differ from sensor.model_source"));
        }
        let e = &self.errors;
        prob("errors.human_track_drop", e.human_track_drop)?;
        prob("errors.human_box_drop", e.human_box_drop)?;
        prob("errors.ghost_rate", e.ghost_rate)?;
        nonneg("errors.ghost_volume_jitter", e.ghost_volume_jitter)?;
        if e.ghost_volume_jitter >= 1.0 {
            return Err(invalid("errors.ghost_volume_jitter", "must be below 1"));
        }
        nonneg("errors.ghost_jump_std", e.ghost_jump_std)?;
        prob("errors.ghost_confidence_min", e.ghost_confidence_min)?;
        prob("errors.ghost_confidence_max", e.ghost_confidence_max)?;
        if e.ghost_confidence_min > e.ghost_confidence_max {
            return Err(invalid("errors.ghost_confidence_min", "must not exceed errors.ghost_confidence_max"));
        }
        if e.ghost_min_frames == 0 || e.ghost_min_frames > e.ghost_max_frames {
            return Err(invalid("errors.ghost_min_frames", "must lie in 1..=errors.ghost_max_frames"));
        }
        self.association
            .check()
            .map_err(|err| invalid("association", err.to_string()))
    }
}
