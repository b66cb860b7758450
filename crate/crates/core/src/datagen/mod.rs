//! Seeded synthetic scenes with injected label and model errors, and the
//! ranking metrics used to score reports against them.

mod config;
mod generate;
pub mod metrics;
mod rng;

pub use config::{ClassProfile, ConfigError, ErrorConfig, GeneratorConfig, SensorConfig};
pub use generate::{generate, scene_id_for, Generated, GroundTruthErrors, TRUTH_FORMAT, TRUTH_VERSION};
pub use metrics::{evaluate_rankings, precision_at_k, recall_at_k, BatchMetrics, MetricError, Ranked, TruthKind};
pub use rng::SimRng;
