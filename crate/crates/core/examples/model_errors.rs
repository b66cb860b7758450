//! Ranks model-only tracks most implausible first to surface ghost
//! predictions.
//!
//! cargo run --release --example model_errors

use loa::datagen::{generate, GeneratorConfig};
use loa::dists::{fit_from_scenes, FitConfig};
use loa::engine::{rank, Application, RankOptions};
use loa::features::FeatureRegistry;

fn main() {
    let registry = FeatureRegistry::builtin();
    let app = Application::ModelErrors;
    let train: Vec<_> = (101..=105)
        .map(|seed| generate(&GeneratorConfig { seed, ..Default::default() }).unwrap().scene)
        .collect();
    let model = fit_from_scenes(&train, &registry.select(app.default_features()).unwrap(), &FitConfig::default()).unwrap();

    let mut config = GeneratorConfig { seed: 3, ..Default::default() };
    config.errors.ghost_rate = 0.1;
    let target = generate(&config).unwrap();
    let report = rank(std::slice::from_ref(&target.scene), &model, &registry, app, &RankOptions::default()).unwrap();
    for (i, e) in report.entries.iter().take(10).enumerate() {
        let worst = e
            .breakdown
            .iter()
            .min_by(|a, b| a.aof_value.total_cmp(&b.aof_value))
            .map(|f| format!("{} = {:.2}", f.feature, f.value))
            .unwrap_or_default();
        let hit = if target.truth.ghost_track.contains(&e.id) { "ghost" } else { "" };
        println!("{:>2} {:>8.4} {:<11} {:<28} {:<20} {hit}", i + 1, e.score, e.class_key, e.id, worst);
    }
}
