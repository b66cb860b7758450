//! Finds single frames a human labeler skipped inside an otherwise labeled
//! track.
//!
//! cargo run --release --example missing_observations

use loa::datagen::{generate, GeneratorConfig};
use loa::dists::{fit_from_scenes, FitConfig};
use loa::engine::{rank, Application, RankOptions};
use loa::features::FeatureRegistry;

fn main() {
    let registry = FeatureRegistry::builtin();
    let app = Application::MissingObservations;
    let train: Vec<_> = (101..=105)
        .map(|seed| generate(&GeneratorConfig { seed, ..Default::default() }).unwrap().scene)
        .collect();
    let model = fit_from_scenes(&train, &registry.select(app.default_features()).unwrap(), &FitConfig::default()).unwrap();

    let mut config = GeneratorConfig { seed: 2, ..Default::default() };
    config.errors.human_box_drop = 0.05;
    let target = generate(&config).unwrap();
    let report = rank(std::slice::from_ref(&target.scene), &model, &registry, app, &RankOptions::default()).unwrap();
    println!("{} bundles ranked of {}", report.len(), report.candidate_count);
    for (i, e) in report.entries.iter().take(10).enumerate() {
        let hit = if target.truth.missing_observation.contains(&e.id) { "dropped" } else { "" };
        println!("{:>2} {:>8.4} {:<11} {:<28} {hit}", i + 1, e.score, e.class_key, e.id);
    }
}
