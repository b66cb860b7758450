//! Finds objects the human labels missed entirely.
//!
//! cargo run --release --example missing_tracks

use loa::datagen::{generate, GeneratorConfig};
use loa::dists::{fit_from_scenes, FitConfig};
use loa::engine::{rank, Application, RankOptions};
use loa::features::FeatureRegistry;

fn main() {
    let registry = FeatureRegistry::builtin();
    let app = Application::MissingTracks;
    let train: Vec<_> = (101..=105)
        .map(|seed| generate(&GeneratorConfig { seed, ..Default::default() }).unwrap().scene)
        .collect();
    let specs = registry.select(app.default_features()).unwrap();
    let model = fit_from_scenes(&train, &specs, &FitConfig::default()).unwrap();

    let target = generate(&GeneratorConfig { seed: 1, ..Default::default() }).unwrap();
    let report = rank(std::slice::from_ref(&target.scene), &model, &registry, app, &RankOptions::default()).unwrap();
    println!("{} ranked, {} excluded", report.len(), report.excluded_count);
    for (i, e) in report.entries.iter().take(10).enumerate() {
        let hit = if target.truth.missing_track.contains(&e.id) { "missing" } else { "" };
        println!("{:>2} {:>8.4} {:<11} {:<28} {hit}", i + 1, e.score, e.class_key, e.id);
    }
    println!("injected missing tracks: {}", target.truth.missing_track.len());
}
