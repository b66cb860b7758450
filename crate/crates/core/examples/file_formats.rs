//! Writes a scene, its truth and a report to line-delimited text and reads
//! them back.
//!
//! cargo run --release --example file_formats

use loa::cli::{read_report, read_scene, read_truth, write_report, write_scene, write_truth};
use loa::datagen::{generate, GeneratorConfig};
use loa::dists::{fit_from_scenes, FitConfig, FittedModel};
use loa::engine::{rank, Application, RankOptions};
use loa::features::FeatureRegistry;

fn main() {
    let config = GeneratorConfig {
        seed: 5,
        frame_count: 30,
        object_count: 10,
        ..Default::default()
    };
    let g = generate(&config).unwrap();

    let text = write_scene(&g.scene);
    let parsed = read_scene(&text, &config.association).unwrap();
    assert_eq!(parsed.scene, g.scene);
    println!("scene: {} lines, {} bytes", text.lines().count(), text.len());
    println!("{}", text.lines().next().unwrap());
    println!("{}", text.lines().nth(1).unwrap());

    let truth = write_truth(&g.truth);
    assert_eq!(read_truth(&truth).unwrap(), g.truth);

    let registry = FeatureRegistry::builtin();
    let app = Application::MissingTracks;
    let model = fit_from_scenes(
        std::slice::from_ref(&g.scene),
        &registry.select(app.default_features()).unwrap(),
        &FitConfig { min_samples: 5, ..Default::default() },
    )
    .unwrap();
    let json = model.to_json();
    assert_eq!(FittedModel::from_json(&json).unwrap(), model);
    println!("model: {} entries, hash {}", model.entries.len(), &model.hash()[..16]);

    let report = rank(std::slice::from_ref(&g.scene), &model, &registry, app, &RankOptions::default()).unwrap();
    let lines = write_report(&report);
    assert_eq!(read_report(&lines).unwrap(), report);
    println!("report: {}", lines.lines().next().unwrap());
}
