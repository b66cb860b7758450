//! Generates a training and an evaluation batch, fits a model on the first,
//! ranks missing tracks in the second and compares against the baselines.
//!
//! cargo run --release --example synth_and_eval

use std::collections::BTreeMap;

use loa::datagen::{evaluate_rankings, generate, GeneratorConfig, Ranked, TruthKind};
use loa::dists::{fit_from_scenes, FitConfig};
use loa::engine::baselines::{ma_ranking, MaOrder};
use loa::engine::{rank, Application, RankOptions};
use loa::features::FeatureRegistry;

fn batch(seeds: impl Iterator<Item = u64>) -> Vec<loa::datagen::Generated> {
    seeds
        .map(|seed| generate(&GeneratorConfig { seed, ..Default::default() }).expect("default config is valid"))
        .collect()
}

fn main() {
    let registry = FeatureRegistry::builtin();
    let app = Application::MissingTracks;
    let train = batch(101..=120);
    let eval = batch(1..=20);

    let specs = registry.select(app.default_features()).unwrap();
    let train_scenes: Vec<_> = train.iter().map(|g| g.scene.clone()).collect();
    let model = fit_from_scenes(&train_scenes, &specs, &FitConfig::default()).unwrap();

    let scenes: Vec<_> = eval.iter().map(|g| g.scene.clone()).collect();
    let truths: Vec<_> = eval.iter().map(|g| g.truth.clone()).collect();
    let report = rank(&scenes, &model, &registry, app, &RankOptions::default()).unwrap();
    let engine = evaluate_rankings(&loa::datagen::metrics::rankings_by_scene(&report), &truths, TruthKind::MissingTrack, 10).unwrap();

    let baseline = |order: MaOrder| {
        let rankings: BTreeMap<String, Vec<Ranked>> = scenes
            .iter()
            .map(|s| {
                let ranked = ma_ranking(s, app, order)
                    .into_iter()
                    .map(|(id, class_key)| Ranked { id, class_key })
                    .collect();
                (s.scene_id.clone(), ranked)
            })
            .collect();
        evaluate_rankings(&rankings, &truths, TruthKind::MissingTrack, 10).unwrap()
    };
    let random = baseline(MaOrder::Random(0));
    let confidence = baseline(MaOrder::Confidence);

    println!("{} candidates, {} excluded, {} ranked", report.candidate_count, report.excluded_count, report.len());
    println!("{:<22} {:>8} {:>8}", "method", "P@10", "R@10/cls");
    for (name, m) in [("engine", &engine), ("ad-hoc MA (rand)", &random), ("ad-hoc MA (conf)", &confidence)] {
        println!("{name:<22} {:>8.3} {:>8.3}", m.precision_at_k, m.recall_per_class_at_k);
    }
    println!("missing tracks in truth: {}", engine.truth_total);
}
