//! Adds a learned box aspect-ratio feature and a hand-written AOF plan, then
//! ranks with them.
//!
//! cargo run --release --example custom_feature

use loa::datagen::{generate, GeneratorConfig};
use loa::dists::{fit_from_scenes, FitConfig};
use loa::engine::{rank_with, Aof, AofPlan, ComponentKind, Predicate, RankOptions, Selector};
use loa::features::{Element, FeatureRegistry, FeatureSpec};

fn main() {
    let mut registry = FeatureRegistry::builtin();
    registry.register(
        FeatureSpec::observation("aspect", |o, _| Ok(o.bbox.length() / o.bbox.width())).class_conditional(true),
    );
    let specs = registry.select(&["aspect", "volume"]).unwrap();

    let train: Vec<_> = (101..=103)
        .map(|seed| generate(&GeneratorConfig { seed, ..Default::default() }).unwrap().scene)
        .collect();
    let model = fit_from_scenes(&train, &specs, &FitConfig::default()).unwrap();

    // Model-only tracks of ten frames or more, least plausible shapes first.
    let short = Predicate::custom(|el: &Element<'_>| el.track().is_some_and(|t| t.bundles().len() < 10));
    let plan = AofPlan::new()
        .with(Selector::All, Aof::ZeroIf(Predicate::TrackHasHuman))
        .with(Selector::All, Aof::ZeroIf(short))
        .with(Selector::Feature("aspect".into()), Aof::Complement)
        .with(Selector::Feature("volume".into()), Aof::map(|p| p.sqrt()));

    let scene = generate(&GeneratorConfig { seed: 9, ..Default::default() }).unwrap();
    let report = rank_with(
        "long_odd_shapes",
        std::slice::from_ref(&scene.scene),
        &model,
        &specs,
        &plan,
        ComponentKind::Track,
        &RankOptions::default(),
    )
    .unwrap();
    println!("{} of {} tracks pass the gates", report.len(), report.candidate_count);
    for e in report.entries.iter().take(5) {
        println!("{:>8.4} {:<11} {}", e.score, e.class_key, e.id);
    }
}
