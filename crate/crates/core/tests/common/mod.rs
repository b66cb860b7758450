//! Fixtures and a brute-force scorer shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;

use loa::datagen::{generate, ErrorConfig, Generated, GeneratorConfig, SimRng};
use loa::dists::{fit_from_scenes, DistKey, FitConfig, FittedDistribution, FittedModel, ManualTable, PLAUSIBILITY_FLOOR};
use loa::engine::{Application, Normalization};
use loa::features::{
    feature_distance, feature_model_only, feature_track_count, feature_velocity, feature_volume, FeatureRegistry,
    BUILTIN_NAMES,
};
use loa::geometry::Box3D;
use loa::scene::{Observation, ObservationBundle, Scene, Track};

/// The two-frame truck track and its hand-written tables.
pub fn worked_scene() -> Scene {
    let a = Box3D::axis_aligned([0.0, 0.0, 1.0], [8.0, 2.8, 2.0]).unwrap();
    let b = Box3D::axis_aligned([2.0, 0.0, 1.0], [8.5, 2.7, 2.0]).unwrap();
    let track = Track::new(vec![
        ObservationBundle::singleton(Observation::model("t0", 0, "truck", a, 0.9).with_scene("worked").with_timestamp(1.0)),
        ObservationBundle::singleton(Observation::model("t1", 1, "truck", b, 0.9).with_scene("worked").with_timestamp(2.0)),
    ])
    .unwrap();
    Scene::new("worked", vec![1.0, 2.0], vec!["truck".into()], vec![track])
}

pub fn worked_model() -> FittedModel {
    let mut m = FittedModel::default();
    m.insert(
        DistKey::pooled("volume"),
        FittedDistribution::manual(ManualTable::new(vec![(44.8, 0.37), (45.9, 0.39)], 1.0)),
    );
    m.insert(DistKey::pooled("velocity"), FittedDistribution::manual(ManualTable::new(vec![(2.0, 0.21)], 1.0)));
    m
}

pub fn worked_expected() -> f64 {
    (0.37f64.ln() + 0.39f64.ln() + 0.21f64.ln()) / 3.0
}

/// A small corrupted scene with at most `max_obs` observations.
pub fn random_scene(seed: u64, max_obs: usize) -> Generated {
    let mut rng = SimRng::new(seed ^ 0x5eed);
    let frame_count = rng.int(4, 16);
    let mut object_count = rng.int(1, 6);
    loop {
        let config = GeneratorConfig {
            seed,
            frame_count,
            object_count,
            min_lifetime: rng.int(2, frame_count),
            errors: ErrorConfig {
                human_track_drop: 0.3,
                human_box_drop: 0.15,
                ghost_rate: 0.3,
                ghost_min_frames: 1,
                ghost_max_frames: 6,
                ..ErrorConfig::default()
            },
            ..GeneratorConfig::default()
        };
        let g = generate(&config).expect("test config is valid");
        if g.scene.observation_count() <= max_obs || object_count == 1 {
            return g;
        }
        object_count -= 1;
    }
}

/// A model over every built-in feature, fitted on a few default-like scenes.
pub fn small_model() -> FittedModel {
    let scenes: Vec<Scene> = (900..904)
        .map(|seed| {
            generate(&GeneratorConfig {
                seed,
                frame_count: 40,
                object_count: 16,
                ..GeneratorConfig::default()
            })
            .unwrap()
            .scene
        })
        .collect();
    let specs = FeatureRegistry::builtin().select(&BUILTIN_NAMES).unwrap();
    fit_from_scenes(&scenes, &specs, &FitConfig { min_samples: 5, ..FitConfig::default() }).unwrap()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleEntry {
    pub scene_id: String,
    pub id: String,
    pub first_frame: usize,
    pub class_key: String,
    pub score: f64,
}

fn p(model: &FittedModel, feature: &str, class: Option<&str>, x: f64) -> f64 {
    model
        .lookup(feature, class)
        .unwrap_or_else(|| panic!("no distribution for {feature}"))
        .plausibility(x)
}

fn complement(p: f64) -> f64 {
    (1.0 - p).clamp(PLAUSIBILITY_FLOOR, 1.0)
}

fn mean(terms: Vec<(f64, usize)>, norm: Normalization) -> f64 {
    let mut logs: Vec<f64> = match norm {
        Normalization::PerFactor => terms.iter().map(|t| t.0.ln()).collect(),
        Normalization::PerEdge => terms.iter().flat_map(|t| std::iter::repeat_n(t.0.ln(), t.1)).collect(),
    };
    let n = logs.len();
    logs.sort_by(f64::total_cmp);
    logs.into_iter().fold(0.0, |a, b| a + b) / n as f64
}

fn speed(scene: &Scene, a: &ObservationBundle, b: &ObservationBundle) -> f64 {
    let ta = scene.frame_timestamps[a.frame_index()];
    let tb = scene.frame_timestamps[b.frame_index()];
    feature_velocity(a, b, ta, tb).unwrap()
}

/// Scores every candidate of `app` by direct enumeration of the features
/// touching it, with each preset's gates written out by hand, and sorts
/// like a report.
///
/// Each term is `(aof value, edges to the component)`.
pub fn oracle_rank(scenes: &[Scene], model: &FittedModel, app: Application, norm: Normalization) -> Vec<OracleEntry> {
    let mut out = Vec::new();
    for scene in scenes {
        for track in scene.tracks() {
            let class = track.majority_class();
            let bundles = track.bundles();
            match app {
                Application::MissingTracks => {
                    if track.has_human() || track.observation_count() <= 2 {
                        continue;
                    }
                    let mut terms = Vec::new();
                    for b in bundles {
                        for o in b.members() {
                            terms.push((p(model, "volume", Some(&o.class_label), feature_volume(o)), 1));
                            terms.push((p(model, "distance", None, feature_distance(o, scene.ego_at(o.frame_index))), 1));
                        }
                        terms.push((p(model, "model_only", None, feature_model_only(b)), b.len()));
                    }
                    for w in bundles.windows(2) {
                        terms.push((p(model, "velocity", Some(class), speed(scene, &w[0], &w[1])), w[0].len() + w[1].len()));
                    }
                    terms.push((p(model, "count", None, feature_track_count(track)), track.observation_count()));
                    out.push(entry(scene, track.id(), track.first_frame(), class, mean(terms, norm)));
                }
                Application::ModelErrors => {
                    if track.has_human() {
                        continue;
                    }
                    let mut terms = Vec::new();
                    for o in track.observations() {
                        terms.push((complement(p(model, "volume", Some(&o.class_label), feature_volume(o))), 1));
                    }
                    for w in bundles.windows(2) {
                        let v = p(model, "velocity", Some(class), speed(scene, &w[0], &w[1]));
                        terms.push((complement(v), w[0].len() + w[1].len()));
                    }
                    out.push(entry(scene, track.id(), track.first_frame(), class, mean(terms, norm)));
                }
                Application::MissingObservations => {
                    if !track.has_human() {
                        continue;
                    }
                    for (i, b) in bundles.iter().enumerate() {
                        if b.has_human() {
                            continue;
                        }
                        let mut terms = Vec::new();
                        for o in b.members() {
                            terms.push((p(model, "volume", Some(&o.class_label), feature_volume(o)), 1));
                            terms.push((p(model, "distance", None, feature_distance(o, scene.ego_at(o.frame_index))), 1));
                        }
                        terms.push((p(model, "model_only", None, feature_model_only(b)), b.len()));
                        let bclass = b.majority_class();
                        if i > 0 {
                            terms.push((p(model, "velocity", Some(class), speed(scene, &bundles[i - 1], b)), b.len()));
                        }
                        if i + 1 < bundles.len() {
                            terms.push((p(model, "velocity", Some(class), speed(scene, b, &bundles[i + 1])), b.len()));
                        }
                        out.push(entry(scene, b.id(), b.frame_index(), bclass, mean(terms, norm)));
                    }
                }
            }
        }
    }
    out.sort_by(oracle_order);
    out
}

fn entry(scene: &Scene, id: &str, first_frame: usize, class: &str, score: f64) -> OracleEntry {
    OracleEntry {
        scene_id: scene.scene_id.clone(),
        id: id.to_string(),
        first_frame,
        class_key: class.to_string(),
        score,
    }
}

fn oracle_order(a: &OracleEntry, b: &OracleEntry) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.scene_id.cmp(&b.scene_id))
        .then_with(|| a.first_frame.cmp(&b.first_frame))
        .then_with(|| a.id.cmp(&b.id))
}

/// Standard normal draws.
pub fn normal_samples(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = SimRng::new(seed);
    (0..n).map(|_| rng.standard_normal()).collect()
}

/// Trapezoidal integral of `f` over `[lo, hi]` with `n` intervals.
pub fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let inner: f64 = (1..n).map(|i| f(lo + i as f64 * h)).sum();
    h * (0.5 * (f(lo) + f(hi)) + inner)
}

/// Gaussian KDE density written out term by term.
pub fn kde_by_hand(samples: &[f64], h: f64, x: f64) -> f64 {
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h * samples.len() as f64);
    samples.iter().map(|s| (-0.5 * ((x - s) / h).powi(2)).exp()).sum::<f64>() * norm
}
