use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::config::{ClassProfile, ConfigError, GeneratorConfig};
use super::rng::SimRng;
use crate::geometry::Box3D;
use crate::scene::{Observation, Scene, Source};

pub const TRUTH_FORMAT: &str = "loa-truth";
pub const TRUTH_VERSION: u32 = 1;

/// Injected errors of one generated scene, by component id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroundTruthErrors {
    pub scene_id: String,
    /// Model-only tracks of objects whose human labels were dropped.
    pub missing_track: BTreeSet<String>,
    /// Model-only bundles, inside human tracks, at frames where the human
    /// box was dropped.
    pub missing_observation: BTreeSet<String>,
    /// Tracks made mostly of ghost predictions.
    pub ghost_track: BTreeSet<String>,
    /// Every track id in the scene.
    pub track_ids: BTreeSet<String>,
    /// Every bundle id in the scene.
    pub bundle_ids: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Origin {
    Object(usize),
    Ghost(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub scene: Scene,
    pub truth: GroundTruthErrors,
}

pub fn scene_id_for(seed: u64) -> String {
    format!("synth-{seed:06}")
}

fn shaped_box(rng: &mut SimRng, center: [f64; 3], dims: [f64; 3], center_noise: f64, extent_noise: f64, yaw: f64) -> Box3D {
    let mut c = center;
    for v in &mut c {
        *v += rng.normal(0.0, center_noise);
    }
    let mut d = dims;
    for v in &mut d {
        *v = (*v * (1.0 + rng.normal(0.0, extent_noise))).max(0.05 * *v);
    }
    Box3D::new(c, d, yaw).expect("generated box is valid")
}

fn scaled_dims(class: &ClassProfile, volume: f64) -> [f64; 3] {
    let nominal: f64 = class.dims.iter().product();
    let s = (volume / nominal).cbrt();
    class.dims.map(|d| d * s)
}

/// Simulates one scene and derives its ground truth.
///
/// Objects move at constant speed along x, one lane each. Ghost tracks are
/// model-only boxes scattered around an anchor between lanes with jittered
/// volumes. Truth is read off the associated tracks: a model-only track is a
/// missing track when most of its observations come from an object whose
/// human labels were dropped, and a ghost track when most come from a ghost.
pub fn generate(config: &GeneratorConfig) -> Result<Generated, ConfigError> {
    config.validate()?;
    let mut rng = SimRng::new(config.seed);
    let scene_id = scene_id_for(config.seed);
    let frames = config.frame_count;
    let period = config.frame_period;
    let weights: Vec<f64> = config.classes.iter().map(|c| c.weight).collect();
    let sensor = &config.sensor;
    let errors = &config.errors;
    let model_src = Source::model(sensor.model_source.clone());
    let human_src = Source::human(sensor.human_source.clone());

    let mut observations = Vec::new();
    let mut origin: BTreeMap<String, Origin> = BTreeMap::new();
    let mut track_dropped = Vec::with_capacity(config.object_count);
    let mut box_dropped: BTreeSet<(usize, usize)> = BTreeSet::new();
    let lane_y = |i: usize| (i as f64 - (config.object_count as f64 - 1.0) / 2.0) * config.lane_spacing;

    for obj in 0..config.object_count {
        let class = &config.classes[rng.weighted(&weights)];
        let volume = rng.normal(class.volume_mean, class.volume_std).max(0.2 * class.volume_mean);
        let speed = rng.normal(class.speed_mean, class.speed_std).max(0.0);
        let forward = rng.bernoulli(0.5);
        let start = rng.int(0, frames - config.min_lifetime);
        let end = rng.int(start + config.min_lifetime - 1, frames - 1);
        let x0 = rng.range(-60.0, 60.0);
        let dropped = rng.bernoulli(errors.human_track_drop);
        track_dropped.push(dropped);

        let dims = scaled_dims(class, volume);
        let (dir, yaw) = if forward { (1.0, 0.0) } else { (-1.0, PI) };
        for f in start..=end {
            let t = (f - start) as f64 * period;
            let center = [x0 + dir * speed * t, lane_y(obj), dims[2] / 2.0];
            let ts = f as f64 * period;
            let detected = rng.bernoulli(sensor.model_detection_prob);
            let mbox = shaped_box(&mut rng, center, dims, sensor.model_center_noise, sensor.model_extent_noise, yaw);
            let conf = rng.range(sensor.confidence_min, sensor.confidence_max);
            if detected {
                let id = format!("{scene_id}-o{obj:03}-f{f:03}-m");
                origin.insert(id.clone(), Origin::Object(obj));
                observations.push(
                    Observation::model(id, f, &class.name, mbox, conf)
                        .with_source(model_src.clone())
                        .with_scene(&scene_id)
                        .with_timestamp(ts),
                );
            }
            let box_drop = rng.bernoulli(errors.human_box_drop);
            let hbox = shaped_box(&mut rng, center, dims, sensor.human_center_noise, sensor.human_extent_noise, yaw);
            if dropped {
                continue;
            }
            if box_drop {
                box_dropped.insert((obj, f));
                continue;
            }
            let id = format!("{scene_id}-o{obj:03}-f{f:03}-h");
            origin.insert(id.clone(), Origin::Object(obj));
            observations.push(
                Observation::human(id, f, &class.name, hbox)
                    .with_source(human_src.clone())
                    .with_scene(&scene_id)
                    .with_timestamp(ts),
            );
        }
    }

    let ghosts = rng.binomial(config.object_count, errors.ghost_rate);
    for g in 0..ghosts {
        let class = &config.classes[rng.weighted(&weights)];
        let len = rng.int(errors.ghost_min_frames, errors.ghost_max_frames).min(frames);
        let start = rng.int(0, frames - len);
        let lane = rng.int(0, config.object_count.max(1) - 1);
        let anchor = [rng.range(-60.0, 60.0), lane_y(lane) + config.lane_spacing / 2.0];
        for f in start..start + len {
            let jitter = rng.range(-errors.ghost_volume_jitter, errors.ghost_volume_jitter);
            let dims = scaled_dims(class, class.volume_mean * (1.0 + jitter));
            let center = [
                anchor[0] + rng.normal(0.0, errors.ghost_jump_std),
                anchor[1] + rng.normal(0.0, errors.ghost_jump_std),
                dims[2] / 2.0,
            ];
            let yaw = rng.range(-PI, PI);
            let conf = rng.range(errors.ghost_confidence_min, errors.ghost_confidence_max);
            let gbox = Box3D::new(center, dims, yaw).expect("generated box is valid");
            let id = format!("{scene_id}-g{g:02}-f{f:03}-m");
            origin.insert(id.clone(), Origin::Ghost(g));
            observations.push(
                Observation::model(id, f, &class.name, gbox, conf)
                    .with_source(model_src.clone())
                    .with_scene(&scene_id)
                    .with_timestamp(f as f64 * period),
            );
        }
    }

    let timestamps = (0..frames).map(|f| f as f64 * period).collect();
    let class_set = config.classes.iter().map(|c| c.name.clone()).collect();
    let scene = Scene::associate(&scene_id, timestamps, class_set, observations, &config.association)
        .expect("generated observations satisfy association preconditions")
        .with_ego_positions(vec![[0.0; 3]; frames]);

    let mut truth = GroundTruthErrors {
        scene_id: scene_id.clone(),
        ..Default::default()
    };
    for track in scene.tracks() {
        truth.track_ids.insert(track.id().to_string());
        truth.bundle_ids.extend(track.bundles().iter().map(|b| b.id().to_string()));
        if !track.has_human() {
            let mut counts: BTreeMap<Origin, usize> = BTreeMap::new();
            for o in track.observations() {
                *counts.entry(origin[&o.id]).or_default() += 1;
            }
            // max count, ties to the smaller origin
            let (&majority, _) = counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
                .expect("tracks are non-empty");
            match majority {
                Origin::Object(i) if track_dropped[i] => {
                    truth.missing_track.insert(track.id().to_string());
                }
                Origin::Ghost(_) => {
                    truth.ghost_track.insert(track.id().to_string());
                }
                Origin::Object(_) => {}
            }
            continue;
        }
        for b in track.bundles() {
            if !b.is_model_only() {
                continue;
            }
            if let Origin::Object(i) = origin[&b.representative().id] {
                if box_dropped.contains(&(i, b.frame_index())) {
                    truth.missing_observation.insert(b.id().to_string());
                }
            }
        }
    }
    Ok(Generated { scene, truth })
}
