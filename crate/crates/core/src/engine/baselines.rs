//! Hand-written model assertions used as baselines.

use std::collections::{BTreeMap, BTreeSet};

use super::{Application, ComponentKind};
use crate::datagen::SimRng;
use crate::geometry::iou3d;
use crate::scene::{Observation, Scene, Track};

/// Pairwise IOU above which two boxes count as overlapping for `multibox`.
pub const MULTIBOX_IOU: f64 = 0.1;

/// Track ids flagged by each assertion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BaselineFlags {
    pub appear: BTreeSet<String>,
    pub flicker: BTreeSet<String>,
    pub multibox: BTreeSet<String>,
    pub consistency: BTreeSet<String>,
}

impl BaselineFlags {
    /// Union of `appear`, `flicker` and `multibox`.
    pub fn any_ma(&self) -> BTreeSet<String> {
        self.appear
            .iter()
            .chain(&self.flicker)
            .chain(&self.multibox)
            .cloned()
            .collect()
    }
}

fn frame_index(scene: &Scene) -> BTreeMap<usize, Vec<(&Observation, &str)>> {
    let mut by_frame: BTreeMap<usize, Vec<(&Observation, &str)>> = BTreeMap::new();
    for t in scene.tracks() {
        for o in t.observations() {
            by_frame.entry(o.frame_index).or_default().push((o, t.id()));
        }
    }
    by_frame
}

/// Short tracks (at most two bundles) with nothing overlapping them in the
/// frame before they start or the frame after they end.
pub fn appear(scene: &Scene) -> BTreeSet<String> {
    let by_frame = frame_index(scene);
    let overlapped = |t: &Track, frame: Option<usize>, anchor: &Observation| {
        frame.and_then(|f| by_frame.get(&f)).is_some_and(|obs| {
            obs.iter()
                .any(|(o, tid)| *tid != t.id() && iou3d(&o.bbox, &anchor.bbox) > 0.0)
        })
    };
    scene
        .tracks()
        .iter()
        .filter(|t| t.bundles().len() <= 2)
        .filter(|t| {
            let first = t.bundles().first().unwrap().representative();
            let last = t.bundles().last().unwrap().representative();
            !overlapped(t, t.first_frame().checked_sub(1), first) && !overlapped(t, Some(t.last_frame() + 1), last)
        })
        .map(|t| t.id().to_string())
        .collect()
}

/// Whether present frames contain a 1-0-1 pattern.
pub fn flickers(track: &Track) -> bool {
    track
        .bundles()
        .windows(2)
        .any(|w| w[1].frame_index() - w[0].frame_index() == 2)
}

pub fn flicker(scene: &Scene) -> BTreeSet<String> {
    scene
        .tracks()
        .iter()
        .filter(|t| flickers(t))
        .map(|t| t.id().to_string())
        .collect()
}

/// Frames with three mutually overlapping boxes, as `(frame, [ids])`.
pub fn multibox_triples(scene: &Scene) -> Vec<(usize, [String; 3])> {
    let mut out = Vec::new();
    for (frame, obs) in frame_index(scene) {
        let mut obs = obs;
        obs.sort_by(|a, b| a.0.id.cmp(&b.0.id));
        let n = obs.len();
        let overlap: Vec<Vec<bool>> = (0..n)
            .map(|i| (0..n).map(|j| i != j && iou3d(&obs[i].0.bbox, &obs[j].0.bbox) > MULTIBOX_IOU).collect())
            .collect();
        for i in 0..n {
            for j in i + 1..n {
                if !overlap[i][j] {
                    continue;
                }
                for k in j + 1..n {
                    if overlap[i][k] && overlap[j][k] {
                        out.push((frame, [obs[i].0.id.clone(), obs[j].0.id.clone(), obs[k].0.id.clone()]));
                    }
                }
            }
        }
    }
    out
}

/// Tracks containing any observation of a `multibox` triple.
pub fn multibox(scene: &Scene) -> BTreeSet<String> {
    let owner: BTreeMap<&str, &str> = scene
        .tracks()
        .iter()
        .flat_map(|t| t.observations().map(move |o| (o.id.as_str(), t.id())))
        .collect();
    multibox_triples(scene)
        .iter()
        .flat_map(|(_, ids)| ids.iter().map(|id| owner[id.as_str()].to_string()))
        .collect()
}

/// Model-only tracks: predictions no human label agrees with.
pub fn consistency(scene: &Scene) -> BTreeSet<String> {
    scene
        .tracks()
        .iter()
        .filter(|t| !t.has_human())
        .map(|t| t.id().to_string())
        .collect()
}

pub fn baseline_mas(scene: &Scene) -> BaselineFlags {
    BaselineFlags {
        appear: appear(scene),
        flicker: flicker(scene),
        multibox: multibox(scene),
        consistency: consistency(scene),
    }
}

/// Model observations with `|confidence - threshold| <= band`, closest first.
pub fn uncertainty_sample<'a>(scenes: &'a [Scene], threshold: f64, band: f64) -> Vec<&'a Observation> {
    let mut out: Vec<&Observation> = scenes
        .iter()
        .flat_map(|s| s.observations())
        .filter(|o| !o.is_human() && (o.confidence - threshold).abs() <= band + 1e-12)
        .collect();
    out.sort_by(|a, b| {
        let da = (a.confidence - threshold).abs();
        let db = (b.confidence - threshold).abs();
        da.total_cmp(&db).then_with(|| a.scene_id.cmp(&b.scene_id)).then_with(|| a.id.cmp(&b.id))
    });
    out
}

/// Mean model confidence of a track, 0 when it has no model observations.
pub fn track_confidence(track: &Track) -> f64 {
    let (sum, n) = track
        .observations()
        .filter(|o| !o.is_human())
        .fold((0.0, 0usize), |(s, n), o| (s + o.confidence, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Order in which baseline candidates are listed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaOrder {
    /// Seeded shuffle of the id-sorted candidates.
    Random(u64),
    /// Mean model confidence, highest first.
    Confidence,
}

/// Candidates an ad-hoc baseline proposes for `application`, as
/// `(id, class)` in `order`.
///
/// Missing tracks use the consistency assertion, missing observations list
/// model-only bundles of human tracks, and model errors use the union of
/// `appear`, `flicker` and `multibox`.
pub fn ma_ranking(scene: &Scene, application: Application, order: MaOrder) -> Vec<(String, String)> {
    let mut items: Vec<(String, String, f64)> = match application {
        Application::MissingTracks => {
            let flagged = consistency(scene);
            tracks_in(scene, &flagged)
        }
        Application::ModelErrors => {
            let flagged = baseline_mas(scene).any_ma();
            tracks_in(scene, &flagged)
        }
        Application::MissingObservations => scene
            .tracks()
            .iter()
            .filter(|t| t.has_human())
            .flat_map(|t| t.bundles())
            .filter(|b| b.is_model_only())
            .map(|b| (b.id().to_string(), b.majority_class().to_string(), b.representative().confidence))
            .collect(),
    };
    items.sort_by(|a, b| a.0.cmp(&b.0));
    match order {
        MaOrder::Random(seed) => SimRng::new(seed).shuffle(&mut items),
        MaOrder::Confidence => items.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0))),
    }
    items.into_iter().map(|(id, class, _)| (id, class)).collect()
}

fn tracks_in(scene: &Scene, ids: &BTreeSet<String>) -> Vec<(String, String, f64)> {
    scene
        .tracks()
        .iter()
        .filter(|t| ids.contains(t.id()))
        .map(|t| (t.id().to_string(), t.majority_class().to_string(), track_confidence(t)))
        .collect()
}

/// Components containing the observations picked by uncertainty sampling,
/// in order of first pick.
pub fn uncertainty_ranking(scene: &Scene, target: ComponentKind, threshold: f64, band: f64) -> Vec<(String, String)> {
    let mut owner: BTreeMap<&str, (String, String)> = BTreeMap::new();
    for t in scene.tracks() {
        for b in t.bundles() {
            for o in b.members() {
                let entry = match target {
                    ComponentKind::Track => (t.id().to_string(), t.majority_class().to_string()),
                    ComponentKind::Bundle => (b.id().to_string(), b.majority_class().to_string()),
                    ComponentKind::Observation => (o.id.clone(), o.class_label.clone()),
                };
                owner.insert(o.id.as_str(), entry);
            }
        }
    }
    let mut seen = BTreeSet::new();
    let scenes = std::slice::from_ref(scene);
    uncertainty_sample(scenes, threshold, band)
        .into_iter()
        .map(|o| owner[o.id.as_str()].clone())
        .filter(|(id, _)| seen.insert(id.clone()))
        .collect()
}
