use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::aof::{Aof, AofPlan, Predicate, Selector};
use super::graph::compile;
use super::score::{score_component, Component, ComponentKind, Normalization, ScoredComponent};
use super::EngineError;
use crate::dists::FittedModel;
use crate::features::{FeatureError, FeatureKind, FeatureRegistry, FeatureSpec, COUNT, DISTANCE, MODEL_ONLY, VELOCITY, VOLUME};
use crate::scene::Scene;

/// Tracks with at most this many observations are gated by the count feature.
pub const MIN_TRACK_OBSERVATIONS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Application {
    /// Consistent model-only tracks, most plausible first.
    MissingTracks,
    /// Model-only bundles inside human-labeled tracks, most plausible first.
    MissingObservations,
    /// Model-only tracks ranked by complemented plausibility, most
    /// implausible first.
    ModelErrors,
}

impl Application {
    pub const ALL: [Application; 3] = [
        Application::MissingTracks,
        Application::MissingObservations,
        Application::ModelErrors,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Application::MissingTracks => "missing_tracks",
            Application::MissingObservations => "missing_observations",
            Application::ModelErrors => "model_errors",
        }
    }

    pub fn target(&self) -> ComponentKind {
        match self {
            Application::MissingObservations => ComponentKind::Bundle,
            _ => ComponentKind::Track,
        }
    }

    pub fn default_features(&self) -> &'static [&'static str] {
        match self {
            Application::MissingTracks => &[VOLUME, DISTANCE, MODEL_ONLY, VELOCITY, COUNT],
            Application::MissingObservations => &[VOLUME, DISTANCE, MODEL_ONLY, VELOCITY],
            Application::ModelErrors => &[VOLUME, VELOCITY],
        }
    }

    /// AOFs of the preset.
    pub fn plan(&self) -> AofPlan {
        let count_gate = Aof::ZeroIf(Predicate::TrackCountAtMost(MIN_TRACK_OBSERVATIONS));
        match self {
            Application::MissingTracks => AofPlan::new()
                .with(Selector::All, Aof::ZeroIf(Predicate::TrackHasHuman))
                .with(Selector::Feature(COUNT.into()), count_gate),
            Application::MissingObservations => AofPlan::new()
                .with(Selector::All, Aof::ZeroIf(Predicate::TrackLacksHuman))
                .with(
                    Selector::Kinds(vec![FeatureKind::Observation, FeatureKind::Bundle]),
                    Aof::ZeroIf(Predicate::BundleHasHuman),
                ),
            Application::ModelErrors => AofPlan::new()
                .with(Selector::All, Aof::ZeroIf(Predicate::TrackHasHuman))
                .with(Selector::Feature(VOLUME.into()), Aof::Complement)
                .with(Selector::Feature(VELOCITY.into()), Aof::Complement),
        }
    }
}

impl fmt::Display for Application {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Application {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "missing_tracks" | "missing-tracks" => Ok(Application::MissingTracks),
            "missing_observations" | "missing-observations" | "missing-obs" | "missing_obs" => {
                Ok(Application::MissingObservations)
            }
            "model_errors" | "model-errors" => Ok(Application::ModelErrors),
            _ => Err(EngineError::UnknownApplication(s.to_string())),
        }
    }
}

pub type ScoreHook = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Clone, Default)]
pub struct RankOptions {
    pub normalization: Normalization,
    /// Overrides the preset feature list.
    pub features: Option<Vec<String>>,
    /// Applied to every component score before sorting.
    pub score_hook: Option<Arc<ScoreHook>>,
}

impl fmt::Debug for RankOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RankOptions")
            .field("normalization", &self.normalization)
            .field("features", &self.features)
            .field("score_hook", &self.score_hook.is_some())
            .finish()
    }
}

/// Ranked components of one application over a set of scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub application: String,
    pub scene_ids: Vec<String>,
    pub model_hash: String,
    /// Components considered, excluded ones included.
    pub candidate_count: usize,
    pub excluded_count: usize,
    pub entries: Vec<ScoredComponent>,
}

impl ErrorReport {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    /// The entries for one scene, in report order.
    pub fn for_scene<'a>(&'a self, scene_id: &'a str) -> impl Iterator<Item = &'a ScoredComponent> + 'a {
        self.entries.iter().filter(move |e| e.scene_id == scene_id)
    }
}

/// Report order: higher score first, then scene id, first frame and id.
pub fn report_order(a: &ScoredComponent, b: &ScoredComponent) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.scene_id.cmp(&b.scene_id))
        .then_with(|| a.first_frame.cmp(&b.first_frame))
        .then_with(|| a.id.cmp(&b.id))
}

fn components(scene: &Scene, target: ComponentKind) -> Vec<Component> {
    let mut out = Vec::new();
    for (ti, t) in scene.tracks().iter().enumerate() {
        match target {
            ComponentKind::Track => out.push(Component::Track { track: ti }),
            ComponentKind::Bundle => out.extend((0..t.bundles().len()).map(|bi| Component::Bundle { track: ti, bundle: bi })),
            ComponentKind::Observation => {
                for (bi, b) in t.bundles().iter().enumerate() {
                    out.extend((0..b.len()).map(|mi| Component::Observation {
                        track: ti,
                        bundle: bi,
                        member: mi,
                    }));
                }
            }
        }
    }
    out
}

/// Scores every `target` component of every scene under `plan` and sorts
/// the survivors. Components with a gated factor, or with no factors, are
/// dropped and counted in `excluded_count`.
pub fn rank_with(
    application: &str,
    scenes: &[Scene],
    model: &FittedModel,
    specs: &[FeatureSpec],
    plan: &AofPlan,
    target: ComponentKind,
    options: &RankOptions,
) -> Result<ErrorReport, EngineError> {
    let mut entries = Vec::new();
    let mut candidate_count = 0;
    let mut excluded_count = 0;
    for scene in scenes {
        let graph = compile(scene, model, specs, plan)?;
        for c in components(scene, target) {
            candidate_count += 1;
            let mut scored = score_component(scene, &graph, c, options.normalization);
            if scored.excluded || scored.factor_count == 0 {
                excluded_count += 1;
                continue;
            }
            if let Some(hook) = &options.score_hook {
                scored.score = hook(scored.score);
            }
            entries.push(scored);
        }
    }
    entries.sort_by(report_order);
    Ok(ErrorReport {
        application: application.to_string(),
        scene_ids: scenes.iter().map(|s| s.scene_id.clone()).collect(),
        model_hash: model.hash(),
        candidate_count,
        excluded_count,
        entries,
    })
}

/// Runs an application preset.
pub fn rank(
    scenes: &[Scene],
    model: &FittedModel,
    registry: &FeatureRegistry,
    application: Application,
    options: &RankOptions,
) -> Result<ErrorReport, EngineError> {
    let specs = match &options.features {
        Some(names) => registry.select(names),
        None => registry.select(application.default_features()),
    }
    .map_err(|e| match e {
        FeatureError::Unknown(name) => EngineError::UnknownFeature(name),
        other => EngineError::Feature(String::new(), other),
    })?;
    rank_with(
        application.name(),
        scenes,
        model,
        &specs,
        &application.plan(),
        application.target(),
        options,
    )
}
