//! Scene data model: observations, bundles, tracks and scenes.
//!
//! Bundle members and scene tracks are kept in a canonical order (members by
//! id, tracks by first frame then id) so that equal content compares equal
//! regardless of how it was assembled.

mod association;
mod validate;

pub use association::{bundle_frame, build_tracks, AssociationConfig};
pub use validate::{validate_scene, Diagnostic, Severity};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Box3D;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("observation `{id}`: confidence {value} outside [0, 1]")]
    Confidence { id: String, value: f64 },
    #[error("observation `{id}`: {kind} observations must have confidence 1.0, got {value}")]
    FixedConfidence {
        id: String,
        kind: SourceKind,
        value: f64,
    },
    #[error("observation `{id}`: timestamp {value} is not finite")]
    Timestamp { id: String, value: f64 },
    #[error("observation `{id}`: empty class label")]
    EmptyClass { id: String },
    #[error("bundle has no members")]
    EmptyBundle,
    #[error("bundle mixes frames {0} and {1}")]
    MixedFrames(usize, usize),
    #[error("bundle has two members from source `{0}`")]
    DuplicateSource(String),
    #[error("track has no bundles")]
    EmptyTrack,
    #[error("track frames must strictly increase, got {prev} then {next}")]
    NonIncreasingFrames { prev: usize, next: usize },
    #[error("track gap of {gap} frames exceeds max gap {max_gap}")]
    GapTooLarge { gap: usize, max_gap: usize },
    #[error("iou threshold must lie in (0, 1], got {0}")]
    Threshold(f64),
    #[error("max gap must be at least 1")]
    MaxGap,
}

/// Provenance class of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Model,
    Human,
    Auditor,
}

impl SourceKind {
    /// Human labelers and expert auditors both count as human proposals.
    pub fn is_human(self) -> bool {
        matches!(self, SourceKind::Human | SourceKind::Auditor)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Model => "model",
            SourceKind::Human => "human",
            SourceKind::Auditor => "auditor",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Source {
    pub kind: SourceKind,
    pub name: String,
}

impl Source {
    pub fn new(kind: SourceKind, name: impl Into<String>) -> Self {
        Source {
            kind,
            name: name.into(),
        }
    }

    pub fn model(name: impl Into<String>) -> Self {
        Self::new(SourceKind::Model, name)
    }

    pub fn human(name: impl Into<String>) -> Self {
        Self::new(SourceKind::Human, name)
    }
}

/// One box from one source at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub id: String,
    pub scene_id: String,
    pub frame_index: usize,
    pub timestamp: f64,
    pub source: Source,
    pub class_label: String,
    pub bbox: Box3D,
    pub confidence: f64,
}

impl Observation {
    /// A model prediction from source `lidar`.
    pub fn model(
        id: impl Into<String>,
        frame_index: usize,
        class_label: impl Into<String>,
        bbox: Box3D,
        confidence: f64,
    ) -> Self {
        Observation {
            id: id.into(),
            scene_id: String::new(),
            frame_index,
            timestamp: 0.0,
            source: Source::model("lidar"),
            class_label: class_label.into(),
            bbox,
            confidence,
        }
    }

    /// A human label from source `vendor`.
    pub fn human(
        id: impl Into<String>,
        frame_index: usize,
        class_label: impl Into<String>,
        bbox: Box3D,
    ) -> Self {
        Observation {
            source: Source::human("vendor"),
            confidence: 1.0,
            ..Self::model(id, frame_index, class_label, bbox, 1.0)
        }
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    pub fn with_scene(mut self, scene_id: impl Into<String>) -> Self {
        self.scene_id = scene_id.into();
        self
    }

    pub fn with_timestamp(mut self, timestamp: f64) -> Self {
        self.timestamp = timestamp;
        self
    }

    pub fn is_human(&self) -> bool {
        self.source.kind.is_human()
    }

    pub fn check(&self) -> Result<(), SceneError> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(SceneError::Confidence {
                id: self.id.clone(),
                value: self.confidence,
            });
        }
        if self.is_human() && self.confidence != 1.0 {
            return Err(SceneError::FixedConfidence {
                id: self.id.clone(),
                kind: self.source.kind,
                value: self.confidence,
            });
        }
        if !self.timestamp.is_finite() {
            return Err(SceneError::Timestamp {
                id: self.id.clone(),
                value: self.timestamp,
            });
        }
        if self.class_label.is_empty() {
            return Err(SceneError::EmptyClass {
                id: self.id.clone(),
            });
        }
        Ok(())
    }
}

/// Orders by confidence, then human before auditor before model, then
/// smaller id. The maximum under this order anchors a bundle.
fn representative_rank(o: &Observation) -> (f64, u8, std::cmp::Reverse<&str>) {
    let kind = match o.source.kind {
        SourceKind::Human => 2,
        SourceKind::Auditor => 1,
        SourceKind::Model => 0,
    };
    (o.confidence, kind, std::cmp::Reverse(o.id.as_str()))
}

/// Observations of one object from distinct sources within one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBundle {
    frame_index: usize,
    members: Vec<Observation>,
}

impl ObservationBundle {
    pub fn new(mut members: Vec<Observation>) -> Result<Self, SceneError> {
        let first = members.first().ok_or(SceneError::EmptyBundle)?;
        let frame_index = first.frame_index;
        if let Some(o) = members.iter().find(|o| o.frame_index != frame_index) {
            return Err(SceneError::MixedFrames(frame_index, o.frame_index));
        }
        members.sort_by(|a, b| a.id.cmp(&b.id));
        let mut names: Vec<&str> = members.iter().map(|o| o.source.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(SceneError::DuplicateSource(w[0].to_string()));
        }
        Ok(ObservationBundle {
            frame_index,
            members,
        })
    }

    pub fn singleton(obs: Observation) -> Self {
        ObservationBundle {
            frame_index: obs.frame_index,
            members: vec![obs],
        }
    }

    /// Smallest member id.
    pub fn id(&self) -> &str {
        &self.members[0].id
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn members(&self) -> &[Observation] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn representative(&self) -> &Observation {
        self.members
            .iter()
            .max_by(|a, b| {
                let (ca, ka, ia) = representative_rank(a);
                let (cb, kb, ib) = representative_rank(b);
                ca.total_cmp(&cb).then(ka.cmp(&kb)).then(ia.cmp(&ib))
            })
            .expect("bundle is non-empty")
    }

    pub fn has_human(&self) -> bool {
        self.members.iter().any(Observation::is_human)
    }

    pub fn is_model_only(&self) -> bool {
        !self.has_human()
    }

    pub fn majority_class(&self) -> &str {
        majority_class(self.members.iter())
    }
}

/// Most frequent class label; ties go to the lexicographically smallest.
pub fn majority_class<'a>(observations: impl Iterator<Item = &'a Observation>) -> &'a str {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for o in observations {
        *counts.entry(o.class_label.as_str()).or_default() += 1;
    }
    let mut best = ("", 0usize);
    for (class, n) in counts {
        if n > best.1 {
            best = (class, n);
        }
    }
    best.0
}

/// Bundles of one object ordered by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    bundles: Vec<ObservationBundle>,
}

impl Track {
    pub fn new(bundles: Vec<ObservationBundle>) -> Result<Self, SceneError> {
        if bundles.is_empty() {
            return Err(SceneError::EmptyTrack);
        }
        for w in bundles.windows(2) {
            if w[1].frame_index <= w[0].frame_index {
                return Err(SceneError::NonIncreasingFrames {
                    prev: w[0].frame_index,
                    next: w[1].frame_index,
                });
            }
        }
        Ok(Track { bundles })
    }

    /// Like [`Track::new`], additionally enforcing the association gap limit.
    pub fn with_max_gap(bundles: Vec<ObservationBundle>, max_gap: usize) -> Result<Self, SceneError> {
        let track = Self::new(bundles)?;
        for w in track.bundles.windows(2) {
            let gap = w[1].frame_index - w[0].frame_index;
            if gap > max_gap {
                return Err(SceneError::GapTooLarge { gap, max_gap });
            }
        }
        Ok(track)
    }

    /// Id of the first bundle.
    pub fn id(&self) -> &str {
        self.bundles[0].id()
    }

    pub fn bundles(&self) -> &[ObservationBundle] {
        &self.bundles
    }

    pub fn first_frame(&self) -> usize {
        self.bundles[0].frame_index
    }

    pub fn last_frame(&self) -> usize {
        self.bundles[self.bundles.len() - 1].frame_index
    }

    pub fn observations(&self) -> impl Iterator<Item = &Observation> {
        self.bundles.iter().flat_map(|b| b.members.iter())
    }

    pub fn observation_count(&self) -> usize {
        self.bundles.iter().map(ObservationBundle::len).sum()
    }

    pub fn has_human(&self) -> bool {
        self.bundles.iter().any(ObservationBundle::has_human)
    }

    pub fn majority_class(&self) -> &str {
        majority_class(self.observations())
    }
}

/// One recording: frame clock, ego poses and the tracks observed in it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scene_id: String,
    pub frame_timestamps: Vec<f64>,
    pub ego_positions: Option<Vec<[f64; 3]>>,
    pub class_set: Vec<String>,
    tracks: Vec<Track>,
}

impl Scene {
    pub fn new(
        scene_id: impl Into<String>,
        frame_timestamps: Vec<f64>,
        class_set: Vec<String>,
        mut tracks: Vec<Track>,
    ) -> Self {
        sort_tracks(&mut tracks);
        Scene {
            scene_id: scene_id.into(),
            frame_timestamps,
            ego_positions: None,
            class_set,
            tracks,
        }
    }

    /// Bundles each frame and links bundles into tracks.
    pub fn associate(
        scene_id: impl Into<String>,
        frame_timestamps: Vec<f64>,
        class_set: Vec<String>,
        observations: Vec<Observation>,
        config: &AssociationConfig,
    ) -> Result<Self, SceneError> {
        let mut by_frame: BTreeMap<usize, Vec<Observation>> = BTreeMap::new();
        for o in observations {
            by_frame.entry(o.frame_index).or_default().push(o);
        }
        let mut bundles = Vec::new();
        for (_, frame) in by_frame {
            bundles.extend(bundle_frame(frame, config.iou_threshold)?);
        }
        let tracks = build_tracks(bundles, config)?;
        Ok(Self::new(scene_id, frame_timestamps, class_set, tracks))
    }

    pub fn with_ego_positions(mut self, ego: Vec<[f64; 3]>) -> Self {
        self.ego_positions = Some(ego);
        self
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn frame_count(&self) -> usize {
        self.frame_timestamps.len()
    }

    /// Ego position at `frame`, defaulting to the origin.
    pub fn ego_at(&self, frame: usize) -> [f64; 3] {
        self.ego_positions
            .as_ref()
            .and_then(|e| e.get(frame).copied())
            .unwrap_or([0.0; 3])
    }

    pub fn timestamp(&self, frame: usize) -> Option<f64> {
        self.frame_timestamps.get(frame).copied()
    }

    pub fn observations(&self) -> impl Iterator<Item = &Observation> {
        self.tracks.iter().flat_map(Track::observations)
    }

    pub fn observation_count(&self) -> usize {
        self.tracks.iter().map(Track::observation_count).sum()
    }

    pub fn bundles(&self) -> impl Iterator<Item = &ObservationBundle> {
        self.tracks.iter().flat_map(|t| t.bundles.iter())
    }
}

pub(crate) fn sort_tracks(tracks: &mut [Track]) {
    tracks.sort_by(|a, b| {
        a.first_frame()
            .cmp(&b.first_frame())
            .then_with(|| a.id().cmp(b.id()))
    });
}
