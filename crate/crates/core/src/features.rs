//! Feature mapping over observations, bundles, transitions, tracks and
//! scenes, plus the registry of built-in features addressed by name.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dists::{DistributionFamily, ManualTable};
use crate::geometry::{center_distance, point_distance};
use crate::scene::{Observation, ObservationBundle, Scene, Track};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("transition from frame {from} to frame {to} has non-positive time step {dt}")]
    NonPositiveDt { from: usize, to: usize, dt: f64 },
    #[error("no timestamp for frame {0}")]
    MissingTimestamp(usize),
    #[error("feature `{feature}` returned non-finite value {value}")]
    NonFinite { feature: String, value: f64 },
    #[error("unknown feature `{0}`")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Observation,
    Bundle,
    Transition,
    Track,
    Scene,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FeatureKind::Observation => "observation",
            FeatureKind::Bundle => "bundle",
            FeatureKind::Transition => "transition",
            FeatureKind::Track => "track",
            FeatureKind::Scene => "scene",
        };
        f.write_str(s)
    }
}

/// A scene element a feature can be evaluated on.
#[derive(Debug, Clone, Copy)]
pub enum Element<'a> {
    Observation {
        observation: &'a Observation,
        bundle: &'a ObservationBundle,
        track: &'a Track,
    },
    Bundle {
        bundle: &'a ObservationBundle,
        track: &'a Track,
    },
    /// Two consecutive bundles of one track.
    Transition {
        from: &'a ObservationBundle,
        to: &'a ObservationBundle,
        track: &'a Track,
    },
    Track(&'a Track),
    Scene,
}

impl<'a> Element<'a> {
    pub fn kind(&self) -> FeatureKind {
        match self {
            Element::Observation { .. } => FeatureKind::Observation,
            Element::Bundle { .. } => FeatureKind::Bundle,
            Element::Transition { .. } => FeatureKind::Transition,
            Element::Track(_) => FeatureKind::Track,
            Element::Scene => FeatureKind::Scene,
        }
    }

    pub fn track(&self) -> Option<&'a Track> {
        match *self {
            Element::Observation { track, .. }
            | Element::Bundle { track, .. }
            | Element::Transition { track, .. }
            | Element::Track(track) => Some(track),
            Element::Scene => None,
        }
    }

    /// Class used to key class-conditional distributions.
    pub fn class_key(&self) -> Option<&'a str> {
        match *self {
            Element::Observation { observation, .. } => Some(&observation.class_label),
            Element::Bundle { bundle, .. } => Some(bundle.majority_class()),
            Element::Transition { track, .. } | Element::Track(track) => Some(track.majority_class()),
            Element::Scene => None,
        }
    }
}

pub type ObservationFn = dyn Fn(&Observation, &Scene) -> Result<f64, FeatureError> + Send + Sync;
pub type BundleFn = dyn Fn(&ObservationBundle, &Scene) -> Result<f64, FeatureError> + Send + Sync;
pub type TransitionFn =
    dyn Fn(&ObservationBundle, &ObservationBundle, &Scene) -> Result<f64, FeatureError> + Send + Sync;
pub type TrackFn = dyn Fn(&Track, &Scene) -> Result<f64, FeatureError> + Send + Sync;
pub type SceneFn = dyn Fn(&Scene) -> Result<f64, FeatureError> + Send + Sync;

#[derive(Clone)]
pub enum Extractor {
    Observation(Arc<ObservationFn>),
    Bundle(Arc<BundleFn>),
    Transition(Arc<TransitionFn>),
    Track(Arc<TrackFn>),
    Scene(Arc<SceneFn>),
}

impl Extractor {
    pub fn kind(&self) -> FeatureKind {
        match self {
            Extractor::Observation(_) => FeatureKind::Observation,
            Extractor::Bundle(_) => FeatureKind::Bundle,
            Extractor::Transition(_) => FeatureKind::Transition,
            Extractor::Track(_) => FeatureKind::Track,
            Extractor::Scene(_) => FeatureKind::Scene,
        }
    }
}

/// A named feature: what it is computed on, how it is computed and which
/// distribution family it is fitted with.
#[derive(Clone)]
pub struct FeatureSpec {
    pub name: String,
    pub class_conditional: bool,
    pub family: DistributionFamily,
    extractor: Extractor,
}

impl fmt::Debug for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeatureSpec")
            .field("name", &self.name)
            .field("kind", &self.kind())
            .field("class_conditional", &self.class_conditional)
            .field("family", &self.family)
            .finish()
    }
}

impl FeatureSpec {
    pub fn new(name: impl Into<String>, extractor: Extractor) -> Self {
        FeatureSpec {
            name: name.into(),
            class_conditional: false,
            family: DistributionFamily::Kde,
            extractor,
        }
    }

    pub fn observation<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&Observation, &Scene) -> Result<f64, FeatureError> + Send + Sync + 'static,
    {
        Self::new(name, Extractor::Observation(Arc::new(f)))
    }

    pub fn bundle<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&ObservationBundle, &Scene) -> Result<f64, FeatureError> + Send + Sync + 'static,
    {
        Self::new(name, Extractor::Bundle(Arc::new(f)))
    }

    pub fn transition<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&ObservationBundle, &ObservationBundle, &Scene) -> Result<f64, FeatureError>
            + Send
            + Sync
            + 'static,
    {
        Self::new(name, Extractor::Transition(Arc::new(f)))
    }

    pub fn track<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&Track, &Scene) -> Result<f64, FeatureError> + Send + Sync + 'static,
    {
        Self::new(name, Extractor::Track(Arc::new(f)))
    }

    pub fn scene<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&Scene) -> Result<f64, FeatureError> + Send + Sync + 'static,
    {
        Self::new(name, Extractor::Scene(Arc::new(f)))
    }

    pub fn class_conditional(mut self, yes: bool) -> Self {
        self.class_conditional = yes;
        self
    }

    pub fn with_family(mut self, family: DistributionFamily) -> Self {
        self.family = family;
        self
    }

    pub fn kind(&self) -> FeatureKind {
        self.extractor.kind()
    }

    /// Evaluates the feature. `element` must be of this feature's kind.
    pub fn extract(&self, element: &Element<'_>, scene: &Scene) -> Result<f64, FeatureError> {
        let value = match (&self.extractor, element) {
            (Extractor::Observation(f), Element::Observation { observation, .. }) => f(observation, scene)?,
            (Extractor::Bundle(f), Element::Bundle { bundle, .. }) => f(bundle, scene)?,
            (Extractor::Transition(f), Element::Transition { from, to, .. }) => f(from, to, scene)?,
            (Extractor::Track(f), Element::Track(track)) => f(track, scene)?,
            (Extractor::Scene(f), Element::Scene) => f(scene)?,
            _ => panic!(
                "feature `{}` of kind {} applied to a {} element",
                self.name,
                self.kind(),
                element.kind()
            ),
        };
        if !value.is_finite() {
            return Err(FeatureError::NonFinite {
                feature: self.name.clone(),
                value,
            });
        }
        Ok(value)
    }

    /// Class key for `element`, or `None` when not class-conditional.
    pub fn class_key<'a>(&self, element: &Element<'a>) -> Option<&'a str> {
        if self.class_conditional {
            element.class_key()
        } else {
            None
        }
    }
}

/// Visits every element of `kind` in `scene`, tracks in scene order and
/// bundles and members in track order.
pub fn for_each_element<'a, E>(
    scene: &'a Scene,
    kind: FeatureKind,
    mut visit: impl FnMut(Element<'a>) -> Result<(), E>,
) -> Result<(), E> {
    if kind == FeatureKind::Scene {
        return visit(Element::Scene);
    }
    for track in scene.tracks() {
        match kind {
            FeatureKind::Observation => {
                for bundle in track.bundles() {
                    for observation in bundle.members() {
                        visit(Element::Observation {
                            observation,
                            bundle,
                            track,
                        })?;
                    }
                }
            }
            FeatureKind::Bundle => {
                for bundle in track.bundles() {
                    visit(Element::Bundle { bundle, track })?;
                }
            }
            FeatureKind::Transition => {
                for w in track.bundles().windows(2) {
                    visit(Element::Transition {
                        from: &w[0],
                        to: &w[1],
                        track,
                    })?;
                }
            }
            FeatureKind::Track => visit(Element::Track(track))?,
            FeatureKind::Scene => unreachable!(),
        }
    }
    Ok(())
}

pub fn feature_volume(obs: &Observation) -> f64 {
    obs.bbox.volume()
}

pub fn feature_distance(obs: &Observation, ego: [f64; 3]) -> f64 {
    point_distance(obs.bbox.center(), ego)
}

/// Speed implied by the representative boxes of two bundles.
pub fn feature_velocity(
    from: &ObservationBundle,
    to: &ObservationBundle,
    t_from: f64,
    t_to: f64,
) -> Result<f64, FeatureError> {
    let dt = t_to - t_from;
    if !(dt > 0.0) {
        return Err(FeatureError::NonPositiveDt {
            from: from.frame_index(),
            to: to.frame_index(),
            dt,
        });
    }
    Ok(center_distance(&from.representative().bbox, &to.representative().bbox) / dt)
}

pub fn feature_model_only(bundle: &ObservationBundle) -> f64 {
    if bundle.is_model_only() {
        1.0
    } else {
        0.0
    }
}

pub fn feature_track_count(track: &Track) -> f64 {
    track.observation_count() as f64
}

/// 0 when every member carries the same class, 1 otherwise.
pub fn feature_class_agreement(bundle: &ObservationBundle) -> f64 {
    let first = &bundle.members()[0].class_label;
    if bundle.members().iter().all(|o| &o.class_label == first) {
        0.0
    } else {
        1.0
    }
}

fn frame_time(scene: &Scene, frame: usize) -> Result<f64, FeatureError> {
    scene.timestamp(frame).ok_or(FeatureError::MissingTimestamp(frame))
}

pub const VOLUME: &str = "volume";
pub const DISTANCE: &str = "distance";
pub const VELOCITY: &str = "velocity";
pub const MODEL_ONLY: &str = "model_only";
pub const COUNT: &str = "count";
pub const CLASS_AGREEMENT: &str = "class_agreement";

/// Built-in feature by name.
pub fn builtin(name: &str) -> Option<FeatureSpec> {
    let spec = match name {
        VOLUME => FeatureSpec::observation(VOLUME, |o, _| Ok(feature_volume(o))).class_conditional(true),
        DISTANCE => FeatureSpec::observation(DISTANCE, |o, s| {
            Ok(feature_distance(o, s.ego_at(o.frame_index)))
        }),
        VELOCITY => FeatureSpec::transition(VELOCITY, |a, b, s| {
            let ta = frame_time(s, a.frame_index())?;
            let tb = frame_time(s, b.frame_index())?;
            feature_velocity(a, b, ta, tb)
        })
        .class_conditional(true),
        MODEL_ONLY => FeatureSpec::bundle(MODEL_ONLY, |b, _| Ok(feature_model_only(b)))
            .with_family(DistributionFamily::Manual(ManualTable::new(vec![(1.0, 1.0)], 0.0))),
        COUNT => FeatureSpec::track(COUNT, |t, _| Ok(feature_track_count(t)))
            .with_family(DistributionFamily::Manual(ManualTable::constant(1.0))),
        CLASS_AGREEMENT => FeatureSpec::bundle(CLASS_AGREEMENT, |b, _| Ok(feature_class_agreement(b)))
            .with_family(DistributionFamily::Bernoulli),
        _ => return None,
    };
    Some(spec)
}

pub const BUILTIN_NAMES: [&str; 6] = [VOLUME, DISTANCE, VELOCITY, MODEL_ONLY, COUNT, CLASS_AGREEMENT];

/// Features addressable by name.
#[derive(Debug, Clone)]
pub struct FeatureRegistry {
    specs: BTreeMap<String, FeatureSpec>,
}

impl Default for FeatureRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl FeatureRegistry {
    pub fn empty() -> Self {
        FeatureRegistry {
            specs: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        for name in BUILTIN_NAMES {
            r.register(builtin(name).expect("builtin exists"));
        }
        r
    }

    /// Adds or replaces a feature.
    pub fn register(&mut self, spec: FeatureSpec) {
        self.specs.insert(spec.name.clone(), spec);
    }

    pub fn get(&self, name: &str) -> Option<&FeatureSpec> {
        self.specs.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut FeatureSpec> {
        self.specs.get_mut(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.specs.keys().map(String::as_str)
    }

    /// Specs for `names` in the given order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<FeatureSpec>, FeatureError> {
        names
            .iter()
            .map(|n| {
                self.get(n.as_ref())
                    .cloned()
                    .ok_or_else(|| FeatureError::Unknown(n.as_ref().to_string()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Box3D;

    fn obs_at(id: &str, frame: usize, center: [f64; 3], size: [f64; 3]) -> Observation {
        Observation::model(id, frame, "car", Box3D::axis_aligned(center, size).unwrap(), 0.9)
    }

    #[test]
    fn volume_examples() {
        assert_eq!(feature_volume(&obs_at("a", 0, [0.0; 3], [1.0; 3])), 1.0);
        let truck = obs_at("t", 0, [0.0; 3], [8.0, 2.8, 2.0]);
        assert!((feature_volume(&truck) - 44.8).abs() < 1e-12);
        let ped = obs_at("p", 0, [0.0; 3], [0.6, 0.6, 1.8]);
        assert!((feature_volume(&ped) - 0.648).abs() < 1e-12);
    }

    #[test]
    fn distance_examples() {
        let o = obs_at("a", 0, [5.0, 5.0, 0.0], [1.0; 3]);
        assert_eq!(feature_distance(&o, [5.0, 5.0, 0.0]), 0.0);
        let o = obs_at("a", 0, [30.0, 40.0, 0.0], [1.0; 3]);
        assert_eq!(feature_distance(&o, [0.0; 3]), 50.0);
        let o = obs_at("a", 0, [10.0, 0.0, 0.0], [1.0; 3]);
        assert_eq!(feature_distance(&o, [2.0, 0.0, 0.0]), 8.0);
    }

    #[test]
    fn velocity_examples() {
        let b = |id: &str, f: usize, x: f64| ObservationBundle::singleton(obs_at(id, f, [x, 0.0, 0.0], [4.0, 2.0, 1.5]));
        assert_eq!(feature_velocity(&b("a", 0, 1.0), &b("b", 1, 1.0), 0.0, 0.2).unwrap(), 0.0);
        assert_eq!(feature_velocity(&b("a", 0, 0.0), &b("b", 1, 2.0), 0.0, 1.0).unwrap(), 2.0);
        let v = feature_velocity(&b("a", 0, 0.0), &b("b", 1, 1.0), 0.0, 0.1).unwrap();
        assert!((v - 10.0).abs() < 1e-12);
        assert!(matches!(
            feature_velocity(&b("a", 0, 0.0), &b("b", 1, 1.0), 0.5, 0.5),
            Err(FeatureError::NonPositiveDt { .. })
        ));
    }

    #[test]
    fn model_only_and_agreement() {
        let m = obs_at("m", 0, [0.0; 3], [1.0; 3]);
        let mut h = Observation::human("h", 0, "car", m.bbox);
        assert_eq!(feature_model_only(&ObservationBundle::singleton(m.clone())), 1.0);
        let both = ObservationBundle::new(vec![m.clone(), h.clone()]).unwrap();
        assert_eq!(feature_model_only(&both), 0.0);
        assert_eq!(feature_model_only(&ObservationBundle::singleton(h.clone())), 0.0);

        assert_eq!(feature_class_agreement(&both), 0.0);
        h.class_label = "truck".into();
        let mixed = ObservationBundle::new(vec![m.clone(), h]).unwrap();
        assert_eq!(feature_class_agreement(&mixed), 1.0);
        assert_eq!(feature_class_agreement(&ObservationBundle::singleton(m)), 0.0);
    }

    #[test]
    fn track_count() {
        let singles: Vec<_> = (0..2)
            .map(|f| ObservationBundle::singleton(obs_at(&format!("a{f}"), f, [0.0; 3], [1.0; 3])))
            .collect();
        assert_eq!(feature_track_count(&Track::new(singles).unwrap()), 2.0);
        let pairs: Vec<_> = (0..5)
            .map(|f| {
                let m = obs_at(&format!("m{f}"), f, [0.0; 3], [1.0; 3]);
                let h = Observation::human(format!("h{f}"), f, "car", m.bbox);
                ObservationBundle::new(vec![m, h]).unwrap()
            })
            .collect();
        assert_eq!(feature_track_count(&Track::new(pairs).unwrap()), 10.0);
    }

    #[test]
    fn registry_lookup() {
        let r = FeatureRegistry::builtin();
        assert_eq!(r.get(VELOCITY).unwrap().kind(), FeatureKind::Transition);
        assert!(r.get(VOLUME).unwrap().class_conditional);
        assert!(matches!(r.select(&["volume", "nope"]), Err(FeatureError::Unknown(n)) if n == "nope"));
    }
}
