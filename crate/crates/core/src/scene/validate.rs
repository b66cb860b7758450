use std::collections::BTreeMap;
use std::fmt;

use super::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

/// One invariant violation found by [`validate_scene`].
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    TimestampRegression {
        frame: usize,
        next_frame: usize,
        timestamp: f64,
        next_timestamp: f64,
    },
    NonFiniteTimestamp {
        frame: usize,
    },
    EgoLengthMismatch {
        frames: usize,
        ego_positions: usize,
    },
    FrameOutOfRange {
        id: String,
        frame_index: usize,
        frame_count: usize,
    },
    DuplicateObservationId {
        id: String,
        count: usize,
    },
    SceneIdMismatch {
        id: String,
        scene_id: String,
    },
    UnknownClass {
        id: String,
        class_label: String,
    },
    InvalidObservation {
        id: String,
        reason: String,
    },
}

impl Diagnostic {
    pub fn severity(&self) -> Severity {
        match self {
            Diagnostic::UnknownClass { .. } => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::TimestampRegression {
                frame,
                next_frame,
                timestamp,
                next_timestamp,
            } => write!(
                f,
                "timestamps must strictly increase: frame {frame} at {timestamp} s, frame {next_frame} at {next_timestamp} s"
            ),
            Diagnostic::NonFiniteTimestamp { frame } => {
                write!(f, "frame {frame} has a non-finite timestamp")
            }
            Diagnostic::EgoLengthMismatch {
                frames,
                ego_positions,
            } => write!(f, "{ego_positions} ego positions for {frames} frames"),
            Diagnostic::FrameOutOfRange {
                id,
                frame_index,
                frame_count,
            } => write!(
                f,
                "observation `{id}` has frame index {frame_index} but the scene has {frame_count} frames"
            ),
            Diagnostic::DuplicateObservationId { id, count } => {
                write!(f, "observation id `{id}` appears {count} times")
            }
            Diagnostic::SceneIdMismatch { id, scene_id } => {
                write!(f, "observation `{id}` belongs to scene `{scene_id}`")
            }
            Diagnostic::UnknownClass { id, class_label } => write!(
                f,
                "observation `{id}` has class `{class_label}` outside the scene class set"
            ),
            Diagnostic::InvalidObservation { id, reason } => {
                write!(f, "observation `{id}`: {reason}")
            }
        }
    }
}

/// Reports every invariant violation in `scene` without modifying it.
pub fn validate_scene(scene: &Scene) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let ts = &scene.frame_timestamps;
    for (frame, t) in ts.iter().enumerate() {
        if !t.is_finite() {
            out.push(Diagnostic::NonFiniteTimestamp { frame });
        }
    }
    for (frame, w) in ts.windows(2).enumerate() {
        if w[0].is_finite() && w[1].is_finite() && w[1] <= w[0] {
            out.push(Diagnostic::TimestampRegression {
                frame,
                next_frame: frame + 1,
                timestamp: w[0],
                next_timestamp: w[1],
            });
        }
    }
    if let Some(ego) = &scene.ego_positions {
        if ego.len() != ts.len() {
            out.push(Diagnostic::EgoLengthMismatch {
                frames: ts.len(),
                ego_positions: ego.len(),
            });
        }
    }

    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for o in scene.observations() {
        *seen.entry(o.id.as_str()).or_default() += 1;
        if o.frame_index >= ts.len() {
            out.push(Diagnostic::FrameOutOfRange {
                id: o.id.clone(),
                frame_index: o.frame_index,
                frame_count: ts.len(),
            });
        }
        if !o.scene_id.is_empty() && o.scene_id != scene.scene_id {
            out.push(Diagnostic::SceneIdMismatch {
                id: o.id.clone(),
                scene_id: o.scene_id.clone(),
            });
        }
        if let Err(e) = o.check() {
            out.push(Diagnostic::InvalidObservation {
                id: o.id.clone(),
                reason: e.to_string(),
            });
        }
        if !scene.class_set.is_empty() && !scene.class_set.contains(&o.class_label) {
            out.push(Diagnostic::UnknownClass {
                id: o.id.clone(),
                class_label: o.class_label.clone(),
            });
        }
    }
    for (id, count) in seen {
        if count > 1 {
            out.push(Diagnostic::DuplicateObservationId {
                id: id.to_string(),
                count,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Box3D;
    use crate::scene::{Observation, ObservationBundle, Track};

    fn obs(id: &str, frame: usize) -> Observation {
        let b = Box3D::axis_aligned([frame as f64 * 10.0, 0.0, 0.0], [1.0; 3]).unwrap();
        Observation::model(id, frame, "car", b, 0.8).with_scene("s")
    }

    fn scene_of(ts: Vec<f64>, obs: Vec<Observation>) -> Scene {
        let tracks = obs
            .into_iter()
            .map(|o| Track::new(vec![ObservationBundle::singleton(o)]).unwrap())
            .collect();
        Scene::new("s", ts, vec!["car".into()], tracks)
    }

    #[test]
    fn well_formed_scene_is_clean() {
        let s = scene_of(vec![0.0, 0.1, 0.2], vec![obs("a", 0), obs("b", 2)]);
        assert!(validate_scene(&s).is_empty());
    }

    #[test]
    fn duplicate_id_reported_once() {
        let s = scene_of(vec![0.0, 0.1, 0.2], vec![obs("a", 0), obs("a", 1)]);
        let d = validate_scene(&s);
        assert_eq!(
            d,
            vec![Diagnostic::DuplicateObservationId {
                id: "a".into(),
                count: 2
            }]
        );
        assert!(d[0].to_string().contains("`a`"));
    }

    #[test]
    fn timestamp_regression_names_both_frames() {
        let s = scene_of(vec![0.0, 0.1, 0.2, 0.3, 0.25, 0.5], vec![obs("a", 0)]);
        let d = validate_scene(&s);
        assert_eq!(d.len(), 1);
        assert!(matches!(
            d[0],
            Diagnostic::TimestampRegression {
                frame: 3,
                next_frame: 4,
                ..
            }
        ));
        let msg = d[0].to_string();
        assert!(msg.contains("frame 3") && msg.contains("frame 4"), "{msg}");
    }

    #[test]
    fn out_of_range_frame_and_unknown_class() {
        let mut o = obs("a", 5);
        o.class_label = "tram".into();
        let s = scene_of(vec![0.0, 0.1], vec![o]);
        let d = validate_scene(&s);
        assert!(d.iter().any(|x| matches!(x, Diagnostic::FrameOutOfRange { frame_index: 5, .. })));
        let unknown: Vec<_> = d
            .iter()
            .filter(|x| matches!(x, Diagnostic::UnknownClass { .. }))
            .collect();
        assert_eq!(unknown.len(), 1);
        assert_eq!(unknown[0].severity(), Severity::Warning);
    }
}
