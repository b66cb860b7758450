//! Line-delimited scene and report files, and the truth sidecar.
//!
//! Every line is one JSON object whose `record` field names its type. The
//! first line is always the header. Field names and units are listed in
//! `docs/FORMATS.md`.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::datagen::{GroundTruthErrors, TRUTH_FORMAT, TRUTH_VERSION};
use crate::engine::{ComponentKind, ErrorReport, FactorContribution, ScoredComponent};
use crate::geometry::Box3D;
use crate::scene::{
    validate_scene, AssociationConfig, Observation, ObservationBundle, Scene, SceneError, Severity, Source, SourceKind,
    Track,
};

pub const SCENE_FORMAT: &str = "loa-scene";
pub const SCENE_VERSION: u32 = 1;
pub const REPORT_FORMAT: &str = "loa-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("empty file")]
    Empty,
    #[error("unsupported {format} version {found} (expected {expected})")]
    Version {
        format: String,
        found: String,
        expected: u32,
    },
    #[error("{0}")]
    Scene(String),
    #[error("invalid scene `{scene_id}`: {}", diagnostics.join("; "))]
    Invalid {
        scene_id: String,
        diagnostics: Vec<String>,
    },
    #[error("malformed truth file: {0}")]
    Truth(String),
}

fn line_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Line {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SceneHeader {
    record: String,
    format: String,
    version: u32,
    scene_id: String,
    frame_timestamps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ego_positions: Option<Vec<[f64; 3]>>,
    #[serde(default)]
    class_set: Vec<String>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ObservationRecord {
    record: String,
    id: String,
    frame_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp: Option<f64>,
    source_kind: SourceKind,
    source_name: String,
    class_label: String,
    center: [f64; 3],
    size: [f64; 3],
    #[serde(default)]
    yaw: f64,
    confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    track: Option<String>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

/// A parsed scene plus non-fatal findings.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedScene {
    pub scene: Scene,
    pub warnings: Vec<String>,
}

fn to_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("record serializes");
    s.push('\n');
    s
}

fn parse_line<T: DeserializeOwned>(value: Value, line: usize) -> Result<T, FormatError> {
    serde_json::from_value(value).map_err(|e| line_err(line, e.to_string()))
}

fn check_version(format: &str, expected_format: &str, version: u32, expected: u32) -> Result<(), FormatError> {
    if format != expected_format {
        return Err(line_err(1, format!("expected format `{expected_format}`, found `{format}`")));
    }
    if version != expected {
        return Err(FormatError::Version {
            format: expected_format.to_string(),
            found: version.to_string(),
            expected,
        });
    }
    Ok(())
}

/// Serializes a scene; observations follow track order and carry their
/// track id so that reading restores the exact association.
pub fn write_scene(scene: &Scene) -> String {
    let mut out = to_line(&SceneHeader {
        record: "header".into(),
        format: SCENE_FORMAT.into(),
        version: SCENE_VERSION,
        scene_id: scene.scene_id.clone(),
        frame_timestamps: scene.frame_timestamps.clone(),
        ego_positions: scene.ego_positions.clone(),
        class_set: scene.class_set.clone(),
        extra: BTreeMap::new(),
    });
    for track in scene.tracks() {
        for o in track.observations() {
            out.push_str(&to_line(&ObservationRecord {
                record: "observation".into(),
                id: o.id.clone(),
                frame_index: o.frame_index,
                timestamp: Some(o.timestamp),
                source_kind: o.source.kind,
                source_name: o.source.name.clone(),
                class_label: o.class_label.clone(),
                center: o.bbox.center(),
                size: o.bbox.size(),
                yaw: o.bbox.yaw(),
                confidence: o.confidence,
                track: Some(track.id().to_string()),
                extra: BTreeMap::new(),
            }));
        }
    }
    out
}

fn scene_err(e: SceneError) -> FormatError {
    FormatError::Scene(e.to_string())
}

/// Parses a scene file.
///
/// When every observation names a track the tracks are rebuilt as given,
/// bundling each track's observations by frame. When none do, observations
/// are associated with `association`. Mixed files are rejected. Unknown
/// fields produce warnings; error-level scene diagnostics fail the parse.
pub fn read_scene(text: &str, association: &AssociationConfig) -> Result<ParsedScene, FormatError> {
    let mut warnings = Vec::new();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, htext) = lines.next().ok_or(FormatError::Empty)?;
    let hvalue: Value = serde_json::from_str(htext).map_err(|e| line_err(hline, e.to_string()))?;
    if hvalue.get("record").and_then(Value::as_str) != Some("header") {
        return Err(line_err(hline, "first record must be the header"));
    }
    let header: SceneHeader = parse_line(hvalue, hline)?;
    check_version(&header.format, SCENE_FORMAT, header.version, SCENE_VERSION)?;
    for key in header.extra.keys() {
        warnings.push(format!("line {hline}: ignoring unknown header field `{key}`"));
    }

    let mut observations = Vec::new();
    let mut tracks_of: Vec<Option<String>> = Vec::new();
    for (n, l) in lines {
        let value: Value = serde_json::from_str(l).map_err(|e| line_err(n, e.to_string()))?;
        match value.get("record").and_then(Value::as_str) {
            Some("observation") => {}
            Some(other) => return Err(line_err(n, format!("unexpected record type `{other}`"))),
            None => return Err(line_err(n, "missing `record` field")),
        }
        let r: ObservationRecord = parse_line(value, n)?;
        for key in r.extra.keys() {
            warnings.push(format!("line {n}: ignoring unknown observation field `{key}`"));
        }
        let bbox = Box3D::new(r.center, r.size, r.yaw).map_err(|e| line_err(n, format!("observation `{}`: {e}", r.id)))?;
        let timestamp = r
            .timestamp
            .or_else(|| header.frame_timestamps.get(r.frame_index).copied())
            .unwrap_or(f64::NAN);
        observations.push(Observation {
            id: r.id,
            scene_id: header.scene_id.clone(),
            frame_index: r.frame_index,
            timestamp,
            source: Source::new(r.source_kind, r.source_name),
            class_label: r.class_label,
            bbox,
            confidence: r.confidence,
        });
        tracks_of.push(r.track);
    }

    let labeled = tracks_of.iter().filter(|t| t.is_some()).count();
    let scene = if labeled == 0 {
        Scene::associate(
            header.scene_id.clone(),
            header.frame_timestamps,
            header.class_set,
            observations,
            association,
        )
        .map_err(scene_err)?
    } else if labeled == observations.len() {
        let mut grouped: BTreeMap<String, BTreeMap<usize, Vec<Observation>>> = BTreeMap::new();
        for (o, t) in observations.into_iter().zip(tracks_of) {
            grouped.entry(t.unwrap()).or_default().entry(o.frame_index).or_default().push(o);
        }
        let mut tracks = Vec::with_capacity(grouped.len());
        for (_, frames) in grouped {
            let bundles = frames
                .into_values()
                .map(ObservationBundle::new)
                .collect::<Result<Vec<_>, _>>()
                .map_err(scene_err)?;
            tracks.push(Track::new(bundles).map_err(scene_err)?);
        }
        Scene::new(header.scene_id.clone(), header.frame_timestamps, header.class_set, tracks)
    } else {
        return Err(FormatError::Scene(format!(
            "{labeled} of {} observations name a track; either all or none must",
            observations.len()
        )));
    };
    let scene = match header.ego_positions {
        Some(ego) => scene.with_ego_positions(ego),
        None => scene,
    };

    let mut errors = Vec::new();
    for d in validate_scene(&scene) {
        match d.severity() {
            Severity::Warning => warnings.push(d.to_string()),
            Severity::Error => errors.push(d.to_string()),
        }
    }
    if !errors.is_empty() {
        return Err(FormatError::Invalid {
            scene_id: scene.scene_id.clone(),
            diagnostics: errors,
        });
    }
    Ok(ParsedScene { scene, warnings })
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportHeader {
    record: String,
    format: String,
    version: u32,
    application: String,
    scene_ids: Vec<String>,
    model_hash: String,
    candidate_count: usize,
    excluded_count: usize,
    entry_count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportEntry {
    record: String,
    rank: usize,
    kind: ComponentKind,
    id: String,
    scene_id: String,
    first_frame: usize,
    class_key: String,
    score: f64,
    factor_count: usize,
    edge_count: usize,
    breakdown: Vec<FactorContribution>,
}

pub fn write_report(report: &ErrorReport) -> String {
    let mut out = to_line(&ReportHeader {
        record: "header".into(),
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        application: report.application.clone(),
        scene_ids: report.scene_ids.clone(),
        model_hash: report.model_hash.clone(),
        candidate_count: report.candidate_count,
        excluded_count: report.excluded_count,
        entry_count: report.entries.len(),
    });
    for (i, e) in report.entries.iter().enumerate() {
        out.push_str(&to_line(&ReportEntry {
            record: "entry".into(),
            rank: i + 1,
            kind: e.kind,
            id: e.id.clone(),
            scene_id: e.scene_id.clone(),
            first_frame: e.first_frame,
            class_key: e.class_key.clone(),
            score: e.score,
            factor_count: e.factor_count,
            edge_count: e.edge_count,
            breakdown: e.breakdown.clone(),
        }));
    }
    out
}

pub fn read_report(text: &str) -> Result<ErrorReport, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, htext) = lines.next().ok_or(FormatError::Empty)?;
    let hvalue: Value = serde_json::from_str(htext).map_err(|e| line_err(hline, e.to_string()))?;
    let header: ReportHeader = parse_line(hvalue, hline)?;
    check_version(&header.format, REPORT_FORMAT, header.version, REPORT_VERSION)?;
    let mut entries = Vec::with_capacity(header.entry_count);
    for (n, l) in lines {
        let value: Value = serde_json::from_str(l).map_err(|e| line_err(n, e.to_string()))?;
        let e: ReportEntry = parse_line(value, n)?;
        if e.rank != entries.len() + 1 {
            return Err(line_err(n, format!("expected rank {}, found {}", entries.len() + 1, e.rank)));
        }
        entries.push(ScoredComponent {
            kind: e.kind,
            id: e.id,
            scene_id: e.scene_id,
            first_frame: e.first_frame,
            class_key: e.class_key,
            score: e.score,
            factor_count: e.factor_count,
            edge_count: e.edge_count,
            excluded: false,
            breakdown: e.breakdown,
        });
    }
    if entries.len() != header.entry_count {
        return Err(line_err(
            hline,
            format!("header announces {} entries, file has {}", header.entry_count, entries.len()),
        ));
    }
    Ok(ErrorReport {
        application: header.application,
        scene_ids: header.scene_ids,
        model_hash: header.model_hash,
        candidate_count: header.candidate_count,
        excluded_count: header.excluded_count,
        entries,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    truth: GroundTruthErrors,
}

pub fn write_truth(truth: &GroundTruthErrors) -> String {
    let file = TruthFile {
        format: TRUTH_FORMAT.into(),
        version: TRUTH_VERSION,
        truth: truth.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("truth serializes");
    s.push('\n');
    s
}

pub fn read_truth(text: &str) -> Result<GroundTruthErrors, FormatError> {
    let value: Value = serde_json::from_str(text).map_err(|e| FormatError::Truth(e.to_string()))?;
    if value.get("format").and_then(Value::as_str) != Some(TRUTH_FORMAT) {
        return Err(FormatError::Truth(format!("expected format `{TRUTH_FORMAT}`")));
    }
    match value.get("version").and_then(Value::as_u64) {
        Some(v) if v == TRUTH_VERSION as u64 => {}
        v => {
            return Err(FormatError::Version {
                format: TRUTH_FORMAT.into(),
                found: format!("{v:?}"),
                expected: TRUTH_VERSION,
            })
        }
    }
    let file: TruthFile = serde_json::from_value(value).map_err(|e| FormatError::Truth(e.to_string()))?;
    Ok(file.truth)
}
