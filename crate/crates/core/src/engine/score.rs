use serde::{Deserialize, Serialize};

use super::graph::FactorGraph;
use crate::features::FeatureKind;
use crate::scene::Scene;

/// Denominator of a component score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Sum of one log term per distinct factor touching the component,
    /// divided by the number of such factors.
    #[default]
    PerFactor,
    /// Sum of the observation scores divided by the number of edges between
    /// the component and factors, so a k-edge factor counts k times.
    PerEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Observation,
    Bundle,
    Track,
}

/// An observation, bundle or track, by index into the scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Observation { track: usize, bundle: usize, member: usize },
    Bundle { track: usize, bundle: usize },
    Track { track: usize },
}

impl Component {
    pub fn kind(&self) -> ComponentKind {
        match self {
            Component::Observation { .. } => ComponentKind::Observation,
            Component::Bundle { .. } => ComponentKind::Bundle,
            Component::Track { .. } => ComponentKind::Track,
        }
    }
}

/// One factor's share of a component score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorContribution {
    pub feature: String,
    pub element_kind: FeatureKind,
    pub element_id: String,
    pub class_key: Option<String>,
    pub value: f64,
    pub plausibility: f64,
    pub aof_value: f64,
    /// Edges between this factor and the component's observations.
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredComponent {
    pub kind: ComponentKind,
    pub id: String,
    pub scene_id: String,
    pub first_frame: usize,
    pub class_key: String,
    /// Mean log plausibility; `-inf` when excluded.
    pub score: f64,
    pub factor_count: usize,
    pub edge_count: usize,
    pub excluded: bool,
    pub breakdown: Vec<FactorContribution>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationScore {
    /// Sum of `ln(aof value)` over incident factors; `-inf` when excluded.
    pub log_score: f64,
    pub factor_count: usize,
    pub excluded: bool,
}

/// Sum in ascending order so every caller accumulates identically.
pub(crate) fn stable_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

pub fn score_observation(graph: &FactorGraph, variable: usize) -> ObservationScore {
    let factors = graph.factors_of(variable);
    let excluded = factors.iter().any(|&f| graph.factors[f].is_gated());
    let log_score = if excluded {
        f64::NEG_INFINITY
    } else {
        stable_sum(factors.iter().map(|&f| graph.factors[f].aof_value.ln()).collect())
    };
    ObservationScore {
        log_score,
        factor_count: factors.len(),
        excluded,
    }
}

pub fn score_component(scene: &Scene, graph: &FactorGraph, component: Component, normalization: Normalization) -> ScoredComponent {
    let tracks = scene.tracks();
    let (vars, id, first_frame, class_key) = match component {
        Component::Observation { track, bundle, member } => {
            let b = &tracks[track].bundles()[bundle];
            let o = &b.members()[member];
            let v = graph.bundle_variables(track, bundle).start + member;
            (v..v + 1, o.id.clone(), o.frame_index, o.class_label.clone())
        }
        Component::Bundle { track, bundle } => {
            let b = &tracks[track].bundles()[bundle];
            (
                graph.bundle_variables(track, bundle),
                b.id().to_string(),
                b.frame_index(),
                b.majority_class().to_string(),
            )
        }
        Component::Track { track } => {
            let t = &tracks[track];
            (
                graph.track_variables(track),
                t.id().to_string(),
                t.first_frame(),
                t.majority_class().to_string(),
            )
        }
    };

    let mut touching: Vec<usize> = vars.flat_map(|v| graph.factors_of(v).iter().copied()).collect();
    touching.sort_unstable();
    let mut counted: Vec<(usize, usize)> = Vec::new();
    for f in touching {
        match counted.last_mut() {
            Some((last, n)) if *last == f => *n += 1,
            _ => counted.push((f, 1)),
        }
    }

    let excluded = counted.iter().any(|&(f, _)| graph.factors[f].is_gated());
    let edge_count: usize = counted.iter().map(|c| c.1).sum();
    let score = if excluded || counted.is_empty() {
        f64::NEG_INFINITY
    } else {
        match normalization {
            Normalization::PerFactor => {
                let terms: Vec<f64> = counted.iter().map(|&(f, _)| graph.factors[f].aof_value.ln()).collect();
                stable_sum(terms) / counted.len() as f64
            }
            Normalization::PerEdge => {
                let terms: Vec<f64> = counted
                    .iter()
                    .flat_map(|&(f, n)| std::iter::repeat_n(graph.factors[f].aof_value.ln(), n))
                    .collect();
                stable_sum(terms) / edge_count as f64
            }
        }
    };
    let breakdown = counted
        .iter()
        .map(|&(f, n)| {
            let factor = &graph.factors[f];
            FactorContribution {
                feature: factor.feature.clone(),
                element_kind: factor.scope.kind(),
                element_id: factor.scope.element_id(scene),
                class_key: factor.class_key.clone(),
                value: factor.value,
                plausibility: factor.plausibility,
                aof_value: factor.aof_value,
                edges: n,
            }
        })
        .collect();
    ScoredComponent {
        kind: component.kind(),
        id,
        scene_id: scene.scene_id.clone(),
        first_frame,
        class_key,
        score,
        factor_count: counted.len(),
        edge_count,
        excluded,
        breakdown,
    }
}
