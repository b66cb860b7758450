//! Factor-graph compilation, scoring and ranking.

mod aof;
pub mod baselines;
mod graph;
mod rank;
mod score;

pub use aof::{apply_aof, apply_chain, Aof, AofPlan, MapFn, Predicate, PredicateFn, Selector};
pub use graph::{compile, Edge, Factor, FactorGraph, Scope, Variable};
pub use rank::{
    rank, rank_with, report_order, Application, ErrorReport, RankOptions, ScoreHook, MIN_TRACK_OBSERVATIONS,
};
pub use score::{
    score_component, score_observation, Component, ComponentKind, FactorContribution, Normalization,
    ObservationScore, ScoredComponent,
};

use thiserror::Error;

use crate::features::FeatureError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("model has no distribution for feature `{feature}`{}", class.as_ref().map(|c| format!(" (class `{c}`)")).unwrap_or_default())]
    MissingDistribution { feature: String, class: Option<String> },
    #[error("feature `{0}`: {1}")]
    Feature(String, FeatureError),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("unknown application `{0}` (expected missing-tracks, missing-obs or model-errors)")]
    UnknownApplication(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::{DistKey, FittedDistribution, FittedModel, ManualTable};
    use crate::features::{builtin, FeatureRegistry};
    use crate::geometry::Box3D;
    use crate::scene::{Observation, ObservationBundle, Scene, Track};

    /// Two model boxes of a truck one second apart, 2 m travelled.
    fn truck_scene() -> Scene {
        let a = Box3D::axis_aligned([0.0, 0.0, 1.0], [8.0, 2.8, 2.0]).unwrap();
        let b = Box3D::axis_aligned([2.0, 0.0, 1.0], [8.5, 2.7, 2.0]).unwrap();
        let t = Track::new(vec![
            ObservationBundle::singleton(Observation::model("t1", 0, "truck", a, 0.9)),
            ObservationBundle::singleton(Observation::model("t2", 1, "truck", b, 0.9)),
        ])
        .unwrap();
        Scene::new("w", vec![1.0, 2.0], vec!["truck".into()], vec![t])
    }

    fn worked_model() -> FittedModel {
        let mut m = FittedModel::default();
        m.insert(
            DistKey::pooled("volume"),
            FittedDistribution::manual(ManualTable::new(vec![(44.8, 0.37), (45.9, 0.39)], 1.0)),
        );
        m.insert(
            DistKey::pooled("velocity"),
            FittedDistribution::manual(ManualTable::new(vec![(2.0, 0.21)], 1.0)),
        );
        m
    }

    fn worked_specs() -> Vec<crate::features::FeatureSpec> {
        vec![builtin("volume").unwrap(), builtin("velocity").unwrap()]
    }

    #[test]
    fn worked_example_track_score() {
        let scene = truck_scene();
        let g = compile(&scene, &worked_model(), &worked_specs(), &AofPlan::new()).unwrap();
        let s = score_component(&scene, &g, Component::Track { track: 0 }, Normalization::PerFactor);
        let expect = (0.37f64.ln() + 0.39f64.ln() + 0.21f64.ln()) / 3.0;
        assert!((s.score - expect).abs() < 1e-12);
        assert!((s.score - -1.17).abs() < 0.005);
        assert_eq!((s.factor_count, s.edge_count), (3, 4));

        let e = score_component(&scene, &g, Component::Track { track: 0 }, Normalization::PerEdge);
        let per_edge = (0.37f64.ln() + 0.39f64.ln() + 2.0 * 0.21f64.ln()) / 4.0;
        assert!((e.score - per_edge).abs() < 1e-12);
    }

    #[test]
    fn observation_scores() {
        let scene = truck_scene();
        let g = compile(&scene, &worked_model(), &worked_specs(), &AofPlan::new()).unwrap();
        let o = score_observation(&g, 0);
        assert!((o.log_score - (0.37f64.ln() + 0.21f64.ln())).abs() < 1e-12);
        assert!(!o.excluded);

        let gated = AofPlan::new().with(Selector::Feature("volume".into()), Aof::ZeroIf(Predicate::custom(|_| true)));
        let g = compile(&scene, &worked_model(), &worked_specs(), &gated).unwrap();
        assert!(score_observation(&g, 0).excluded);
        let t = score_component(&scene, &g, Component::Track { track: 0 }, Normalization::PerFactor);
        assert!(t.excluded);
    }

    #[test]
    fn constant_plausibility_is_length_invariant() {
        let mut m = FittedModel::default();
        m.insert(DistKey::pooled("volume"), FittedDistribution::manual(ManualTable::constant(0.3)));
        m.insert(DistKey::pooled("velocity"), FittedDistribution::manual(ManualTable::constant(0.3)));
        for n in [2usize, 5, 40] {
            let bundles = (0..n)
                .map(|f| {
                    let b = Box3D::axis_aligned([f as f64, 0.0, 0.0], [4.0, 2.0, 1.5]).unwrap();
                    ObservationBundle::singleton(Observation::model(format!("o{f:03}"), f, "car", b, 0.9))
                })
                .collect();
            let s = Scene::new("s", (0..n).map(|f| f as f64).collect(), vec![], vec![Track::new(bundles).unwrap()]);
            let g = compile(&s, &m, &worked_specs(), &AofPlan::new()).unwrap();
            for norm in [Normalization::PerFactor, Normalization::PerEdge] {
                let sc = score_component(&s, &g, Component::Track { track: 0 }, norm);
                assert!((sc.score - 0.3f64.ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn human_covered_scene_has_empty_missing_tracks_report() {
        let bx = Box3D::axis_aligned([0.0; 3], [4.0, 2.0, 1.5]).unwrap();
        let bundles = (0..5)
            .map(|f| {
                ObservationBundle::new(vec![
                    Observation::model(format!("m{f}"), f, "car", bx, 0.9),
                    Observation::human(format!("h{f}"), f, "car", bx),
                ])
                .unwrap()
            })
            .collect();
        let s = Scene::new("s", (0..5).map(|f| f as f64).collect(), vec![], vec![Track::new(bundles).unwrap()]);
        let mut m = FittedModel::default();
        for f in ["volume", "distance", "velocity"] {
            m.insert(DistKey::pooled(f), FittedDistribution::manual(ManualTable::constant(0.5)));
        }
        m.insert(DistKey::pooled("model_only"), FittedDistribution::manual(ManualTable::new(vec![(1.0, 1.0)], 0.0)));
        m.insert(DistKey::pooled("count"), FittedDistribution::manual(ManualTable::constant(1.0)));
        let r = rank(&[s], &m, &FeatureRegistry::builtin(), Application::MissingTracks, &RankOptions::default()).unwrap();
        assert!(r.is_empty());
        assert_eq!((r.candidate_count, r.excluded_count), (1, 1));
    }

    #[test]
    fn application_names() {
        assert_eq!("missing-obs".parse::<Application>().unwrap(), Application::MissingObservations);
        assert!(matches!("bogus".parse::<Application>(), Err(EngineError::UnknownApplication(_))));
    }
}
