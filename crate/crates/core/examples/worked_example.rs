//! A two-frame truck track scored against hand-written tables: volume
//! plausibilities 0.37 and 0.39, velocity 0.21.
//!
//! cargo run --example worked_example

use loa::dists::{DistKey, FittedDistribution, FittedModel, ManualTable};
use loa::engine::{compile, score_component, AofPlan, Component, Normalization};
use loa::features::builtin;
use loa::geometry::Box3D;
use loa::scene::{Observation, ObservationBundle, Scene, Track};

fn main() {
    let first = Box3D::axis_aligned([0.0, 0.0, 1.0], [8.0, 2.8, 2.0]).unwrap();
    let second = Box3D::axis_aligned([2.0, 0.0, 1.0], [8.5, 2.7, 2.0]).unwrap();
    let track = Track::new(vec![
        ObservationBundle::singleton(Observation::model("t0", 0, "truck", first, 0.9).with_timestamp(1.0)),
        ObservationBundle::singleton(Observation::model("t1", 1, "truck", second, 0.9).with_timestamp(2.0)),
    ])
    .unwrap();
    let scene = Scene::new("worked", vec![1.0, 2.0], vec!["truck".into()], vec![track]);

    let mut model = FittedModel::default();
    model.insert(
        DistKey::pooled("volume"),
        FittedDistribution::manual(ManualTable::new(vec![(44.8, 0.37), (45.9, 0.39)], 1.0)),
    );
    model.insert(
        DistKey::pooled("velocity"),
        FittedDistribution::manual(ManualTable::new(vec![(2.0, 0.21)], 1.0)),
    );

    let specs = [builtin("volume").unwrap(), builtin("velocity").unwrap()];
    let graph = compile(&scene, &model, &specs, &AofPlan::new()).unwrap();
    println!(
        "{} variables, {} factors, {} edges",
        graph.variables.len(),
        graph.factors.len(),
        graph.edges.len()
    );
    for norm in [Normalization::PerFactor, Normalization::PerEdge] {
        let scored = score_component(&scene, &graph, Component::Track { track: 0 }, norm);
        println!("{norm:?}: score {:.4}", scored.score);
        if norm == Normalization::PerFactor {
            for f in &scored.breakdown {
                println!("  {:<8} {:<8} value {:>7.3} p {:.2}", f.feature, f.element_id, f.value, f.plausibility);
            }
        }
    }
    let expected = (0.37f64.ln() + 0.39f64.ln() + 0.21f64.ln()) / 3.0;
    println!("(ln 0.37 + ln 0.39 + ln 0.21) / 3 = {expected:.4}");
}
