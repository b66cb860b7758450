//! Bundles a model and a human source frame by frame, then links bundles
//! into tracks.
//!
//! cargo run --example association

use loa::geometry::{iou3d, Box3D};
use loa::scene::{validate_scene, AssociationConfig, Observation, Scene};

fn main() {
    let car = |x: f64| Box3D::axis_aligned([x, 0.0, 0.8], [4.5, 1.9, 1.6]).unwrap();
    let ped = |x: f64| Box3D::axis_aligned([x, 6.0, 0.9], [0.7, 0.7, 1.75]).unwrap();

    let mut obs = Vec::new();
    for f in 0..4 {
        let t = f as f64 * 0.1;
        let x = 0.4 * f as f64;
        obs.push(Observation::model(format!("m-car-{f}"), f, "car", car(x + 0.05), 0.9).with_timestamp(t));
        if f != 2 {
            obs.push(Observation::human(format!("h-car-{f}"), f, "car", car(x)).with_timestamp(t));
        }
        obs.push(Observation::model(format!("m-ped-{f}"), f, "pedestrian", ped(10.0 + 0.08 * f as f64), 0.7).with_timestamp(t));
    }
    println!("IOU of frame-0 car boxes: {:.3}", iou3d(&car(0.05), &car(0.0)));

    let timestamps = (0..4).map(|f| f as f64 * 0.1).collect();
    let classes = vec!["car".into(), "pedestrian".into()];
    let scene = Scene::associate("demo", timestamps, classes, obs, &AssociationConfig::default()).unwrap();
    for t in scene.tracks() {
        println!("track {} ({}, human: {})", t.id(), t.majority_class(), t.has_human());
        for b in t.bundles() {
            let ids: Vec<&str> = b.members().iter().map(|o| o.id.as_str()).collect();
            println!("  frame {}: {}", b.frame_index(), ids.join(" + "));
        }
    }
    println!("diagnostics: {}", validate_scene(&scene).len());
}
