//! The hand-written assertions and uncertainty sampling on one scene.
//!
//! cargo run --release --example baselines

use loa::datagen::{generate, GeneratorConfig};
use loa::engine::baselines::{baseline_mas, multibox_triples, uncertainty_sample};

fn main() {
    let g = generate(&GeneratorConfig { seed: 4, ..Default::default() }).unwrap();
    let flags = baseline_mas(&g.scene);
    println!("appear      {:>4}", flags.appear.len());
    println!("flicker     {:>4}", flags.flicker.len());
    println!("multibox    {:>4} ({} triples)", flags.multibox.len(), multibox_triples(&g.scene).len());
    println!("consistency {:>4}", flags.consistency.len());

    let any = flags.any_ma();
    let ghosts = any.intersection(&g.truth.ghost_track).count();
    println!("appear|flicker|multibox: {} tracks, {ghosts} of {} ghosts", any.len(), g.truth.ghost_track.len());

    let picked = uncertainty_sample(std::slice::from_ref(&g.scene), 0.5, 0.05);
    println!("uncertainty sampling picks {} observations", picked.len());
    for o in picked.iter().take(5) {
        println!("  {} confidence {:.3}", o.id, o.confidence);
    }
}
