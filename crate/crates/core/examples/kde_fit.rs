//! Fits a kernel density to car volumes and reads off plausibilities.
//!
//! cargo run --example kde_fit

use loa::datagen::SimRng;
use loa::dists::{fit_kde, silverman_bandwidth, FittedDistribution};

fn main() {
    let mut rng = SimRng::new(3);
    let volumes: Vec<f64> = (0..2000).map(|_| rng.normal(9.0, 0.5)).collect();

    let kde = fit_kde(&volumes, None, 20).unwrap();
    println!("silverman bandwidth {:.4}", silverman_bandwidth(&volumes));
    println!("modal density {:.4}", kde.modal_density());

    let dist = FittedDistribution::kde(kde, volumes.len());
    println!("{:>8} {:>10} {:>12}", "volume", "density", "plausibility");
    for v in [7.0, 8.0, 8.5, 9.0, 9.5, 10.0, 12.0, 45.0] {
        println!("{v:>8.1} {:>10.5} {:>12.3e}", dist.density(v), dist.plausibility(v));
    }
}
