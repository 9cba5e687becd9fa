//! Runtime comparison of the 8-corner detector and the k-NN point-cloud
//! baseline over a synthetic frame sequence.
//!
//! ```text
//! cargo run --release --example detection_benchmark -- [frames] [trials]
//! ```

use quadplan::perception::{benchmark_detectors, BenchConfig};
use quadplan::sim::{benchmark_frames, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>());
    let frames = args.next().transpose()?.unwrap_or(81);
    let trials = args.next().transpose()?.unwrap_or(5);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/fig4_sim.toml");
    let scenario = Scenario::load(path.as_ref())?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let clouds = benchmark_frames(&scenario, frames, false, &mut rng)?;
    let config = BenchConfig {
        trials,
        ..BenchConfig::default()
    };
    let report = benchmark_detectors(&clouds, &config, &mut rng)?;
    print!("{}", report.to_csv());
    Ok(())
}
