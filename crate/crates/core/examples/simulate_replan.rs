//! Runs a scenario file through the full sense / detect / replan loop and
//! prints the event log and summary.
//!
//! ```text
//! cargo run --example simulate_replan -- scenarios/fig4_sim.toml
//! ```

use quadplan::sim::{run_scenario, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/fig4_sim.toml").into()
    });
    let scenario = Scenario::load(path.as_ref())?;
    let out = run_scenario(&scenario)?;
    for e in &out.events {
        if e.kind != quadplan::sim::EventTag::Scan {
            println!("t = {:6.2} s  {:<9} {}", e.t, e.kind.as_str(), e.payload);
        }
    }
    println!("{}", serde_json::to_string_pretty(&out.summary)?);
    println!("replan wall time (ms): {:?}", out.replan_wall_ms);
    Ok(())
}
