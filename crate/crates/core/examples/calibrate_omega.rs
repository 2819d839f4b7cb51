//! Grid search for the constant of the automatic IC penalty.
//!
//! Runs the SB1 scenario at T = 200 for each constant on a geometric grid
//! and reports pce. The committed default is the geometric midpoint of the
//! range of grid values reaching pce >= 99.
//!
//!     cargo run --release -p breakscan-core --example calibrate_omega

use breakscan::montecarlo::{run_scenario, ScenarioConfig};
use breakscan::selection::IcConfig;
use breakscan::sim::Scenario;

fn main() -> Result<(), breakscan::Error> {
    let reps = 200;
    let grid: Vec<f64> = (0..=16).map(|k| 0.005 * 2f64.powf(k as f64 / 3.0)).collect();
    let mut passing = Vec::new();
    println!("{:>10} {:>8} {:>10}", "c", "pce", "breaks");
    for &c in &grid {
        let mut config = ScenarioConfig::new(Scenario::SB1, 200, reps, 20_240_601);
        config.ic = IcConfig::auto(c);
        let report = run_scenario(&config)?;
        let counts = format!("{:?}", report.break_counts);
        println!("{c:>10.5} {:>8.1} {counts:>10}", report.pce);
        if report.pce >= 99.0 {
            passing.push(c);
        }
    }
    match (passing.first(), passing.last()) {
        (Some(lo), Some(hi)) => println!(
            "pce >= 99 for c in [{lo:.5}, {hi:.5}]; midpoint {:.5}",
            (lo * hi).sqrt()
        ),
        _ => println!("no grid value reaches pce >= 99"),
    }
    Ok(())
}
