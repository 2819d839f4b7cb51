//! Fixtures shared by the benchmarks.

use breakscan::{scenario_preset, simulate_dgp, Scenario, TimeSeriesPanel};

/// Simulated panel of `scenario` at sample size `t_len`.
pub fn panel(scenario: Scenario, t_len: usize, seed: u64) -> TimeSeriesPanel {
    let mut config = scenario_preset(scenario, t_len).expect("valid scenario size");
    config.seed = seed;
    simulate_dgp(&config).expect("simulation succeeds").0
}

/// Minimum regime length used throughout: one more than the group dimension.
pub fn min_distance(panel: &TimeSeriesPanel) -> usize {
    panel.group_dim() + 1
}
