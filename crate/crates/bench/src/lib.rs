//! Fixtures shared by the likelihood benchmarks.

use sharenet::estimation::DecisionSet;
use sharenet::{simulate_panel, Model, SimConfig};

/// Decision set of a simulated design with groups of `n` players.
pub fn fixture(n: usize, groups: usize, periods: usize) -> DecisionSet {
    let cfg = SimConfig {
        n,
        n_groups: groups,
        n_treatment_groups: groups / 2,
        periods,
        treatment_start: periods / 2 + 1,
        seed: 1,
        ..SimConfig::default()
    };
    let panels = simulate_panel(&cfg).expect("valid design");
    DecisionSet::build(&panels, &Model::default()).expect("panels match the model")
}

/// The laboratory design: 46 groups of four over 30 periods.
pub fn experiment() -> DecisionSet {
    let panels = simulate_panel(&SimConfig::default()).expect("default design");
    DecisionSet::build(&panels, &Model::default()).expect("panels match the model")
}
