//! Shared fixtures for the criterion benchmarks.

use buzzload_core::{presets, simulate, EventTrace, Horizon, ModelParams, SystemState};

/// Case (b) trace started at the mean-field state.
pub fn case_b_trace(events: usize, seed: u64) -> EventTrace {
    let p = presets::case_b();
    let init = SystemState::mean_field(&p).expect("case (b) is stable");
    simulate(&p, init, Horizon::Events(events), seed).expect("valid preset")
}

pub fn demo_params(buzz: bool) -> ModelParams {
    if buzz {
        presets::demo_buzz()
    } else {
        presets::demo_buzz_free()
    }
}
