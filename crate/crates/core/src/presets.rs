//! Bundled parameter sets.
//!
//! Population caps are not part of the rate sets themselves; the bundled
//! values are large enough never to bind for the synthetic cases, and the
//! 30 / 60 caps of the spectrum demo chain are part of that configuration.

use crate::error::{Error, Result};
use crate::model::ModelParams;

const CASE_A: &str = include_str!("../presets/case-a.json");
const CASE_B: &str = include_str!("../presets/case-b.json");
const CASE_C: &str = include_str!("../presets/case-c.json");
const FITTED_TRACE1: &str = include_str!("../presets/fitted-trace1.json");
const FITTED_TRACE2: &str = include_str!("../presets/fitted-trace2.json");
const DEMO_BUZZ: &str = include_str!("../presets/demo-buzz.json");
const DEMO_BUZZ_FREE: &str = include_str!("../presets/demo-buzz-free.json");

/// Names accepted by [`by_name`].
pub const NAMES: &[&str] = &[
    "case-a",
    "case-b",
    "case-c",
    "fitted-trace1",
    "fitted-trace2",
    "demo-buzz",
    "demo-buzz-free",
];

pub fn by_name(name: &str) -> Result<ModelParams> {
    let src = match name {
        "case-a" => CASE_A,
        "case-b" => CASE_B,
        "case-c" => CASE_C,
        "fitted-trace1" => FITTED_TRACE1,
        "fitted-trace2" => FITTED_TRACE2,
        "demo-buzz" => DEMO_BUZZ,
        "demo-buzz-free" => DEMO_BUZZ_FREE,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown preset `{other}` (known: {})",
                NAMES.join(", ")
            )))
        }
    };
    ModelParams::from_json_str(src)
}

fn builtin(src: &str) -> ModelParams {
    ModelParams::from_json_str(src).expect("bundled preset is valid")
}

/// Weak-buzz synthetic case.
pub fn case_a() -> ModelParams {
    builtin(CASE_A)
}

pub fn case_b() -> ModelParams {
    builtin(CASE_B)
}

pub fn case_c() -> ModelParams {
    builtin(CASE_C)
}

/// Rates fitted on the first segment of the scaled real VoD trace.
pub fn fitted_trace1() -> ModelParams {
    builtin(FITTED_TRACE1)
}

pub fn fitted_trace2() -> ModelParams {
    builtin(FITTED_TRACE2)
}

/// Small chain used for the large-deviation demo, with buzz.
pub fn demo_buzz() -> ModelParams {
    builtin(DEMO_BUZZ)
}

/// Same chain with `beta1 = beta2`, so the hidden regime has no effect.
pub fn demo_buzz_free() -> ModelParams {
    builtin(DEMO_BUZZ_FREE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_load() {
        for name in NAMES {
            by_name(name).unwrap();
        }
        assert!(by_name("nope").is_err());
    }
}
