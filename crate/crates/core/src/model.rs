//! Hidden-Markov epidemic model of VoD demand.
//!
//! The observable is the number `i` of current viewers. Past viewers `r` keep
//! gossiping about the content until their memory expires, and a hidden
//! two-state regime switches the dissemination rate between a nominal value
//! (`beta1`) and a buzz value (`beta2`).
//!
//! Transitions out of `(i, r, regime)`:
//!
//! | move                  | rate                      |
//! |-----------------------|---------------------------|
//! | `i -> i + 1`          | `l + (i + r) * beta`      |
//! | `i -> i - 1, r -> r+1`| `gamma * i`               |
//! | `r -> r - 1`          | `mu * r`                  |
//! | regime flip           | `a1` (buzz-free), `a2` (buzz) |
//!
//! Arrivals are lost at `i = i_max`. At `r = r_max` a finishing viewer leaves
//! the system directly, so the watch-end move only decrements `i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full parameter vector of the workload model.
///
/// Rates are expressed in the reciprocal of the trace's time unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub mu: f64,
    pub l: f64,
    pub a1: f64,
    pub a2: f64,
    pub i_max: u32,
    pub r_max: u32,
}

impl ModelParams {
    /// Checks every invariant of the parameter set.
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("gamma", self.gamma),
            ("mu", self.mu),
            ("l", self.l),
            ("a1", self.a1),
            ("a2", self.a2),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and strictly positive, got {v}"
                )));
            }
        }
        if self.beta2 < self.beta1 {
            return Err(Error::InvalidParams(format!(
                "beta2 ({}) must not be smaller than beta1 ({})",
                self.beta2, self.beta1
            )));
        }
        if self.i_max < 1 || self.r_max < 1 {
            return Err(Error::InvalidParams(
                "i_max and r_max must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn beta(&self, regime: Regime) -> f64 {
        match regime {
            Regime::BuzzFree => self.beta1,
            Regime::Buzz => self.beta2,
        }
    }

    /// Rate of leaving `regime`.
    pub fn switch_rate(&self, regime: Regime) -> f64 {
        match regime {
            Regime::BuzzFree => self.a1,
            Regime::Buzz => self.a2,
        }
    }

    /// Multiplies every rate by `factor`, i.e. expresses the model in a time
    /// unit `factor` times longer.
    pub fn rescaled(&self, factor: f64) -> Self {
        Self {
            beta1: self.beta1 * factor,
            beta2: self.beta2 * factor,
            gamma: self.gamma * factor,
            mu: self.mu * factor,
            l: self.l * factor,
            a1: self.a1 * factor,
            a2: self.a2 * factor,
            ..*self
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("ModelParams always serializes")
    }
}

/// Hidden dissemination regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    BuzzFree,
    Buzz,
}

impl Regime {
    pub fn flipped(self) -> Self {
        match self {
            Regime::BuzzFree => Regime::Buzz,
            Regime::Buzz => Regime::BuzzFree,
        }
    }

    /// Numeric label used in CSV files (1 = buzz-free, 2 = buzz).
    pub fn label(self) -> u8 {
        match self {
            Regime::BuzzFree => 1,
            Regime::Buzz => 2,
        }
    }

    pub fn from_label(label: u8) -> Option<Self> {
        match label {
            1 => Some(Regime::BuzzFree),
            2 => Some(Regime::Buzz),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Regime::BuzzFree => 0,
            Regime::Buzz => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemState {
    pub i: u32,
    pub r: u32,
    pub regime: Regime,
}

impl SystemState {
    pub const fn new(i: u32, r: u32, regime: Regime) -> Self {
        Self { i, r, regime }
    }

    pub const fn empty() -> Self {
        Self::new(0, 0, Regime::BuzzFree)
    }

    pub fn check(&self, params: &ModelParams) -> Result<()> {
        if self.i > params.i_max || self.r > params.r_max {
            return Err(Error::InvalidState {
                i: self.i,
                r: self.r,
            });
        }
        Ok(())
    }

    /// State at the analytic flow-balance means, in the buzz-free regime:
    /// `i = E(i)` and `r = gamma * E(i) / mu`, rounded and clipped to the caps.
    pub fn mean_field(params: &ModelParams) -> Result<Self> {
        let mean_i = mean_workload(params)?;
        let mean_r = params.gamma * mean_i / params.mu;
        Ok(Self::new(
            (mean_i.round() as u32).min(params.i_max),
            (mean_r.round() as u32).min(params.r_max),
            Regime::BuzzFree,
        ))
    }
}

impl Default for SystemState {
    fn default() -> Self {
        Self::empty()
    }
}

/// Outgoing rates of the four transition families from one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRates {
    pub arrival: f64,
    pub watch_end: f64,
    pub memory_end: f64,
    pub regime_switch: f64,
}

impl TransitionRates {
    pub fn total(&self) -> f64 {
        self.arrival + self.watch_end + self.memory_end + self.regime_switch
    }
}

pub fn transition_rates(state: &SystemState, params: &ModelParams) -> Result<TransitionRates> {
    state.check(params)?;
    Ok(transition_rates_unchecked(state, params))
}

#[inline]
pub(crate) fn transition_rates_unchecked(
    state: &SystemState,
    params: &ModelParams,
) -> TransitionRates {
    let arrival = if state.i >= params.i_max {
        0.0
    } else {
        params.l + f64::from(state.i + state.r) * params.beta(state.regime)
    };
    TransitionRates {
        arrival,
        watch_end: params.gamma * f64::from(state.i),
        memory_end: params.mu * f64::from(state.r),
        regime_switch: params.switch_rate(state.regime),
    }
}

/// Dissemination rate averaged over the stationary law of the hidden regime.
pub fn mean_beta(params: &ModelParams) -> f64 {
    let (a1, a2) = (params.a1, params.a2);
    (params.beta1 * a2 + params.beta2 * a1) / (a1 + a2)
}

fn balance_denominator(params: &ModelParams) -> f64 {
    let b = mean_beta(params);
    params.mu * params.gamma - params.mu * b - params.gamma * b
}

/// Stationary mean of the number of current viewers from flow balance,
/// ignoring the caps.
pub fn mean_workload(params: &ModelParams) -> Result<f64> {
    let denominator = balance_denominator(params);
    if !(denominator > 0.0) {
        return Err(Error::Unstable { denominator });
    }
    Ok(params.mu * params.l / denominator)
}

/// `1/beta_bar > 1/mu + 1/gamma`.
pub fn is_stable(params: &ModelParams) -> bool {
    let b = mean_beta(params);
    1.0 / b > 1.0 / params.mu + 1.0 / params.gamma
}
