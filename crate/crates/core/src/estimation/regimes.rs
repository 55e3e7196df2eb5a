//! Restoration of the hidden regime and the switching rates.

use serde::{Deserialize, Serialize};

use super::gaps::InterArrivalSet;
use crate::error::{Error, Result};
use crate::model::Regime;

/// Per-gap log-likelihood ratio `ln f2(w) - ln f1(w)` for exponential gaps
/// of rate `beta_k x + l`.
pub fn log_likelihood_ratio(w: f64, x: u32, beta1: f64, beta2: f64, l: f64) -> f64 {
    let x = f64::from(x);
    let (r1, r2) = (beta1 * x + l, beta2 * x + l);
    (r2 / r1).ln() - (r2 - r1) * w
}

/// Penalised two-state maximum-likelihood path over the gaps. Each switch
/// costs `penalty` in log-likelihood, the path starts buzz-free, and ties go
/// to staying, then to buzz-free.
pub fn restore_regimes(
    gaps: &InterArrivalSet,
    beta1: f64,
    beta2: f64,
    l: f64,
    penalty: f64,
) -> Vec<Regime> {
    let n = gaps.len();
    if n == 0 {
        return Vec::new();
    }
    // from[k][s]: state at k - 1 on the best path into state s at k
    let mut from = vec![[0u8; 2]; n];
    let mut v = [0.0f64, f64::NEG_INFINITY];
    for (k, g) in gaps.samples.iter().enumerate() {
        let x = f64::from(g.x);
        let (r1, r2) = (beta1 * x + l, beta2 * x + l);
        let e = [r1.ln() - r1 * g.w, r2.ln() - r2 * g.w];
        let mut next = [0.0; 2];
        for s in 0..2 {
            let stay = v[s];
            let switch = v[1 - s] - penalty;
            if stay >= switch {
                from[k][s] = s as u8;
                next[s] = stay + e[s];
            } else {
                from[k][s] = (1 - s) as u8;
                next[s] = switch + e[s];
            }
        }
        v = next;
    }
    let mut s = if v[1] > v[0] { 1usize } else { 0 };
    let mut out = vec![Regime::BuzzFree; n];
    for k in (0..n).rev() {
        if s == 1 {
            out[k] = Regime::Buzz;
        }
        s = from[k][s] as usize;
    }
    out
}

/// Maximal stretch of time in one regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpan {
    pub start: f64,
    pub end: f64,
    pub regime: Regime,
}

/// Merges per-gap labels into contiguous spans; a gap covers `[t, t + w)`.
pub fn regime_spans(gaps: &InterArrivalSet, labels: &[Regime]) -> Vec<RegimeSpan> {
    let mut out: Vec<RegimeSpan> = Vec::new();
    for (g, &r) in gaps.samples.iter().zip(labels) {
        let (s, e) = (g.t, g.t + g.w);
        match out.last_mut() {
            Some(last) if last.regime == r => last.end = e,
            Some(last) => {
                let start = last.end;
                out.push(RegimeSpan {
                    start,
                    end: e,
                    regime: r,
                });
            }
            None => out.push(RegimeSpan {
                start: s,
                end: e,
                regime: r,
            }),
        }
    }
    out
}

/// Intervals of the buzz regime.
pub fn buzz_spans(spans: &[RegimeSpan]) -> Vec<(f64, f64)> {
    spans
        .iter()
        .filter(|s| s.regime == Regime::Buzz)
        .map(|s| (s.start, s.end))
        .collect()
}

/// Estimated switching rates; a side is `None` when its regime was never
/// left (or never visited).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchRates {
    pub a1: Option<f64>,
    pub a2: Option<f64>,
}

impl SwitchRates {
    pub fn is_partial(&self) -> bool {
        self.a1.is_none() || self.a2.is_none()
    }
}

/// Maximum-likelihood rates from a regime path: completed exits of each
/// regime divided by the total time spent in it.
pub fn estimate_transition_rates(spans: &[RegimeSpan]) -> Result<SwitchRates> {
    if spans.is_empty() {
        return Err(Error::InsufficientData("empty regime path".into()));
    }
    let mut time = [0.0f64; 2];
    let mut exits = [0usize; 2];
    for (k, s) in spans.iter().enumerate() {
        time[s.regime.index()] += s.end - s.start;
        if k + 1 < spans.len() {
            exits[s.regime.index()] += 1;
        }
    }
    let rate = |j: usize| (exits[j] > 0 && time[j] > 0.0).then(|| exits[j] as f64 / time[j]);
    Ok(SwitchRates {
        a1: rate(0),
        a2: rate(1),
    })
}

/// Reciprocal mean dwell times.
pub fn rates_from_dwells(buzz_free: &[f64], buzz: &[f64]) -> SwitchRates {
    let recip = |d: &[f64]| {
        let total: f64 = d.iter().sum();
        (!d.is_empty() && total > 0.0).then(|| d.len() as f64 / total)
    };
    SwitchRates {
        a1: recip(buzz_free),
        a2: recip(buzz),
    }
}
