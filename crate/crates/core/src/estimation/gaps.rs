//! Watch-rate MLE, reconstruction of the hidden `r`, and inter-arrival sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::WorkloadPath;
use crate::series::WorkloadSeries;

/// `gamma_hat = (number of decrements of i) / integral of i`.
pub fn estimate_gamma(path: &WorkloadPath) -> Result<f64> {
    let n = path.n_departures();
    if n == 0 {
        return Err(Error::InsufficientData(
            "no decrement of i in the trace".into(),
        ));
    }
    let area = path.integral();
    if !(area > 0.0) {
        return Err(Error::InsufficientData("integral of i is zero".into()));
    }
    Ok(n as f64 / area)
}

/// Memory window `1/gamma + 1/mu` used by the reconstruction.
pub fn memory_window(mu: f64, gamma: f64) -> f64 {
    1.0 / gamma + 1.0 / mu
}

/// Evaluates `r_hat` at non-decreasing times.
///
/// `r_hat(t) = gamma * integral of i over (t - W, t] - i(t)` with
/// `W = 1/gamma + 1/mu`, floored at 0 and clamped at `r_cap`. The window
/// integral estimates `i + r`; for constant `i = c` it gives `r_hat = c gamma / mu`.
/// The boolean is set when the window reaches before the start of the path.
pub fn reconstruct_r_at(
    path: &WorkloadPath,
    times: &[f64],
    mu: f64,
    gamma: f64,
    r_cap: Option<u32>,
) -> Result<Vec<(f64, bool)>> {
    if !(mu > 0.0 && gamma > 0.0 && mu.is_finite() && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "mu and gamma must be > 0, got mu={mu}, gamma={gamma}"
        )));
    }
    let w = memory_window(mu, gamma);
    let cap = r_cap.map_or(f64::INFINITY, f64::from);
    let mut head = path.cursor();
    let mut tail = path.cursor();
    let mut out = Vec::with_capacity(times.len());
    let mut last = f64::NEG_INFINITY;
    for &t in times {
        if t < last {
            return Err(Error::InvalidArgument(
                "query times must not decrease".into(),
            ));
        }
        last = t;
        let from = t - w;
        let truncated = from < path.t0();
        let area = head.at(t) - tail.at(from);
        let r = (gamma * area - f64::from(path.value_at(t))).clamp(0.0, cap);
        out.push((r, truncated));
    }
    Ok(out)
}

/// Reconstructed `r` on the grid of a sampled series.
#[derive(Debug, Clone, PartialEq)]
pub struct RReconstruction {
    pub values: Vec<f64>,
    /// Number of grid points whose window was cut by the start of the series.
    pub truncated: usize,
}

pub fn reconstruct_r(
    series: &WorkloadSeries,
    mu: f64,
    gamma: f64,
    r_cap: Option<u32>,
) -> Result<RReconstruction> {
    let path = series.to_path();
    let times: Vec<f64> = (0..series.len()).map(|k| series.time(k)).collect();
    let pts = reconstruct_r_at(&path, &times, mu, gamma, r_cap)?;
    let truncated = pts.iter().filter(|p| p.1).count();
    if truncated > 0 {
        log::warn!("r reconstruction: {truncated} grid points use a truncated window");
    }
    Ok(RReconstruction {
        values: pts.into_iter().map(|p| p.0).collect(),
        truncated,
    })
}

/// One gap between consecutive arrivals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterArrival {
    /// Time of the arrival opening the gap.
    pub t: f64,
    pub w: f64,
    /// `i + round(r_hat)` right after that arrival.
    pub x: u32,
}

/// Gaps between consecutive arrivals, each keyed by the population at its
/// start.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InterArrivalSet {
    pub samples: Vec<InterArrival>,
}

impl InterArrivalSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Builds the set from `(t, w, x)` triples; zero-length gaps are dropped.
    pub fn from_triples(triples: impl IntoIterator<Item = (f64, f64, u32)>) -> Self {
        Self {
            samples: triples
                .into_iter()
                .filter(|&(_, w, _)| w > 0.0)
                .map(|(t, w, x)| InterArrival { t, w, x })
                .collect(),
        }
    }
}

/// Arrival gaps of a path with their opening time and the level of `i`
/// right after the opening arrival.
pub(crate) struct RawGaps {
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    pub i: Vec<u32>,
}

pub(crate) fn raw_gaps(path: &WorkloadPath) -> RawGaps {
    let idx = path.arrival_indices();
    let n = idx.len().saturating_sub(1);
    let mut out = RawGaps {
        t: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
        i: Vec::with_capacity(n),
    };
    for pair in idx.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let w = path.jump_time(b) - path.jump_time(a);
        if w > 0.0 {
            out.t.push(path.jump_time(a));
            out.w.push(w);
            out.i.push(path.level_after(a));
        }
    }
    out
}

/// Inter-arrival set of a path for a given `mu`, skipping gaps that open
/// before `from`.
pub fn inter_arrivals(
    path: &WorkloadPath,
    mu: f64,
    gamma: f64,
    r_cap: Option<u32>,
    from: f64,
) -> Result<InterArrivalSet> {
    let raw = raw_gaps(path);
    let keep: Vec<usize> = (0..raw.t.len()).filter(|&k| raw.t[k] >= from).collect();
    let times: Vec<f64> = keep.iter().map(|&k| raw.t[k]).collect();
    let r = reconstruct_r_at(path, &times, mu, gamma, r_cap)?;
    Ok(InterArrivalSet {
        samples: keep
            .iter()
            .zip(r)
            .map(|(&k, (rh, _))| InterArrival {
                t: raw.t[k],
                w: raw.w[k],
                x: raw.i[k] + rh.round() as u32,
            })
            .collect(),
    })
}
