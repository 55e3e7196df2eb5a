//! Memory rate by exponentiality of grouped inter-arrival gaps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gaps::{memory_window, raw_gaps, reconstruct_r_at, RawGaps};
use crate::error::{Error, Result};
use crate::path::WorkloadPath;

/// Normalised-spacings statistic `T = sup |F - G| / sqrt(N)`, with `F` the
/// empirical CDF of the sample and `G` that of its normalised spacings
/// `(N - n + 1)(w_(n) - w_(n-1))`.
pub fn exp_spacings_statistic(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "{n} samples, need at least 2"
        )));
    }
    if let Some(bad) = samples.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "samples must be finite and > 0, got {bad}"
        )));
    }
    let mut w = samples.to_vec();
    w.sort_unstable_by(f64::total_cmp);
    Ok(ks_against_spacings_sorted(&w))
}

fn ks_against_spacings_sorted(w: &[f64]) -> f64 {
    let n = w.len();
    let mut v: Vec<f64> = (0..n)
        .map(|k| {
            let prev = if k == 0 { 0.0 } else { w[k - 1] };
            (n - k) as f64 * (w[k] - prev)
        })
        .collect();
    v.sort_unstable_by(f64::total_cmp);
    two_sample_ks(w, &v) / (n as f64).sqrt()
}

/// `sup |F - G|` of two sorted samples.
pub(crate) fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `n` log-spaced candidates on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) || n == 0 {
        return Err(Error::InvalidArgument(format!("bad grid {lo}:{hi}:{n}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuEstimate {
    pub mu: f64,
    /// `(mu, T_mu)` for every candidate; `T` is NaN when no group was large enough.
    pub curve: Vec<(f64, f64)>,
    /// Gaps opening before this time were left out for every candidate.
    pub burn_in_end: f64,
    /// Set when the longest memory window did not fit in the burn-in.
    pub truncated_windows: bool,
}

/// Grid search of `argmin_mu T_mu`; ties go to the smallest `mu`.
pub fn estimate_mu(
    path: &WorkloadPath,
    gamma: f64,
    grid: &[f64],
    min_group: usize,
    r_cap: Option<u32>,
) -> Result<MuEstimate> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty mu grid".into()));
    }
    if let Some(bad) = grid.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "mu candidates must be > 0, got {bad}"
        )));
    }
    let mu_min = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let w_max = memory_window(mu_min, gamma);
    let burn = w_max.min(0.5 * path.duration());
    let truncated_windows = w_max > burn;
    let from = path.t0() + burn;

    let raw = raw_gaps(path);
    let keep: Vec<usize> = (0..raw.t.len()).filter(|&k| raw.t[k] >= from).collect();
    let sub = RawGaps {
        t: keep.iter().map(|&k| raw.t[k]).collect(),
        w: keep.iter().map(|&k| raw.w[k]).collect(),
        i: keep.iter().map(|&k| raw.i[k]).collect(),
    };

    let curve: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&mu| {
            let t = statistic_for(path, &sub, mu, gamma, min_group, r_cap)?;
            Ok((mu, t))
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(f64, f64)> = None;
    for &(mu, t) in &curve {
        if t.is_nan() {
            continue;
        }
        best = match best {
            Some((bm, bt)) if t > bt || (t == bt && mu > bm) => Some((bm, bt)),
            _ => Some((mu, t)),
        };
    }
    let (mu, _) = best.ok_or_else(|| {
        Error::InsufficientData(format!("no group of at least {min_group} gaps for any mu"))
    })?;
    Ok(MuEstimate {
        mu,
        curve,
        burn_in_end: from,
        truncated_windows,
    })
}

fn statistic_for(
    path: &WorkloadPath,
    gaps: &RawGaps,
    mu: f64,
    gamma: f64,
    min_group: usize,
    r_cap: Option<u32>,
) -> Result<f64> {
    let r = reconstruct_r_at(path, &gaps.t, mu, gamma, r_cap)?;
    let mut keyed: Vec<(u32, f64)> = r
        .iter()
        .zip(&gaps.i)
        .zip(&gaps.w)
        .map(|((&(rh, _), &i), &w)| (i + rh.round() as u32, w))
        .collect();
    let pooled = normalised_pool(&mut keyed, min_group);
    if pooled.len() < 2 {
        return Ok(f64::NAN);
    }
    let mut pooled = pooled;
    pooled.sort_unstable_by(f64::total_cmp);
    Ok(ks_against_spacings_sorted(&pooled))
}

/// Divides every gap by the mean of its group and pools groups of at least
/// `min_group` gaps.
pub(crate) fn normalised_pool(keyed: &mut [(u32, f64)], min_group: usize) -> Vec<f64> {
    keyed.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out = Vec::with_capacity(keyed.len());
    let mut start = 0;
    while start < keyed.len() {
        let mut end = start;
        while end < keyed.len() && keyed[end].0 == keyed[start].0 {
            end += 1;
        }
        let group = &keyed[start..end];
        if group.len() >= min_group.max(1) {
            let mean = group.iter().map(|g| g.1).sum::<f64>() / group.len() as f64;
            out.extend(group.iter().map(|g| g.1 / mean));
        }
        start = end;
    }
    out
}
