//! Buzz-period detection and the buzz dissemination rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::WorkloadPath;

/// How candidate buzz periods are picked out of `i(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuzzPolicy {
    /// Time-weighted quantile of `i` used as the threshold.
    pub quantile: f64,
    /// Minimum time an excursion above the threshold must last.
    pub persistence: f64,
}

impl BuzzPolicy {
    pub fn new(quantile: f64, persistence: f64) -> Self {
        Self {
            quantile,
            persistence,
        }
    }
}

/// Maximal intervals with `i >= threshold`.
pub fn excursions(path: &WorkloadPath, threshold: u32) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start = (path.initial() >= threshold).then_some(path.t0());
    for k in 0..path.n_jumps() {
        let above = path.level_after(k) >= threshold;
        match (start, above) {
            (None, true) => start = Some(path.jump_time(k)),
            (Some(s), false) => {
                if path.jump_time(k) > s {
                    out.push((s, path.jump_time(k)));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if path.t_end() > s {
            out.push((s, path.t_end()));
        }
    }
    out
}

/// Smallest level `q` such that `i <= q` for at least a fraction `p` of the time.
pub fn time_quantile(path: &WorkloadPath, p: f64) -> u32 {
    let hist = path.histogram();
    let total: f64 = hist.iter().sum();
    let mut acc = 0.0;
    for (k, &w) in hist.iter().enumerate() {
        acc += w;
        if acc >= p * total * (1.0 - 1e-12) {
            return k as u32;
        }
    }
    hist.len().saturating_sub(1) as u32
}

/// Excursions of `i` strictly above its policy quantile that last at least
/// the persistence time.
pub fn detect_buzz_periods(path: &WorkloadPath, policy: &BuzzPolicy) -> Vec<(f64, f64)> {
    if !(path.duration() > 0.0) {
        return Vec::new();
    }
    let threshold = time_quantile(path, policy.quantile) + 1;
    excursions(path, threshold)
        .into_iter()
        .filter(|(s, e)| e - s >= policy.persistence)
        .collect()
}

/// Restricted MLE of the buzz rate over `intervals`, with `r_hat` frozen at
/// each interval's start: `(n - l * duration) / integral of (i + r_frozen)`,
/// floored at 0. `n` counts arrivals in `(start, end]`.
pub fn estimate_beta2(
    path: &WorkloadPath,
    intervals: &[(f64, f64)],
    r_frozen: &[f64],
    l: f64,
) -> Result<f64> {
    if intervals.is_empty() {
        return Err(Error::InsufficientData("no buzz interval".into()));
    }
    if r_frozen.len() != intervals.len() {
        return Err(Error::InvalidArgument(format!(
            "{} frozen r values for {} intervals",
            r_frozen.len(),
            intervals.len()
        )));
    }
    let arrivals: Vec<f64> = path
        .arrival_indices()
        .into_iter()
        .map(|k| path.jump_time(k))
        .collect();
    let (mut n, mut dur, mut exposure) = (0usize, 0.0, 0.0);
    for (&(s, e), &r) in intervals.iter().zip(r_frozen) {
        n += arrivals.partition_point(|&t| t <= e) - arrivals.partition_point(|&t| t <= s);
        dur += e - s;
        exposure += path.integral_between(s, e) + r * (e - s);
    }
    if n == 0 {
        return Err(Error::InsufficientData(
            "no arrival inside the buzz intervals".into(),
        ));
    }
    if !(exposure > 0.0) {
        return Err(Error::InsufficientData(
            "zero exposure over the buzz intervals".into(),
        ));
    }
    Ok((n as f64 - l * dur).max(0.0) / exposure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn flat_series_has_no_buzz() {
        let p = WorkloadPath::new(0.0, 100.0, 3, &[]).unwrap();
        assert!(detect_buzz_periods(&p, &BuzzPolicy::new(0.95, 0.0)).is_empty());
    }

    #[test]
    fn below_threshold_everywhere() {
        // level 1 most of the time, a single short blip to 2
        let p = WorkloadPath::new(0.0, 1000.0, 1, &[(10.0, true), (10.5, false)]).unwrap();
        assert!(detect_buzz_periods(&p, &BuzzPolicy::new(0.95, 5.0)).is_empty());
    }

    #[test]
    fn rectangular_burst() {
        // i = 1 with short blips to 2, then 20 simultaneous arrivals at 500
        // held until 700.
        let mut jumps = Vec::new();
        for k in 0..50 {
            let t = 20.0 * k as f64 + 3.0;
            if !(490.0..720.0).contains(&t) {
                jumps.push((t, true));
                jumps.push((t + 1.0, false));
            }
        }
        jumps.extend((0..20).map(|_| (500.0, true)));
        jumps.extend((0..20).map(|_| (700.0, false)));
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let p = WorkloadPath::new(0.0, 1000.0, 1, &jumps).unwrap();
        assert_eq!(time_quantile(&p, 0.75), 1);
        let got = detect_buzz_periods(&p, &BuzzPolicy::new(0.75, 50.0));
        assert_eq!(got, vec![(500.0, 700.0)]);
    }

    #[test]
    fn quantile_levels() {
        // 0 for 30, 1 for 60, 2 for 10
        let p = WorkloadPath::new(0.0, 100.0, 0, &[(30.0, true), (90.0, true)]).unwrap();
        assert_eq!(time_quantile(&p, 0.3), 0);
        assert_eq!(time_quantile(&p, 0.5), 1);
        assert_eq!(time_quantile(&p, 0.9), 1);
        assert_eq!(time_quantile(&p, 0.95), 2);
    }

    #[test]
    fn excursions_are_maximal() {
        let p = WorkloadPath::new(
            0.0,
            10.0,
            0,
            &[
                (1.0, true),
                (2.0, true),
                (3.0, false),
                (4.0, false),
                (6.0, true),
                (6.0, true),
            ],
        )
        .unwrap();
        assert_eq!(excursions(&p, 1), vec![(1.0, 4.0), (6.0, 10.0)]);
        assert_eq!(excursions(&p, 2), vec![(2.0, 3.0), (6.0, 10.0)]);
    }

    #[test]
    fn beta2_direct_formula() {
        // no arrival changes i inside (0, 10): all 6 land at t = 10.
        let jumps: Vec<_> = (0..6).map(|_| (10.0, true)).collect();
        let p = WorkloadPath::new(0.0, 20.0, 0, &jumps).unwrap();
        let b = estimate_beta2(&p, &[(0.0, 10.0)], &[40.0], 0.0).unwrap();
        assert_relative_eq!(b, 6.0 / (40.0 * 10.0));
        // spontaneous arrivals are removed from the count
        let b = estimate_beta2(&p, &[(0.0, 10.0)], &[40.0], 0.1).unwrap();
        assert_relative_eq!(b, 5.0 / (40.0 * 10.0));
    }

    #[test]
    fn beta2_needs_intervals() {
        let p = WorkloadPath::new(0.0, 20.0, 0, &[(1.0, true)]).unwrap();
        assert!(estimate_beta2(&p, &[], &[], 0.0).is_err());
        assert!(estimate_beta2(&p, &[(5.0, 6.0)], &[1.0], 0.0).is_err());
    }
}
