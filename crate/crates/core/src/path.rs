//! Exact piecewise-constant workload `i(t)` as a sequence of unit jumps.
//!
//! This is the observation the estimators and the empirical spectrum work
//! on: arrivals are the up-jumps, watch-ends the down-jumps, and integrals of
//! `i` are exact.

use crate::error::{Error, Result};
use crate::series::WorkloadSeries;
use crate::simulator::{EventKind, EventTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadPath {
    t0: f64,
    t_end: f64,
    i0: u32,
    times: Vec<f64>,
    up: Vec<bool>,
    /// `i` right after jump `k`.
    level: Vec<u32>,
    /// Integral of `i` from `t0` to `times[k]`.
    cum: Vec<f64>,
}

impl WorkloadPath {
    /// Builds a path from `(time, is_up)` jumps sorted by time.
    pub fn new(t0: f64, t_end: f64, i0: u32, jumps: &[(f64, bool)]) -> Result<Self> {
        if !(t_end >= t0) {
            return Err(Error::InvalidArgument(format!(
                "t_end {t_end} before t0 {t0}"
            )));
        }
        let mut times = Vec::with_capacity(jumps.len());
        let mut up = Vec::with_capacity(jumps.len());
        let mut level = Vec::with_capacity(jumps.len());
        let mut cum = Vec::with_capacity(jumps.len());
        let (mut t, mut i, mut acc) = (t0, i0, 0.0f64);
        for (k, &(tj, is_up)) in jumps.iter().enumerate() {
            if tj < t || tj > t_end {
                return Err(Error::InvalidArgument(format!(
                    "jump {k} at {tj} out of order"
                )));
            }
            acc += f64::from(i) * (tj - t);
            i = if is_up {
                i + 1
            } else {
                i.checked_sub(1)
                    .ok_or_else(|| Error::InvalidArgument(format!("jump {k} takes i below 0")))?
            };
            t = tj;
            times.push(tj);
            up.push(is_up);
            level.push(i);
            cum.push(acc);
        }
        Ok(Self {
            t0,
            t_end,
            i0,
            times,
            up,
            level,
            cum,
        })
    }

    pub fn from_trace(trace: &EventTrace) -> Self {
        let jumps: Vec<(f64, bool)> = trace
            .events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Arrival => Some((e.t, true)),
                EventKind::WatchEnd => Some((e.t, false)),
                _ => None,
            })
            .collect();
        Self::new(trace.t0, trace.t_end, trace.initial.i, &jumps)
            .expect("a valid event trace yields a valid path")
    }

    /// Rebuilds jumps from a sampled series: a change of `d` between two
    /// samples becomes `|d|` unit jumps evenly spread over the step. Each
    /// sample is taken to hold for `dt`.
    pub fn from_series(series: &WorkloadSeries) -> Self {
        let mut jumps = Vec::new();
        for k in 1..series.len() {
            let d = i64::from(series.i[k]) - i64::from(series.i[k - 1]);
            let n = d.unsigned_abs();
            let start = series.time(k - 1);
            for j in 0..n {
                let t = start + series.dt * (j as f64 + 0.5) / n as f64;
                jumps.push((t, d > 0));
            }
        }
        let i0 = series.i.first().copied().unwrap_or(0);
        let t_end = series.t0 + series.len() as f64 * series.dt;
        Self::new(series.t0, t_end, i0, &jumps).expect("series jumps are ordered")
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t0
    }

    pub fn initial(&self) -> u32 {
        self.i0
    }

    pub fn n_jumps(&self) -> usize {
        self.times.len()
    }

    pub fn jump_time(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn is_up(&self, k: usize) -> bool {
        self.up[k]
    }

    /// `i` right after jump `k`.
    pub fn level_after(&self, k: usize) -> u32 {
        self.level[k]
    }

    /// `i` right before jump `k`.
    pub fn level_before(&self, k: usize) -> u32 {
        if k == 0 {
            self.i0
        } else {
            self.level[k - 1]
        }
    }

    pub fn n_arrivals(&self) -> usize {
        self.up.iter().filter(|&&u| u).count()
    }

    pub fn n_departures(&self) -> usize {
        self.up.iter().filter(|&&u| !u).count()
    }

    /// Indices of the up-jumps.
    pub fn arrival_indices(&self) -> Vec<usize> {
        (0..self.times.len()).filter(|&k| self.up[k]).collect()
    }

    /// Index of the last jump at or before `t`.
    fn last_jump_at_or_before(&self, t: f64) -> Option<usize> {
        let idx = self.times.partition_point(|&x| x <= t);
        idx.checked_sub(1)
    }

    /// Right-continuous value at `t`.
    pub fn value_at(&self, t: f64) -> u32 {
        match self.last_jump_at_or_before(t) {
            Some(k) => self.level[k],
            None => self.i0,
        }
    }

    /// Integral of `i` over `[t0, t]`, with `t` clamped to the path span.
    pub fn cumulative(&self, t: f64) -> f64 {
        let t = t.clamp(self.t0, self.t_end);
        match self.last_jump_at_or_before(t) {
            Some(k) => self.cum[k] + f64::from(self.level[k]) * (t - self.times[k]),
            None => f64::from(self.i0) * (t - self.t0),
        }
    }

    pub fn integral(&self) -> f64 {
        self.cumulative(self.t_end)
    }

    pub fn integral_between(&self, a: f64, b: f64) -> f64 {
        self.cumulative(b) - self.cumulative(a)
    }

    pub fn time_average(&self) -> f64 {
        if self.duration() > 0.0 {
            self.integral() / self.duration()
        } else {
            f64::from(self.i0)
        }
    }

    /// Cursor answering `cumulative` for non-decreasing query times in
    /// amortised constant time.
    pub fn cursor(&self) -> CumulativeCursor<'_> {
        CumulativeCursor {
            path: self,
            next: 0,
        }
    }

    /// Time spent at each level, normalised (index = level).
    pub fn histogram(&self) -> Vec<f64> {
        let mut h: Vec<f64> = Vec::new();
        let mut add = |lvl: u32, d: f64| {
            let lvl = lvl as usize;
            if h.len() <= lvl {
                h.resize(lvl + 1, 0.0);
            }
            h[lvl] += d;
        };
        let mut t = self.t0;
        let mut i = self.i0;
        for k in 0..self.times.len() {
            add(i, self.times[k] - t);
            t = self.times[k];
            i = self.level[k];
        }
        add(i, self.t_end - t);
        let total: f64 = h.iter().sum();
        if total > 0.0 {
            h.iter_mut().for_each(|v| *v /= total);
        } else {
            h.iter_mut().for_each(|v| *v = 0.0);
            let lvl = self.i0 as usize;
            h[lvl] = 1.0;
        }
        h
    }

    /// Smallest level whose time-weighted CDF reaches `q`.
    pub fn quantile(&self, q: f64) -> u32 {
        let h = self.histogram();
        let mut acc = 0.0;
        for (lvl, p) in h.iter().enumerate() {
            acc += p;
            if acc >= q - 1e-12 {
                return lvl as u32;
            }
        }
        (h.len() - 1) as u32
    }

    pub fn max_level(&self) -> u32 {
        self.level
            .iter()
            .copied()
            .chain(std::iter::once(self.i0))
            .max()
            .unwrap_or(0)
    }

    /// Integrals of `i` over consecutive windows `[t0 + (j-1)tau, t0 + j tau)`;
    /// a trailing partial window is dropped.
    pub fn window_integrals(&self, tau: f64) -> Vec<f64> {
        if !(tau > 0.0) {
            return Vec::new();
        }
        let k = (self.duration() / tau + 1e-9).floor() as usize;
        let mut cur = self.cursor();
        let mut prev = 0.0;
        (1..=k)
            .map(|j| {
                let c = cur.at(self.t0 + j as f64 * tau);
                let y = c - prev;
                prev = c;
                y
            })
            .collect()
    }

    /// Right-continuous samples at `t0 + k*dt`.
    pub fn sample(&self, dt: f64) -> Result<WorkloadSeries> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
        }
        let n = (self.duration() / dt).floor() as usize + 1;
        let mut out = Vec::with_capacity(n);
        let mut next = 0usize;
        let mut i = self.i0;
        for k in 0..n {
            let t = self.t0 + k as f64 * dt;
            while next < self.times.len() && self.times[next] <= t {
                i = self.level[next];
                next += 1;
            }
            out.push(i);
        }
        Ok(WorkloadSeries::new(self.t0, dt, out))
    }

    /// The part of the path on `[a, b]`.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self> {
        let a = a.max(self.t0);
        let b = b.min(self.t_end);
        if !(b > a) {
            return Err(Error::InvalidArgument(format!("empty window [{a}, {b}]")));
        }
        let i0 = self.value_at(a);
        let jumps: Vec<(f64, bool)> = (0..self.times.len())
            .filter(|&k| self.times[k] > a && self.times[k] <= b)
            .map(|k| (self.times[k], self.up[k]))
            .collect();
        Self::new(a, b, i0, &jumps)
    }

    /// Divides every time by `factor` (time-axis compression).
    pub fn compress_time(&self, factor: f64) -> Self {
        let jumps: Vec<(f64, bool)> = self
            .times
            .iter()
            .zip(&self.up)
            .map(|(&t, &u)| (t / factor, u))
            .collect();
        Self::new(self.t0 / factor, self.t_end / factor, self.i0, &jumps)
            .expect("scaling keeps the order")
    }
}

pub struct CumulativeCursor<'a> {
    path: &'a WorkloadPath,
    /// Number of jumps at or before the last query time.
    next: usize,
}

impl CumulativeCursor<'_> {
    /// Integral over `[t0, t]`; `t` must not decrease between calls.
    pub fn at(&mut self, t: f64) -> f64 {
        let p = self.path;
        let t = t.clamp(p.t0, p.t_end);
        while self.next < p.times.len() && p.times[self.next] <= t {
            self.next += 1;
        }
        match self.next.checked_sub(1) {
            Some(k) => p.cum[k] + f64::from(p.level[k]) * (t - p.times[k]),
            None => f64::from(p.i0) * (t - p.t0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> WorkloadPath {
        // i: 1 on [0,2), 2 on [2,3), 1 on [3,5), 0 on [5,6]
        WorkloadPath::new(0.0, 6.0, 1, &[(2.0, true), (3.0, false), (5.0, false)]).unwrap()
    }

    #[test]
    fn integrals_and_values() {
        let p = toy();
        assert_eq!(p.integral(), 2.0 + 2.0 + 2.0);
        assert_eq!(p.cumulative(2.5), 3.0);
        assert_eq!(p.integral_between(1.0, 4.0), 1.0 + 2.0 + 1.0);
        assert_eq!(p.value_at(2.0), 2);
        assert_eq!(p.value_at(1.999), 1);
        assert_eq!(p.n_arrivals(), 1);
        assert_eq!(p.n_departures(), 2);
        let mut c = p.cursor();
        for t in [0.0, 0.5, 2.0, 2.5, 4.0, 6.0] {
            assert_eq!(c.at(t), p.cumulative(t));
        }
    }

    #[test]
    fn histogram_and_quantile() {
        let p = toy();
        let h = p.histogram();
        assert_eq!(h, vec![1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0]);
        assert_eq!(p.quantile(0.5), 1);
        assert_eq!(p.quantile(0.95), 2);
    }

    #[test]
    fn windows_drop_partial() {
        let p = toy();
        assert_eq!(p.window_integrals(2.5), vec![3.0, 3.0]);
        assert_eq!(p.window_integrals(6.0), vec![6.0]);
    }

    #[test]
    fn negative_level_rejected() {
        assert!(WorkloadPath::new(0.0, 1.0, 0, &[(0.5, false)]).is_err());
    }

    #[test]
    fn series_round_trip_preserves_samples() {
        let s = WorkloadSeries::new(0.0, 1.0, vec![2, 5, 5, 1, 0, 3]);
        let p = WorkloadPath::from_series(&s);
        assert_eq!(p.sample(1.0).unwrap().i[..s.len()], s.i[..]);
    }

    #[test]
    fn restrict_and_compress() {
        let p = toy();
        let q = p.restrict(1.0, 4.0).unwrap();
        assert_eq!(q.initial(), 1);
        assert_eq!(q.integral(), 4.0);
        let c = p.compress_time(2.0);
        assert_eq!(c.duration(), 3.0);
        assert_eq!(c.integral(), 3.0);
    }
}
