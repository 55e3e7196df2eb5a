//! Exact event-driven simulation of the epidemic chain.
//!
//! Each step draws the holding time from an exponential law whose rate is the
//! sum of the four transition rates, then picks the move with probability
//! proportional to its rate (Gillespie's direct method).

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{transition_rates_unchecked, ModelParams, Regime, SystemState};
use crate::series::WorkloadSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Arrival,
    WatchEnd,
    MemoryEnd,
    RegimeSwitch,
}

impl EventKind {
    pub fn code(self) -> char {
        match self {
            EventKind::Arrival => 'A',
            EventKind::WatchEnd => 'W',
            EventKind::MemoryEnd => 'M',
            EventKind::RegimeSwitch => 'S',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "A" => Some(EventKind::Arrival),
            "W" => Some(EventKind::WatchEnd),
            "M" => Some(EventKind::MemoryEnd),
            "S" => Some(EventKind::RegimeSwitch),
            _ => None,
        }
    }

    fn byte(self) -> u8 {
        match self {
            EventKind::Arrival => 0,
            EventKind::WatchEnd => 1,
            EventKind::MemoryEnd => 2,
            EventKind::RegimeSwitch => 3,
        }
    }

    fn from_byte(b: u8) -> Option<Self> {
        [
            EventKind::Arrival,
            EventKind::WatchEnd,
            EventKind::MemoryEnd,
            EventKind::RegimeSwitch,
        ]
        .get(b as usize)
        .copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub state_after: SystemState,
}

/// Applies one move to `state`. `r_max` carries the cap rule for watch-ends:
/// at `r = r_max` the viewer leaves the system without entering `r`.
pub fn apply(kind: EventKind, state: SystemState, r_max: Option<u32>) -> Result<SystemState> {
    let mut s = state;
    match kind {
        EventKind::Arrival => s.i += 1,
        EventKind::WatchEnd => {
            if s.i == 0 {
                return Err(Error::Internal("watch-end with no viewer".into()));
            }
            s.i -= 1;
            if r_max.map_or(true, |cap| s.r < cap) {
                s.r += 1;
            }
        }
        EventKind::MemoryEnd => {
            if s.r == 0 {
                return Err(Error::Internal("memory-end with no past viewer".into()));
            }
            s.r -= 1;
        }
        EventKind::RegimeSwitch => s.regime = s.regime.flipped(),
    }
    Ok(s)
}

/// Exact output of one simulation run, or of an ingested log.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTrace {
    /// `None` for traces rebuilt from logs.
    pub params: Option<ModelParams>,
    pub seed: Option<u64>,
    pub initial: SystemState,
    pub t0: f64,
    pub t_end: f64,
    pub events: Vec<Event>,
}

/// When a simulation stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Stop after this many events; `t_end` is the last event time.
    Events(usize),
    /// Stop at this absolute time.
    Until(f64),
}

pub fn simulate(
    params: &ModelParams,
    initial: SystemState,
    horizon: Horizon,
    seed: u64,
) -> Result<EventTrace> {
    params.validate()?;
    initial.check(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (max_events, t_stop) = match horizon {
        Horizon::Events(n) => (n, f64::INFINITY),
        Horizon::Until(t) => {
            if !(t > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "horizon time must be > 0, got {t}"
                )));
            }
            (usize::MAX, t)
        }
    };
    let mut events = Vec::with_capacity(max_events.min(1 << 24));
    let mut state = initial;
    let mut t = 0.0f64;
    while events.len() < max_events {
        let rates = transition_rates_unchecked(&state, params);
        let total = rates.total();
        if !(total > 0.0) {
            return Err(Error::Internal(format!(
                "zero total rate in state {state:?}"
            )));
        }
        let hold: f64 = rng.sample::<f64, _>(Exp1) / total;
        let mut t_next = t + hold;
        if t_next <= t {
            t_next = t.next_up();
        }
        if t_next > t_stop {
            break;
        }
        let u = rng.gen::<f64>() * total;
        let kind = if u < rates.arrival {
            EventKind::Arrival
        } else if u < rates.arrival + rates.watch_end {
            EventKind::WatchEnd
        } else if u < rates.arrival + rates.watch_end + rates.memory_end {
            EventKind::MemoryEnd
        } else {
            EventKind::RegimeSwitch
        };
        state = apply(kind, state, Some(params.r_max))?;
        t = t_next;
        events.push(Event {
            t,
            kind,
            state_after: state,
        });
    }
    let t_end = match horizon {
        Horizon::Events(_) => t,
        Horizon::Until(ts) => ts,
    };
    Ok(EventTrace {
        params: Some(*params),
        seed: Some(seed),
        initial,
        t0: 0.0,
        t_end,
        events,
    })
}

/// Runs independent replications in parallel; replication `k` uses seed
/// `base_seed + k`. Output order follows `k`.
pub fn simulate_replications(
    params: &ModelParams,
    initial: SystemState,
    horizon: Horizon,
    base_seed: u64,
    replications: usize,
) -> Result<Vec<EventTrace>> {
    (0..replications)
        .into_par_iter()
        .map(|k| simulate(params, initial, horizon, base_seed.wrapping_add(k as u64)))
        .collect()
}

impl EventTrace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t0
    }

    pub fn final_state(&self) -> SystemState {
        self.events.last().map_or(self.initial, |e| e.state_after)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Replays the events from the initial state and checks every recorded
    /// state as well as time ordering.
    pub fn verify(&self) -> Result<()> {
        let r_max = self.params.map(|p| p.r_max);
        let mut s = self.initial;
        let mut last_t = self.t0;
        for (k, e) in self.events.iter().enumerate() {
            if e.t < last_t || (k > 0 && e.t <= last_t && self.params.is_some()) {
                return Err(Error::Internal(format!("event {k} is out of order")));
            }
            s = apply(e.kind, s, r_max)?;
            let matches = match (r_max, e.kind) {
                // Without the cap the r channel of an ingested log is not tracked.
                (None, _) => s.i == e.state_after.i && s.regime == e.state_after.regime,
                _ => s == e.state_after,
            };
            if !matches {
                return Err(Error::Internal(format!(
                    "event {k}: replayed state {s:?} differs from recorded {:?}",
                    e.state_after
                )));
            }
            if let Some(p) = &self.params {
                e.state_after.check(p)?;
            }
            last_t = e.t;
        }
        Ok(())
    }

    /// Exact time integral of `i` over `[t0, t_end]`.
    pub fn integral_i(&self) -> f64 {
        let mut acc = 0.0;
        let mut t = self.t0;
        let mut i = self.initial.i;
        for e in &self.events {
            acc += f64::from(i) * (e.t - t);
            t = e.t;
            i = e.state_after.i;
        }
        acc + f64::from(i) * (self.t_end - t)
    }

    /// Time average of `i` over `[from, t_end]`.
    pub fn time_average_i(&self, from: f64) -> f64 {
        let from = from.max(self.t0);
        let mut acc = 0.0;
        let mut t = from;
        let mut i = self.initial.i;
        for e in &self.events {
            if e.t > from {
                acc += f64::from(i) * (e.t - t);
                t = e.t;
            }
            i = e.state_after.i;
        }
        acc += f64::from(i) * (self.t_end - t);
        acc / (self.t_end - from)
    }

    /// Fraction of time spent in each full state over `[from, t_end]`.
    pub fn occupancy(&self, from: f64) -> HashMap<SystemState, f64> {
        let from = from.max(self.t0);
        let mut out: HashMap<SystemState, f64> = HashMap::new();
        let mut t = from;
        let mut s = self.initial;
        for e in &self.events {
            if e.t > from {
                *out.entry(s).or_default() += e.t - t;
                t = e.t;
            }
            s = e.state_after;
        }
        *out.entry(s).or_default() += self.t_end - t;
        let span = self.t_end - from;
        for v in out.values_mut() {
            *v /= span;
        }
        out
    }

    /// Maximal intervals spent in the buzz regime, clipped to the trace.
    pub fn buzz_intervals(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut start = (self.initial.regime == Regime::Buzz).then_some(self.t0);
        for e in &self.events {
            if e.kind != EventKind::RegimeSwitch {
                continue;
            }
            match (e.state_after.regime, start) {
                (Regime::Buzz, None) => start = Some(e.t),
                (Regime::BuzzFree, Some(s)) => {
                    out.push((s, e.t));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s, self.t_end));
        }
        out
    }

    /// Samples `i`, `r` and the regime at `t0 + k*dt`, right-continuous.
    /// Traces without a tracked `r` channel (ingested logs) yield `i` only.
    pub fn sample_series(&self, dt: f64) -> Result<WorkloadSeries> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
        }
        let span = (self.t_end - self.t0).max(0.0);
        let n = (span / dt).floor() as usize + 1;
        let with_hidden = self.params.is_some();
        let mut i = Vec::with_capacity(n);
        let mut r = Vec::with_capacity(if with_hidden { n } else { 0 });
        let mut regime = Vec::with_capacity(if with_hidden { n } else { 0 });
        let mut s = self.initial;
        let mut next = 0usize;
        for k in 0..n {
            let t = self.t0 + k as f64 * dt;
            while next < self.events.len() && self.events[next].t <= t {
                s = self.events[next].state_after;
                next += 1;
            }
            i.push(s.i);
            if with_hidden {
                r.push(f64::from(s.r));
                regime.push(s.regime);
            }
        }
        Ok(WorkloadSeries {
            t0: self.t0,
            dt,
            i,
            r_hat: with_hidden.then_some(r),
            regime_hat: with_hidden.then_some(regime),
        })
    }

    /// Keeps only the events after `from`, starting from the state in force at
    /// that time. Used to drop the transient of a run.
    pub fn discard_before(&self, from: f64) -> EventTrace {
        let mut initial = self.initial;
        let mut kept = Vec::new();
        for e in &self.events {
            if e.t <= from {
                initial = e.state_after;
            } else {
                kept.push(*e);
            }
        }
        EventTrace {
            params: self.params,
            seed: self.seed,
            initial,
            t0: from.max(self.t0).min(self.t_end),
            t_end: self.t_end,
            events: kept,
        }
    }

    /// Drops the first `fraction` of the time span.
    pub fn discard_warmup(&self, fraction: f64) -> EventTrace {
        let f = fraction.clamp(0.0, 1.0);
        self.discard_before(self.t0 + f * self.duration())
    }

    // ---- CSV -------------------------------------------------------------

    /// Writes `t,kind,i,r,regime`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "kind", "i", "r", "regime"])?;
        for e in &self.events {
            out.write_record([
                format!("{}", e.t),
                e.kind.code().to_string(),
                e.state_after.i.to_string(),
                e.state_after.r.to_string(),
                e.state_after.regime.label().to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(f)
    }

    /// Reads an event CSV. The initial state is recovered by undoing the first
    /// event and `t_end` is the last event time; parameters and seed are not
    /// part of the CSV form.
    pub fn read_csv<R: Read>(r: R) -> Result<EventTrace> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let headers = rdr.headers()?.clone();
        let expected = ["t", "kind", "i", "r", "regime"];
        if headers.len() < expected.len() || headers.iter().zip(expected).any(|(a, b)| a != b) {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "expected header `t,kind,i,r,regime`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut events = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = k as u64 + 2;
            let bad = |m: &str| Error::Parse {
                line,
                message: m.to_string(),
            };
            let t: f64 = rec[0].parse().map_err(|_| bad("bad time"))?;
            let kind = EventKind::from_code(&rec[1]).ok_or_else(|| bad("bad kind"))?;
            let i: u32 = rec[2].parse().map_err(|_| bad("bad i"))?;
            let r: u32 = rec[3].parse().map_err(|_| bad("bad r"))?;
            let regime = rec[4]
                .parse::<u8>()
                .ok()
                .and_then(Regime::from_label)
                .ok_or_else(|| bad("bad regime"))?;
            if !t.is_finite() {
                return Err(bad("non-finite time"));
            }
            events.push(Event {
                t,
                kind,
                state_after: SystemState::new(i, r, regime),
            });
        }
        let initial = match events.first() {
            None => SystemState::empty(),
            Some(e) => undo(e)?,
        };
        let t_end = events.last().map_or(0.0, |e| e.t);
        Ok(EventTrace {
            params: None,
            seed: None,
            initial,
            t0: 0.0_f64.min(events.first().map_or(0.0, |e| e.t)),
            t_end,
            events,
        })
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<EventTrace> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    // ---- binary ----------------------------------------------------------

    pub const MAGIC: &'static [u8; 4] = b"BZTR";
    const VERSION: u32 = 1;

    /// Compact little-endian form that also keeps parameters, seed, initial
    /// state and the time span.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        match &self.params {
            Some(p) => {
                let json = serde_json::to_vec(p)?;
                w.write_all(&[1])?;
                w.write_all(&(json.len() as u32).to_le_bytes())?;
                w.write_all(&json)?;
            }
            None => w.write_all(&[0])?,
        }
        match self.seed {
            Some(s) => {
                w.write_all(&[1])?;
                w.write_all(&s.to_le_bytes())?;
            }
            None => w.write_all(&[0])?,
        }
        write_state(&mut w, &self.initial)?;
        w.write_all(&self.t0.to_le_bytes())?;
        w.write_all(&self.t_end.to_le_bytes())?;
        w.write_all(&(self.events.len() as u64).to_le_bytes())?;
        for e in &self.events {
            w.write_all(&e.t.to_le_bytes())?;
            w.write_all(&[e.kind.byte()])?;
            write_state(&mut w, &e.state_after)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<EventTrace> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Parse {
                line: 0,
                message: "not a binary event trace".into(),
            });
        }
        let version = read_u32(&mut r)?;
        if version != Self::VERSION {
            return Err(Error::Parse {
                line: 0,
                message: format!("unsupported trace version {version}"),
            });
        }
        let params = if read_u8(&mut r)? == 1 {
            let len = read_u32(&mut r)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            Some(serde_json::from_slice(&buf)?)
        } else {
            None
        };
        let seed = if read_u8(&mut r)? == 1 {
            Some(read_u64(&mut r)?)
        } else {
            None
        };
        let initial = read_state(&mut r)?;
        let t0 = read_f64(&mut r)?;
        let t_end = read_f64(&mut r)?;
        let n = read_u64(&mut r)? as usize;
        let mut events = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            let t = read_f64(&mut r)?;
            let kind = EventKind::from_byte(read_u8(&mut r)?).ok_or_else(|| Error::Parse {
                line: 0,
                message: "bad event kind".into(),
            })?;
            let state_after = read_state(&mut r)?;
            events.push(Event {
                t,
                kind,
                state_after,
            });
        }
        Ok(EventTrace {
            params,
            seed,
            initial,
            t0,
            t_end,
            events,
        })
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_binary(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<EventTrace> {
        Self::read_binary(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// State before `e`. A watch-end that leaves `r` unchanged cannot be told
/// apart from one blocked by the cap; the uncapped reading is used.
fn undo(e: &Event) -> Result<SystemState> {
    let mut s = e.state_after;
    let bad = || Error::Parse {
        line: 2,
        message: "first event is inconsistent with any initial state".into(),
    };
    match e.kind {
        EventKind::Arrival => s.i = s.i.checked_sub(1).ok_or_else(bad)?,
        EventKind::WatchEnd => {
            s.i += 1;
            s.r = s.r.saturating_sub(1);
        }
        EventKind::MemoryEnd => s.r += 1,
        EventKind::RegimeSwitch => s.regime = s.regime.flipped(),
    }
    Ok(s)
}

fn write_state<W: Write>(w: &mut W, s: &SystemState) -> std::io::Result<()> {
    w.write_all(&s.i.to_le_bytes())?;
    w.write_all(&s.r.to_le_bytes())?;
    w.write_all(&[s.regime.label()])
}

fn read_state<R: Read>(r: &mut R) -> Result<SystemState> {
    let i = read_u32(r)?;
    let rr = read_u32(r)?;
    let regime = Regime::from_label(read_u8(r)?).ok_or_else(|| Error::Parse {
        line: 0,
        message: "bad regime label".into(),
    })?;
    Ok(SystemState::new(i, rr, regime))
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn small() -> ModelParams {
        ModelParams {
            beta1: 0.1,
            beta2: 0.8,
            gamma: 0.7,
            mu: 0.3,
            l: 1.0,
            a1: 0.05,
            a2: 0.6,
            i_max: 6,
            r_max: 5,
        }
    }

    #[test]
    fn reproducible_per_seed() {
        let p = small();
        let a = simulate(&p, SystemState::empty(), Horizon::Events(5000), 11).unwrap();
        let b = simulate(&p, SystemState::empty(), Horizon::Events(5000), 11).unwrap();
        let c = simulate(&p, SystemState::empty(), Horizon::Events(5000), 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn replay_and_confinement() {
        let p = small();
        let tr = simulate(&p, SystemState::empty(), Horizon::Events(50_000), 3).unwrap();
        tr.verify().unwrap();
        assert!(tr.events.windows(2).all(|w| w[0].t < w[1].t));
        assert!(tr
            .events
            .iter()
            .all(|e| e.state_after.i <= p.i_max && e.state_after.r <= p.r_max));
        // The caps are hit with these rates, so both blocking rules are exercised.
        assert!(tr.events.iter().any(|e| e.state_after.i == p.i_max));
        assert!(tr.events.iter().any(|e| e.state_after.r == p.r_max));
    }

    #[test]
    fn time_horizon_stops_before_end() {
        let p = small();
        let tr = simulate(&p, SystemState::empty(), Horizon::Until(100.0), 5).unwrap();
        assert_eq!(tr.t_end, 100.0);
        assert!(tr.events.last().unwrap().t <= 100.0);
    }

    #[test]
    fn no_switch_without_onset_rate() {
        let p = ModelParams {
            a1: 1e-300,
            ..presets::case_a()
        };
        let tr = simulate(&p, SystemState::empty(), Horizon::Events(100_000), 9).unwrap();
        assert_eq!(tr.count(EventKind::RegimeSwitch), 0);
    }

    #[test]
    fn invalid_initial_state_rejected() {
        let p = small();
        assert!(simulate(
            &p,
            SystemState::new(7, 0, Regime::BuzzFree),
            Horizon::Events(10),
            1
        )
        .is_err());
    }

    fn one_arrival_trace() -> EventTrace {
        EventTrace {
            params: None,
            seed: None,
            initial: SystemState::new(2, 0, Regime::BuzzFree),
            t0: 0.0,
            t_end: 4.0,
            events: vec![Event {
                t: 1.5,
                kind: EventKind::Arrival,
                state_after: SystemState::new(3, 0, Regime::BuzzFree),
            }],
        }
    }

    #[test]
    fn sampling_is_right_continuous_step() {
        let s = one_arrival_trace().sample_series(1.0).unwrap();
        assert_eq!(s.i, vec![2, 2, 3, 3, 3]);
        let wide = one_arrival_trace().sample_series(10.0).unwrap();
        assert_eq!(wide.i, vec![2]);
        assert!(one_arrival_trace().sample_series(0.0).is_err());
    }

    #[test]
    fn empty_trace_samples_initial_state() {
        let tr = EventTrace {
            events: vec![],
            t_end: 0.0,
            ..one_arrival_trace()
        };
        assert_eq!(tr.sample_series(1.0).unwrap().i, vec![2]);
    }

    #[test]
    fn sampled_average_matches_exact_integral() {
        let p = small();
        let tr = simulate(&p, SystemState::empty(), Horizon::Events(20_000), 21).unwrap();
        let exact = tr.integral_i() / tr.duration();
        for dt in [0.5, 0.1, 0.01] {
            let s = tr.sample_series(dt).unwrap();
            let n = s.i.len();
            let approx: f64 = s.i.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
            // Each unit jump of i moves the Riemann sum by at most dt, and the
            // grid overshoots t_end by less than dt.
            let jumps = tr
                .events
                .iter()
                .filter(|e| matches!(e.kind, EventKind::Arrival | EventKind::WatchEnd))
                .count();
            let bound = (jumps as f64 + 2.0 * f64::from(p.i_max)) / n as f64;
            assert!(
                (approx - exact).abs() <= bound,
                "dt={dt}: {approx} vs {exact}"
            );
            if dt <= 0.01 {
                assert!((approx - exact).abs() < 0.05 * exact);
            }
        }
    }

    #[test]
    fn csv_and_binary_forms() {
        let p = small();
        let tr = simulate(
            &p,
            SystemState::new(1, 1, Regime::Buzz),
            Horizon::Events(300),
            2,
        )
        .unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,kind,i,r,regime\n"));
        let back = EventTrace::read_csv(&buf[..]).unwrap();
        assert_eq!(back.events, tr.events);
        assert_eq!(back.initial.i, tr.initial.i);

        let mut bin = Vec::new();
        tr.write_binary(&mut bin).unwrap();
        assert_eq!(EventTrace::read_binary(&bin[..]).unwrap(), tr);
    }

    #[test]
    fn csv_parse_error_carries_line() {
        let text = "t,kind,i,r,regime\n1.0,A,1,0,1\n2.0,X,1,0,1\n";
        match EventTrace::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn warmup_discard_keeps_state() {
        let p = small();
        let tr = simulate(&p, SystemState::empty(), Horizon::Events(1000), 4).unwrap();
        let cut = tr.discard_warmup(0.5);
        cut.verify().unwrap();
        assert_eq!(cut.t_end, tr.t_end);
        assert_eq!(cut.final_state(), tr.final_state());
        assert!(cut.events.iter().all(|e| e.t > cut.t0));
    }
}
