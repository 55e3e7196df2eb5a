//! Workload logs: session ingestion, sampled series and their statistics.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Regime, SystemState};
use crate::path::WorkloadPath;
use crate::simulator::{Event, EventKind, EventTrace};

/// One viewing session of a server log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionRecord {
    pub start: f64,
    pub duration: f64,
}

/// Builds the arrival / watch-end trace of a session log. Start times are
/// divided by `scale`, durations are kept, so `scale > 1` compresses the
/// inter-arrival times only.
pub fn ingest_sessions(records: &[SessionRecord], scale: f64) -> Result<EventTrace> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no session records".into()));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scale must be > 0, got {scale}"
        )));
    }
    let mut raw: Vec<(f64, EventKind)> = Vec::with_capacity(2 * records.len());
    for (k, rec) in records.iter().enumerate() {
        if !(rec.duration > 0.0 && rec.duration.is_finite() && rec.start.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "session {k}: start must be finite and duration > 0"
            )));
        }
        let s = rec.start / scale;
        raw.push((s, EventKind::Arrival));
        raw.push((s + rec.duration, EventKind::WatchEnd));
    }
    // Ends before starts at equal times, so concurrency is never overstated.
    raw.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| (a.1 == EventKind::Arrival).cmp(&(b.1 == EventKind::Arrival)))
    });
    let t0 = raw[0].0;
    let mut i = 0u32;
    let mut events = Vec::with_capacity(raw.len());
    for (t, kind) in raw {
        match kind {
            EventKind::Arrival => i += 1,
            _ => i -= 1,
        }
        events.push(Event {
            t,
            kind,
            state_after: SystemState::new(i, 0, Regime::BuzzFree),
        });
    }
    let t_end = events.last().map_or(t0, |e| e.t);
    Ok(EventTrace {
        params: None,
        seed: None,
        initial: SystemState::empty(),
        t0,
        t_end,
        events,
    })
}

/// Recovers one session per arrival by pairing watch-ends with the oldest open
/// session. Any pairing reproduces the same `i(t)`.
pub fn sessions_from_trace(trace: &EventTrace) -> Vec<SessionRecord> {
    let mut open: std::collections::VecDeque<f64> = std::iter::repeat(trace.t0)
        .take(trace.initial.i as usize)
        .collect();
    let mut out = Vec::new();
    for e in &trace.events {
        match e.kind {
            EventKind::Arrival => open.push_back(e.t),
            EventKind::WatchEnd => {
                if let Some(s) = open.pop_front() {
                    out.push(SessionRecord {
                        start: s,
                        duration: e.t - s,
                    });
                }
            }
            _ => {}
        }
    }
    out.retain(|s| s.duration > 0.0);
    out.sort_by(|a, b| a.start.total_cmp(&b.start));
    out
}

pub fn read_sessions_csv<R: Read>(r: R) -> Result<Vec<SessionRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "start" || &headers[1] != "duration" {
        return Err(Error::Parse {
            line: 1,
            message: "expected header `start,duration`".into(),
        });
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let parse = |idx: usize| -> Result<f64> {
            rec.get(idx)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("malformed field {idx}"),
                })
        };
        let start = parse(0)?;
        let duration = parse(1)?;
        if !(duration > 0.0) {
            return Err(Error::Parse {
                line,
                message: format!("duration must be > 0, got {duration}"),
            });
        }
        out.push(SessionRecord { start, duration });
    }
    Ok(out)
}

pub fn write_sessions_csv<W: Write>(records: &[SessionRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["start", "duration"])?;
    for s in records {
        out.write_record([format!("{}", s.start), format!("{}", s.duration)])?;
    }
    out.flush()?;
    Ok(())
}

/// Workload sampled on a regular grid `t0 + k*dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSeries {
    pub t0: f64,
    pub dt: f64,
    pub i: Vec<u32>,
    /// Past-viewer channel: the true `r` for simulated traces, the
    /// reconstruction for estimated ones.
    pub r_hat: Option<Vec<f64>>,
    pub regime_hat: Option<Vec<Regime>>,
}

impl WorkloadSeries {
    pub fn new(t0: f64, dt: f64, i: Vec<u32>) -> Self {
        Self {
            t0,
            dt,
            i,
            r_hat: None,
            regime_hat: None,
        }
    }

    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Time of the last sample.
    pub fn end(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn check(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidArgument("series dt must be > 0".into()));
        }
        let n = self.len();
        if self.r_hat.as_ref().is_some_and(|r| r.len() != n)
            || self.regime_hat.as_ref().is_some_and(|r| r.len() != n)
        {
            return Err(Error::InvalidArgument(
                "optional channels must match the length of i".into(),
            ));
        }
        if self
            .r_hat
            .as_ref()
            .is_some_and(|r| r.iter().any(|v| !(*v >= 0.0)))
        {
            return Err(Error::InvalidArgument("r_hat must be non-negative".into()));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.i.iter().map(|&v| f64::from(v)).sum::<f64>() / self.len() as f64
    }

    pub fn values(&self) -> Vec<f64> {
        self.i.iter().map(|&v| f64::from(v)).collect()
    }

    fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            t0: self.time(range.start),
            dt: self.dt,
            i: self.i[range.clone()].to_vec(),
            r_hat: self.r_hat.as_ref().map(|r| r[range.clone()].to_vec()),
            regime_hat: self.regime_hat.as_ref().map(|r| r[range].to_vec()),
        }
    }

    /// Splits at `cut`: samples strictly before `cut` go left.
    pub fn split(&self, cut: f64) -> Result<(Self, Self)> {
        if self.len() < 2 || !(cut > self.t0 && cut <= self.end()) {
            return Err(Error::InvalidArgument(format!(
                "cut {cut} outside the series range ({}, {}]",
                self.t0,
                self.end()
            )));
        }
        let k = (((cut - self.t0) / self.dt) - 1e-9).ceil().max(1.0) as usize;
        let k = k.min(self.len() - 1);
        Ok((self.slice(0..k), self.slice(k..self.len())))
    }

    /// Concatenates `other` after `self`; grids must line up.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        let expected = self.time(self.len());
        if (other.dt - self.dt).abs() > 1e-12 * self.dt
            || (other.t0 - expected).abs() > 1e-9 * self.dt.max(expected.abs())
        {
            return Err(Error::InvalidArgument("series grids do not line up".into()));
        }
        let join_opt = |a: &Option<Vec<f64>>, b: &Option<Vec<f64>>| match (a, b) {
            (Some(a), Some(b)) => Some([a.as_slice(), b.as_slice()].concat()),
            _ => None,
        };
        Ok(Self {
            t0: self.t0,
            dt: self.dt,
            i: [self.i.as_slice(), other.i.as_slice()].concat(),
            r_hat: join_opt(&self.r_hat, &other.r_hat),
            regime_hat: match (&self.regime_hat, &other.regime_hat) {
                (Some(a), Some(b)) => Some([a.as_slice(), b.as_slice()].concat()),
                _ => None,
            },
        })
    }

    /// Biased sample autocorrelation for lags `0..=max_lag`.
    pub fn autocorrelation(&self, max_lag: usize) -> Result<Vec<f64>> {
        autocorrelation(&self.values(), max_lag)
    }

    /// Occupancy frequencies of each value of `i` (index = count).
    pub fn histogram(&self) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::InvalidArgument("empty series".into()));
        }
        let max = *self.i.iter().max().unwrap() as usize;
        let mut h = vec![0.0; max + 1];
        for &v in &self.i {
            h[v as usize] += 1.0;
        }
        let n = self.len() as f64;
        h.iter_mut().for_each(|v| *v /= n);
        Ok(h)
    }

    pub fn to_path(&self) -> WorkloadPath {
        WorkloadPath::from_series(self)
    }

    // ---- CSV -------------------------------------------------------------

    /// Writes `t,i[,r_hat][,regime_hat]`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.check()?;
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t", "i"];
        if self.r_hat.is_some() {
            header.push("r_hat");
        }
        if self.regime_hat.is_some() {
            header.push("regime_hat");
        }
        out.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![format!("{}", self.time(k)), self.i[k].to_string()];
            if let Some(r) = &self.r_hat {
                row.push(format!("{}", r[k]));
            }
            if let Some(g) = &self.regime_hat {
                row.push(g[k].label().to_string());
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "t" || &headers[1] != "i" {
            return Err(Error::Parse {
                line: 1,
                message: "expected header `t,i[,r_hat][,regime_hat]`".into(),
            });
        }
        let col = |name: &str| headers.iter().position(|h| h == name);
        let r_col = col("r_hat");
        let g_col = col("regime_hat");
        let mut ts = Vec::new();
        let mut i = Vec::new();
        let mut r = Vec::new();
        let mut g = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let line = k as u64 + 2;
            let rec = rec.map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            let bad = |m: &str| Error::Parse {
                line,
                message: m.to_string(),
            };
            ts.push(rec[0].parse::<f64>().map_err(|_| bad("bad t"))?);
            i.push(rec[1].parse::<u32>().map_err(|_| bad("bad i"))?);
            if let Some(c) = r_col {
                r.push(
                    rec.get(c)
                        .and_then(|s| s.parse::<f64>().ok())
                        .ok_or_else(|| bad("bad r_hat"))?,
                );
            }
            if let Some(c) = g_col {
                g.push(
                    rec.get(c)
                        .and_then(|s| s.parse::<u8>().ok())
                        .and_then(Regime::from_label)
                        .ok_or_else(|| bad("bad regime_hat"))?,
                );
            }
        }
        if ts.is_empty() {
            return Err(Error::Parse {
                line: 2,
                message: "series has no samples".into(),
            });
        }
        let dt = if ts.len() > 1 { ts[1] - ts[0] } else { 1.0 };
        if !(dt > 0.0) {
            return Err(Error::Parse {
                line: 3,
                message: "time column must increase".into(),
            });
        }
        for (k, w) in ts.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.max(1e-9) + 1e-9 * w[1].abs() {
                return Err(Error::Parse {
                    line: k as u64 + 3,
                    message: "time column is not evenly spaced".into(),
                });
            }
        }
        let s = Self {
            t0: ts[0],
            dt,
            i,
            r_hat: r_col.map(|_| r),
            regime_hat: g_col.map(|_| g),
        };
        s.check()?;
        Ok(s)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Biased sample autocorrelation `sum (x_t - m)(x_{t+k} - m) / sum (x_t - m)^2`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n <= max_lag {
        return Err(Error::InvalidArgument(format!(
            "series of length {n} is too short for lag {max_lag}"
        )));
    }
    let m = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - m).collect();
    let denom: f64 = centered.iter().map(|v| v * v).sum();
    if !(denom > 0.0) {
        return Err(Error::InsufficientData(
            "constant series: autocorrelation undefined".into(),
        ));
    }
    Ok((0..=max_lag)
        .map(|k| {
            centered[..n - k]
                .iter()
                .zip(&centered[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / denom
        })
        .collect())
}

/// Total-variation distance between two distributions on `0..`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    0.5 * (0..n)
        .map(|k| (p.get(k).copied().unwrap_or(0.0) - q.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// What a workload file turned out to contain.
#[derive(Debug, Clone)]
pub enum WorkloadInput {
    Trace(EventTrace),
    Series(WorkloadSeries),
}

impl WorkloadInput {
    pub fn to_path(&self) -> WorkloadPath {
        match self {
            WorkloadInput::Trace(t) => WorkloadPath::from_trace(t),
            WorkloadInput::Series(s) => WorkloadPath::from_series(s),
        }
    }
}

/// Loads a CSV whose header identifies it as a session log (`start,duration`,
/// ingested with `scale`), an event trace (`t,kind,...`) or a sampled series
/// (`t,i,...`), or a binary event trace.
pub fn load_workload(path: impl AsRef<Path>, scale: f64) -> Result<WorkloadInput> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(EventTrace::MAGIC) {
        return Ok(WorkloadInput::Trace(EventTrace::read_binary(
            bytes.as_slice(),
        )?));
    }
    let text = String::from_utf8(bytes).map_err(|_| Error::Parse {
        line: 0,
        message: "neither CSV text nor a binary event trace".into(),
    })?;
    let header = text.lines().next().unwrap_or("").replace(' ', "");
    if header.starts_with("start,duration") {
        let recs = read_sessions_csv(text.as_bytes())?;
        Ok(WorkloadInput::Trace(ingest_sessions(&recs, scale)?))
    } else if header.starts_with("t,kind") {
        Ok(WorkloadInput::Trace(EventTrace::read_csv(text.as_bytes())?))
    } else if header.starts_with("t,i") {
        Ok(WorkloadInput::Series(WorkloadSeries::read_csv(
            text.as_bytes(),
        )?))
    } else {
        Err(Error::Parse {
            line: 1,
            message: format!("unrecognised header `{header}`"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec(start: f64, duration: f64) -> SessionRecord {
        SessionRecord { start, duration }
    }

    #[test]
    fn single_session_profile() {
        let tr = ingest_sessions(&[rec(10.0, 5.0)], 1.0).unwrap();
        let p = WorkloadPath::from_trace(&tr);
        assert_eq!(p.value_at(9.99), 0);
        assert_eq!(p.value_at(10.0), 1);
        assert_eq!(p.value_at(14.99), 1);
        assert_eq!(p.value_at(15.0), 0);
        assert_eq!(p.integral(), 5.0);
    }

    #[test]
    fn overlap_gives_two() {
        let tr = ingest_sessions(&[rec(0.0, 10.0), rec(5.0, 10.0)], 1.0).unwrap();
        assert_eq!(tr.events.iter().map(|e| e.state_after.i).max(), Some(2));
    }

    #[test]
    fn scaling_divides_starts_only() {
        let tr = ingest_sessions(&[rec(100.0, 7.0), rec(200.0, 3.0)], 10.0).unwrap();
        let arrivals: Vec<f64> = tr
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Arrival)
            .map(|e| e.t)
            .collect();
        assert_eq!(arrivals, vec![10.0, 20.0]);
        let ends: Vec<f64> = tr
            .events
            .iter()
            .filter(|e| e.kind == EventKind::WatchEnd)
            .map(|e| e.t)
            .collect();
        assert_eq!(ends, vec![17.0, 23.0]);
    }

    #[test]
    fn ingest_conserves_sessions_and_scales_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let recs: Vec<_> = (0..500)
            .map(|_| rec(rng.gen::<f64>() * 1000.0, 0.5 + rng.gen::<f64>() * 20.0))
            .collect();
        let a = ingest_sessions(&recs, 1.0).unwrap();
        assert_eq!(a.count(EventKind::Arrival), 500);
        assert_eq!(a.count(EventKind::WatchEnd), 500);
        assert_eq!(a.events.last().unwrap().state_after.i, 0);
        a.verify().unwrap();
        let b = ingest_sessions(&recs, 4.0).unwrap();
        assert_eq!(b.count(EventKind::Arrival), 500);
        // Scaling changes which sessions overlap, but never the level bounds.
        assert!(b
            .events
            .iter()
            .all(|e| e.state_after.i as usize <= recs.len()));
        assert!(ingest_sessions(&[], 1.0).is_err());
        assert!(ingest_sessions(&recs, 0.0).is_err());
    }

    #[test]
    fn session_csv_errors_have_line_numbers() {
        let text = "start,duration\n1,2\n3,x\n";
        match read_sessions_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let neg = "start,duration\n1,0\n";
        assert!(matches!(
            read_sessions_csv(neg.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn sessions_round_trip_through_trace() {
        let recs = vec![rec(0.0, 4.0), rec(1.0, 1.0), rec(2.5, 6.0)];
        let tr = ingest_sessions(&recs, 1.0).unwrap();
        let back = sessions_from_trace(&tr);
        let again = ingest_sessions(&back, 1.0).unwrap();
        let a: Vec<_> = tr.events.iter().map(|e| (e.t, e.state_after.i)).collect();
        let b: Vec<_> = again
            .events
            .iter()
            .map(|e| (e.t, e.state_after.i))
            .collect();
        assert_eq!(a, b);
    }

    fn series(v: &[u32]) -> WorkloadSeries {
        WorkloadSeries::new(0.0, 1.0, v.to_vec())
    }

    #[test]
    fn split_counts_and_rejoin() {
        let s = series(&[1, 2, 3, 4, 5, 6]);
        let (a, b) = s.split(4.0).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(b.t0, 4.0);
        assert_eq!(a.concat(&b).unwrap(), s);
        assert!(s.split(0.0).is_err());
        assert!(s.split(7.0).is_err());
    }

    #[test]
    fn acf_basics() {
        let s = series(&[1, 3, 2, 5, 4, 4, 1, 0, 2]);
        let acf = s.autocorrelation(3).unwrap();
        assert!((acf[0] - 1.0).abs() < 1e-15);
        assert!(series(&[3, 3, 3]).autocorrelation(1).is_err());
        assert!(s.autocorrelation(9).is_err());
    }

    #[test]
    fn acf_white_noise_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 20_000;
        let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let acf = autocorrelation(&x, 20).unwrap();
        let bound = 3.0 / (n as f64).sqrt();
        assert!(acf[1..].iter().all(|r| r.abs() < bound), "{acf:?}");
    }

    #[test]
    fn acf_periodic_shift() {
        // A period-10 pattern repeated: lag 10 realigns the series with itself.
        let base = [0u32, 1, 4, 9, 2, 7, 3, 3, 8, 5];
        let v: Vec<u32> = base.iter().cycle().take(10_000).copied().collect();
        let acf = series(&v).autocorrelation(10).unwrap();
        assert!(acf[10] > 0.99);
    }

    #[test]
    fn histogram_cases() {
        assert_eq!(
            series(&[3, 3, 3]).histogram().unwrap(),
            vec![0.0, 0.0, 0.0, 1.0]
        );
        assert_eq!(series(&[0, 1, 0, 1]).histogram().unwrap(), vec![0.5, 0.5]);
        assert!(series(&[]).histogram().is_err());
    }

    #[test]
    fn series_csv_round_trip_and_header() {
        let mut s = series(&[1, 2, 3]);
        s.r_hat = Some(vec![0.5, 1.0, 2.0]);
        s.regime_hat = Some(vec![Regime::BuzzFree, Regime::Buzz, Regime::BuzzFree]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("t,i,r_hat,regime_hat\n"));
        assert_eq!(WorkloadSeries::read_csv(&buf[..]).unwrap(), s);
    }

    #[test]
    fn tv_distance() {
        assert_eq!(total_variation(&[1.0], &[0.0, 1.0]), 1.0);
        assert_eq!(total_variation(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
    }
}
