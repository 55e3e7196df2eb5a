//! Batch experiments: estimator error over replications, error
//! against trace length, spectra at several scales and fit-then-resimulate
//! closure. Every run returns plain rows that the CSV writers below emit.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{estimate_all, EstimationConfig};
use crate::model::{mean_workload, ModelParams, SystemState};
use crate::path::WorkloadPath;
use crate::series::{sessions_from_trace, total_variation, SessionRecord};
use crate::simulator::{simulate, Horizon};
use crate::spectrum::{
    default_q_grid, empirical_spectrum_path, theoretical_spectrum_of, PowerConfig, RateMatrix,
    SpectrumCurve,
};

/// Names of the seven rates, in [`rates`] order.
pub const PARAM_NAMES: [&str; 7] = ["beta1", "beta2", "gamma", "mu", "l", "a1", "a2"];

pub fn rates(p: &ModelParams) -> [f64; 7] {
    [p.beta1, p.beta2, p.gamma, p.mu, p.l, p.a1, p.a2]
}

/// `(estimate - truth) / truth` for each rate.
pub fn relative_errors(truth: &ModelParams, est: &ModelParams) -> [f64; 7] {
    let (t, e) = (rates(truth), rates(est));
    std::array::from_fn(|k| (e[k] - t[k]) / t[k])
}

/// Inputs of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub params: ModelParams,
    pub replications: usize,
    pub seed: u64,
    pub events: usize,
    pub outputs: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.replications == 0 {
            return Err(Error::InvalidArgument("replications must be >= 1".into()));
        }
        if self.events < 2 {
            return Err(Error::InvalidArgument("events must be >= 2".into()));
        }
        Ok(())
    }
}

/// Estimate from one replication truncated to its first `events` events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationEstimate {
    pub replication: usize,
    pub seed: u64,
    pub events: usize,
    /// `None` when the calibration failed; `error` then says why.
    pub estimate: Option<ModelParams>,
    pub flags: Vec<String>,
    pub error: Option<String>,
}

/// Simulates `replications` traces of `max(lengths)` events from the
/// mean-field state (seed `base_seed + k`) and estimates every prefix of the
/// requested lengths. Rows are ordered by replication, then length. A failed
/// calibration yields a row without estimate.
pub fn replicate_estimates(
    params: &ModelParams,
    lengths: &[usize],
    replications: usize,
    base_seed: u64,
    cfg: &EstimationConfig,
) -> Result<Vec<ReplicationEstimate>> {
    params.validate()?;
    if replications == 0 || lengths.is_empty() || lengths.iter().any(|&n| n < 2) {
        return Err(Error::InvalidArgument(
            "need >= 1 replication and lengths >= 2".into(),
        ));
    }
    let longest = *lengths.iter().max().unwrap();
    let start = SystemState::mean_field(params)?;
    let per_rep: Vec<Vec<ReplicationEstimate>> = (0..replications)
        .into_par_iter()
        .map(|k| {
            let seed = base_seed.wrapping_add(k as u64);
            let trace = simulate(params, start, Horizon::Events(longest), seed)?;
            let path = WorkloadPath::from_trace(&trace);
            let times: Vec<f64> = lengths
                .iter()
                .map(|&n| trace.events[n.min(trace.len()) - 1].t)
                .collect();
            drop(trace);
            lengths
                .iter()
                .zip(times)
                .map(|(&n, t_n)| {
                    let sub = path.restrict(path.t0(), t_n)?;
                    let mut row = ReplicationEstimate {
                        replication: k,
                        seed,
                        events: n,
                        estimate: None,
                        flags: Vec::new(),
                        error: None,
                    };
                    match estimate_all(&sub, cfg) {
                        Ok(res) => {
                            row.estimate = Some(res.params_hat);
                            row.flags = res.diagnostics.flags;
                        }
                        Err(e) => row.error = Some(e.to_string()),
                    }
                    Ok(row)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_rep.into_iter().flatten().collect())
}

/// Spread of the relative error of one rate over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub parameter: String,
    pub truth: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Median of the absolute relative error.
    pub median_abs: f64,
    /// Successful calibrations behind the statistics.
    pub replications: usize,
    pub failures: usize,
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = p * (v.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Box-plot statistics of the successful rows with `events` events.
pub fn summarize_errors(
    truth: &ModelParams,
    rows: &[ReplicationEstimate],
    events: usize,
) -> Result<Vec<ErrorSummary>> {
    let at: Vec<&ReplicationEstimate> = rows.iter().filter(|r| r.events == events).collect();
    let errs: Vec<[f64; 7]> = at
        .iter()
        .filter_map(|r| r.estimate.as_ref())
        .map(|e| relative_errors(truth, e))
        .collect();
    if errs.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no successful calibration of {events} events"
        )));
    }
    let failures = at.len() - errs.len();
    let t = rates(truth);
    Ok((0..7)
        .map(|k| {
            let mut v: Vec<f64> = errs.iter().map(|e| e[k]).collect();
            v.sort_by(f64::total_cmp);
            let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            a.sort_by(f64::total_cmp);
            ErrorSummary {
                parameter: PARAM_NAMES[k].to_string(),
                truth: t[k],
                min: v[0],
                q1: quantile_sorted(&v, 0.25),
                median: quantile_sorted(&v, 0.5),
                q3: quantile_sorted(&v, 0.75),
                max: v[v.len() - 1],
                median_abs: quantile_sorted(&a, 0.5),
                replications: errs.len(),
                failures,
            }
        })
        .collect())
}

/// Mean squared relative error of one rate at one trace length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsePoint {
    pub parameter: String,
    pub events: usize,
    /// Successful calibrations averaged.
    pub replications: usize,
    pub failures: usize,
    pub mse: f64,
}

pub fn mse_table(truth: &ModelParams, rows: &[ReplicationEstimate]) -> Vec<MsePoint> {
    let mut lengths: Vec<usize> = rows.iter().map(|r| r.events).collect();
    lengths.sort_unstable();
    lengths.dedup();
    let mut out = Vec::new();
    for (k, name) in PARAM_NAMES.iter().enumerate() {
        for &n in &lengths {
            let at: Vec<&ReplicationEstimate> = rows.iter().filter(|r| r.events == n).collect();
            let e: Vec<f64> = at
                .iter()
                .filter_map(|r| r.estimate.as_ref())
                .map(|est| relative_errors(truth, est)[k])
                .collect();
            out.push(MsePoint {
                parameter: name.to_string(),
                events: n,
                replications: e.len(),
                failures: at.len() - e.len(),
                mse: if e.is_empty() {
                    f64::NAN
                } else {
                    e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64
                },
            });
        }
    }
    out
}

/// Decay rate `-d log(mse) / d log(N)` by least squares over the points of
/// `parameter`.
pub fn mse_slope(points: &[MsePoint], parameter: &str) -> Result<f64> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.parameter == parameter && p.mse > 0.0 && p.mse.is_finite())
        .map(|p| ((p.events as f64).ln(), p.mse.ln()))
        .collect();
    if xy.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} usable lengths for `{parameter}`",
            xy.len()
        )));
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(-sxy / sxx)
}

/// Overlap length over union length of two sorted lists of disjoint
/// intervals; 1 when both are empty.
pub fn interval_jaccard(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let len = |v: &[(f64, f64)]| v.iter().map(|x| (x.1 - x.0).max(0.0)).sum::<f64>();
    let (mut i, mut j, mut inter) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        inter += (a[i].1.min(b[j].1) - a[i].0.max(b[j].0)).max(0.0);
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    let union = len(a) + len(b) - inter;
    if union > 0.0 {
        inter / union
    } else {
        1.0
    }
}

/// Theoretical spectrum followed by the empirical ones of one simulated trace
/// at each scale in `taus`, all on the default tilt grid of `points` points.
pub fn spectra(
    params: &ModelParams,
    events: usize,
    seed: u64,
    taus: &[f64],
    points: usize,
) -> Result<Vec<SpectrumCurve>> {
    let q = default_q_grid(params.i_max, points);
    let m = RateMatrix::build(params)?;
    let mut out = vec![theoretical_spectrum_of(&m, &q, &PowerConfig::default())?];
    let trace = simulate(
        params,
        SystemState::mean_field(params)?,
        Horizon::Events(events),
        seed,
    )?;
    let path = WorkloadPath::from_trace(&trace);
    drop(trace);
    for &tau in taus {
        out.push(empirical_spectrum_path(&path, tau, &q)?);
    }
    Ok(out)
}

/// Fit-then-resimulate comparison of an observed workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub params_hat: ModelParams,
    pub dt: f64,
    pub observed_mean: f64,
    pub simulated_mean: f64,
    /// Flow-balance mean of the fitted rates.
    pub model_mean: f64,
    /// `|model_mean - observed_mean| / observed_mean`.
    pub mean_gap: f64,
    pub histogram_observed: Vec<f64>,
    pub histogram_simulated: Vec<f64>,
    pub tv_distance: f64,
    /// First lag (in steps of `dt`) where the observed autocorrelation falls
    /// below `1/e`.
    pub decorrelation_lag: usize,
    pub acf_observed: Vec<f64>,
    pub acf_simulated: Vec<f64>,
    /// Largest absolute autocorrelation gap over lags `0..=decorrelation_lag`.
    pub acf_gap: f64,
    pub flags: Vec<String>,
}

/// Estimates the rates of `observed`, simulates the fitted model over the same
/// duration with `seed`, and compares occupancy histograms and
/// autocorrelations sampled every `dt` (default a tenth of the fitted mean
/// viewing time).
pub fn closure(
    observed: &WorkloadPath,
    cfg: &EstimationConfig,
    dt: Option<f64>,
    seed: u64,
) -> Result<ClosureReport> {
    let res = estimate_all(observed, cfg)?;
    let p = res.params_hat;
    let model_mean = mean_workload(&p)?;
    let trace = simulate(
        &p,
        SystemState::mean_field(&p)?,
        Horizon::Until(observed.duration()),
        seed,
    )?;
    let simulated = WorkloadPath::from_trace(&trace);
    drop(trace);
    let dt = dt.unwrap_or(0.1 / p.gamma);
    let obs = observed.sample(dt)?;
    let sim = simulated.sample(dt)?;
    let max_lag = (obs.len() / 4).max(1);
    let acf_obs_full = obs.autocorrelation(max_lag)?;
    let decorrelation_lag = acf_obs_full
        .iter()
        .position(|&r| r < (-1.0f64).exp())
        .ok_or_else(|| Error::InsufficientData("autocorrelation never drops below 1/e".into()))?;
    let acf_observed = acf_obs_full[..=decorrelation_lag].to_vec();
    let acf_simulated = sim.autocorrelation(decorrelation_lag)?;
    let acf_gap = acf_observed
        .iter()
        .zip(&acf_simulated)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let histogram_observed = observed.histogram();
    let histogram_simulated = simulated.histogram();
    let observed_mean = observed.time_average();
    Ok(ClosureReport {
        params_hat: p,
        dt,
        observed_mean,
        simulated_mean: simulated.time_average(),
        model_mean,
        mean_gap: (model_mean - observed_mean).abs() / observed_mean,
        tv_distance: total_variation(&histogram_observed, &histogram_simulated),
        histogram_observed,
        histogram_simulated,
        decorrelation_lag,
        acf_observed,
        acf_simulated,
        acf_gap,
        flags: res.diagnostics.flags,
    })
}

/// Session log of a simulated trace of `params`, with start times stretched by
/// `scale` so that ingesting it with the same scale restores the simulated
/// workload.
pub fn synthetic_session_log(
    params: &ModelParams,
    events: usize,
    seed: u64,
    scale: f64,
) -> Result<Vec<SessionRecord>> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scale must be > 0, got {scale}"
        )));
    }
    let trace = simulate(params, SystemState::empty(), Horizon::Events(events), seed)?;
    Ok(sessions_from_trace(&trace)
        .into_iter()
        .map(|s| SessionRecord {
            start: s.start * scale,
            duration: s.duration,
        })
        .collect())
}

pub fn write_replications_csv<W: Write>(
    truth: &ModelParams,
    rows: &[ReplicationEstimate],
    w: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["replication".to_string(), "seed".into(), "events".into()];
    header.extend(PARAM_NAMES.iter().map(|n| format!("{n}_hat")));
    header.extend(PARAM_NAMES.iter().map(|n| format!("{n}_rel_err")));
    header.push("error".into());
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.replication.to_string(),
            r.seed.to_string(),
            r.events.to_string(),
        ];
        match &r.estimate {
            Some(e) => {
                rec.extend(rates(e).iter().map(|v| v.to_string()));
                rec.extend(relative_errors(truth, e).iter().map(|v| v.to_string()));
            }
            None => rec.extend(std::iter::repeat(String::new()).take(14)),
        }
        rec.push(r.error.clone().unwrap_or_default());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_error_summary_csv<W: Write>(rows: &[ErrorSummary], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "parameter",
        "truth",
        "min",
        "q1",
        "median",
        "q3",
        "max",
        "median_abs",
        "replications",
        "failures",
    ])?;
    for s in rows {
        out.write_record([
            s.parameter.clone(),
            s.truth.to_string(),
            s.min.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.q3.to_string(),
            s.max.to_string(),
            s.median_abs.to_string(),
            s.replications.to_string(),
            s.failures.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_mse_csv<W: Write>(rows: &[MsePoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["parameter", "events", "replications", "failures", "mse"])?;
    for p in rows {
        out.write_record([
            p.parameter.clone(),
            p.events.to_string(),
            p.replications.to_string(),
            p.failures.to_string(),
            p.mse.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `i,observed,simulated` occupancy frequencies.
pub fn write_histograms_csv<W: Write>(report: &ClosureReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["i", "observed", "simulated"])?;
    let n = report
        .histogram_observed
        .len()
        .max(report.histogram_simulated.len());
    for k in 0..n {
        let get = |h: &[f64]| h.get(k).copied().unwrap_or(0.0).to_string();
        out.write_record([
            k.to_string(),
            get(&report.histogram_observed),
            get(&report.histogram_simulated),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `lag,observed,simulated` with the lag in time units.
pub fn write_autocorrelation_csv<W: Write>(report: &ClosureReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["lag", "observed", "simulated"])?;
    for (k, (a, b)) in report
        .acf_observed
        .iter()
        .zip(&report.acf_simulated)
        .enumerate()
    {
        out.write_record([
            (k as f64 * report.dt).to_string(),
            a.to_string(),
            b.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    fn est(beta1: f64) -> ReplicationEstimate {
        let mut p = presets::case_b();
        p.beta1 = beta1;
        ReplicationEstimate {
            replication: 0,
            seed: 0,
            events: 100,
            estimate: Some(p),
            flags: vec![],
            error: None,
        }
    }

    #[test]
    fn relative_error_of_truth_is_zero() {
        let p = presets::case_b();
        assert!(relative_errors(&p, &p).iter().all(|&e| e == 0.0));
    }

    #[test]
    fn summary_quartiles() {
        let truth = presets::case_b();
        let b = truth.beta1;
        let mut rows: Vec<_> = [0.9, 1.0, 1.1, 1.3, 0.5]
            .iter()
            .map(|f| est(b * f))
            .collect();
        let mut failed = est(b);
        failed.estimate = None;
        rows.push(failed);
        let s = summarize_errors(&truth, &rows, 100).unwrap();
        assert_eq!((s[0].replications, s[0].failures), (5, 1));
        // errors -0.5, -0.1, 0, 0.1, 0.3
        assert_relative_eq!(s[0].median, 0.0, epsilon = 1e-12);
        assert_relative_eq!(s[0].q1, -0.1, epsilon = 1e-12);
        assert_relative_eq!(s[0].q3, 0.1, epsilon = 1e-12);
        assert_relative_eq!(s[0].median_abs, 0.1, epsilon = 1e-12);
        assert!(summarize_errors(&truth, &rows, 7).is_err());
    }

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<MsePoint> = [1000usize, 4000, 16000]
            .iter()
            .map(|&n| MsePoint {
                parameter: "gamma".into(),
                events: n,
                replications: 1,
                failures: 0,
                mse: 3.0 / (n as f64).powf(0.8),
            })
            .collect();
        assert_relative_eq!(mse_slope(&pts, "gamma").unwrap(), 0.8, epsilon = 1e-12);
        assert!(mse_slope(&pts, "mu").is_err());
    }

    #[test]
    fn jaccard_of_intervals() {
        assert_relative_eq!(interval_jaccard(&[(0.0, 10.0)], &[(5.0, 15.0)]), 5.0 / 15.0);
        assert_relative_eq!(
            interval_jaccard(&[(0.0, 2.0), (4.0, 6.0)], &[(1.0, 5.0)]),
            2.0 / 6.0
        );
        assert_eq!(interval_jaccard(&[], &[]), 1.0);
        assert_eq!(interval_jaccard(&[(0.0, 1.0)], &[]), 0.0);
    }

    #[test]
    fn synthetic_log_round_trips_through_ingestion() {
        let p = presets::demo_buzz();
        let log = synthetic_session_log(&p, 4000, 3, 10.0).unwrap();
        let tr = crate::series::ingest_sessions(&log, 10.0).unwrap();
        assert_eq!(tr.count(crate::simulator::EventKind::Arrival), log.len());
        let direct = simulate(&p, SystemState::empty(), Horizon::Events(4000), 3).unwrap();
        let a = WorkloadPath::from_trace(&tr);
        let b = WorkloadPath::from_trace(&direct);
        for t in [5.0, 50.0, 200.0, 400.0] {
            if t < a.t_end() && t > a.t0() {
                assert_eq!(a.value_at(t), b.value_at(t));
            }
        }
    }
}
