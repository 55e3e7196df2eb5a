//! Calibration of the seven model rates from one observed workload path.
//!
//! Stages run in a fixed order, each feeding the next:
//! `gamma` → `mu` (with the reconstructed `r`) → `beta1, l` → buzz periods →
//! `beta2` → regime restoration → `a1, a2`.

mod buzz;
mod gaps;
mod mu;
mod regimes;
mod regression;

pub use buzz::{detect_buzz_periods, estimate_beta2, excursions, time_quantile, BuzzPolicy};
pub use gaps::{
    estimate_gamma, inter_arrivals, memory_window, reconstruct_r, reconstruct_r_at, InterArrival,
    InterArrivalSet, RReconstruction,
};
pub use mu::{estimate_mu, exp_spacings_statistic, log_grid, MuEstimate};
pub use regimes::{
    buzz_spans, estimate_transition_rates, log_likelihood_ratio, rates_from_dwells, regime_spans,
    restore_regimes, RegimeSpan, SwitchRates,
};
pub use regression::{
    estimate_beta1_l, fit_slope_with_intercept, regression_points, weighted_line, LinearFit,
    RegressionPoint,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Regime};
use crate::path::WorkloadPath;
use crate::series::WorkloadSeries;

/// Tuning knobs of [`estimate_all`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationConfig {
    /// Explicit `mu` candidates; `None` uses a log grid on
    /// `[mu_grid_low * gamma_hat, gamma_hat]`.
    pub mu_grid: Option<Vec<f64>>,
    pub mu_grid_points: usize,
    pub mu_grid_low: f64,
    /// Smallest gap group kept in the `mu` test and the regression.
    pub min_group: usize,
    pub buzz_quantile: f64,
    /// Minimum excursion length, in units of the mean viewing time `1/gamma_hat`.
    pub buzz_persistence: f64,
    /// Starting `beta2 / beta1` for the restoration when the threshold
    /// detector finds no period.
    pub buzz_seed_ratio: f64,
    /// Log-likelihood cost of one regime switch.
    pub switch_penalty: f64,
    /// Cap on the rounds of `beta2` re-estimation on the restored buzz spans;
    /// rounds stop earlier once `beta2` is stable.
    pub refine_rounds: usize,
    pub r_cap: Option<u32>,
    pub i_max: Option<u32>,
    pub r_max: Option<u32>,
    /// Points of the reported `r_hat` grid when the input is an exact path.
    pub r_hat_points: usize,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            mu_grid: None,
            mu_grid_points: 60,
            mu_grid_low: 1e-3,
            min_group: 5,
            buzz_quantile: 0.95,
            buzz_persistence: 5.0,
            buzz_seed_ratio: 10.0,
            switch_penalty: 6.0,
            refine_rounds: 50,
            r_cap: None,
            i_max: None,
            r_max: None,
            r_hat_points: 2048,
        }
    }
}

/// Evenly sampled reconstruction of `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RHat {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `(mu, T_mu)` over the grid; `None` where no gap group was large enough.
    pub t_mu_curve: Vec<(f64, Option<f64>)>,
    pub regression_points: Vec<RegressionPoint>,
    /// Buzz periods after restoration.
    pub buzz_intervals: Vec<(f64, f64)>,
    /// Buzz periods from the threshold detector alone.
    pub detected_intervals: Vec<(f64, f64)>,
    pub burn_in_end: f64,
    pub n_gaps: usize,
    /// Fallbacks taken along the way.
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub params_hat: ModelParams,
    pub r_hat: RHat,
    pub regime_hat: Vec<RegimeSpan>,
    pub diagnostics: Diagnostics,
}

impl EstimationResult {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("estimation result always serializes")
    }

    /// Regime in force at `t`; buzz-free outside the restored span.
    pub fn regime_at(&self, t: f64) -> Regime {
        let k = self.regime_hat.partition_point(|s| s.end <= t);
        match self.regime_hat.get(k) {
            Some(s) if s.start <= t => s.regime,
            _ => Regime::BuzzFree,
        }
    }

    /// Copies `r_hat` and the restored regime onto the grid of `series`.
    pub fn annotate(&self, series: &WorkloadSeries, path: &WorkloadPath) -> Result<WorkloadSeries> {
        let times: Vec<f64> = (0..series.len()).map(|k| series.time(k)).collect();
        let p = &self.params_hat;
        let r = reconstruct_r_at(path, &times, p.mu, p.gamma, Some(p.r_max))?;
        let mut out = series.clone();
        out.r_hat = Some(r.into_iter().map(|v| v.0).collect());
        out.regime_hat = Some(times.iter().map(|&t| self.regime_at(t)).collect());
        Ok(out)
    }
}

/// Runs the whole calibration on a sampled series.
pub fn estimate_series(
    series: &WorkloadSeries,
    cfg: &EstimationConfig,
) -> Result<EstimationResult> {
    series.check()?;
    let path = series.to_path();
    let mut res = estimate_path(&path, cfg, Some((series.t0, series.dt, series.len())))?;
    if res.r_hat.values.is_empty() {
        res.r_hat.dt = series.dt;
    }
    Ok(res)
}

/// Runs the whole calibration on an exact path.
pub fn estimate_all(path: &WorkloadPath, cfg: &EstimationConfig) -> Result<EstimationResult> {
    estimate_path(path, cfg, None)
}

fn estimate_path(
    path: &WorkloadPath,
    cfg: &EstimationConfig,
    grid: Option<(f64, f64, usize)>,
) -> Result<EstimationResult> {
    let mut flags = Vec::new();
    let duration = path.duration();
    if !(duration > 0.0) {
        return Err(Error::InsufficientData("trace has zero duration".into()));
    }

    let gamma = estimate_gamma(path).map_err(|e| e.at_stage("gamma"))?;

    let mu_grid = match &cfg.mu_grid {
        Some(g) => g.clone(),
        None => log_grid(cfg.mu_grid_low * gamma, gamma, cfg.mu_grid_points)
            .map_err(|e| e.at_stage("mu"))?,
    };
    let mu_est = estimate_mu(path, gamma, &mu_grid, cfg.min_group, cfg.r_cap)
        .map_err(|e| e.at_stage("mu"))?;
    let mu = mu_est.mu;
    if mu_est.truncated_windows {
        flags.push("mu: longest memory window exceeds half the trace; windows truncated".into());
    }

    let gaps = inter_arrivals(path, mu, gamma, cfg.r_cap, mu_est.burn_in_end)
        .map_err(|e| e.at_stage("beta1"))?;
    let points = regression_points(&gaps, cfg.min_group);
    let (slope, intercept) = weighted_line(&points).map_err(|e| e.at_stage("beta1"))?;
    if !(slope > 0.0) {
        return Err(
            Error::EstimationFailure(format!("fitted slope {slope:e} is not positive"))
                .at_stage("beta1"),
        );
    }
    let (beta1, l) = if intercept > 0.0 {
        (slope, intercept)
    } else {
        let l = 1.0 / duration;
        flags.push(format!(
            "beta1: fitted intercept {intercept:e} not positive; l fixed at 1/T and slope refitted"
        ));
        let b = fit_slope_with_intercept(&points, l).map_err(|e| e.at_stage("beta1"))?;
        (b, l)
    };

    let policy = BuzzPolicy {
        quantile: cfg.buzz_quantile,
        persistence: cfg.buzz_persistence / gamma,
    };
    let detected = detect_buzz_periods(path, &policy);

    let frozen = |iv: &[(f64, f64)]| -> Result<Vec<f64>> {
        let starts: Vec<f64> = iv.iter().map(|p| p.0).collect();
        Ok(reconstruct_r_at(path, &starts, mu, gamma, cfg.r_cap)?
            .into_iter()
            .map(|p| p.0)
            .collect())
    };
    let clamp_beta2 = |b2: f64, flags: &mut Vec<String>| {
        if b2 < beta1 {
            flags.push(format!("beta2: estimate {b2:e} below beta1; set to beta1"));
            beta1
        } else {
            b2
        }
    };

    let seed_beta2 = if detected.is_empty() {
        flags.push(format!(
            "buzz: threshold detector found no period; restoration seeded with beta2 = {} beta1",
            cfg.buzz_seed_ratio
        ));
        beta1 * cfg.buzz_seed_ratio
    } else {
        let b2 = estimate_beta2(path, &detected, &frozen(&detected)?, l)
            .map_err(|e| e.at_stage("beta2"))?;
        clamp_beta2(b2, &mut flags)
    };

    let mut b2 = seed_beta2;
    let mut spans = regime_spans(
        &gaps,
        &restore_regimes(&gaps, beta1, b2, l, cfg.switch_penalty),
    );
    for _ in 0..cfg.refine_rounds {
        let buzz = buzz_spans(&spans);
        if buzz.is_empty() {
            break;
        }
        let next = match estimate_beta2(path, &buzz, &frozen(&buzz)?, l) {
            Ok(v) => v.max(beta1),
            Err(_) => break,
        };
        let done = (next - b2).abs() <= 1e-6 * b2;
        b2 = next;
        spans = regime_spans(
            &gaps,
            &restore_regimes(&gaps, beta1, b2, l, cfg.switch_penalty),
        );
        if done {
            break;
        }
    }

    let (beta2, regime_hat, buzz_intervals, a1, a2) = if buzz_spans(&spans).is_empty() {
        flags.push("buzz: no buzz span restored; beta2 = beta1, a1 = 1/T, a2 = gamma".into());
        (
            beta1,
            whole_span(&gaps, path),
            Vec::new(),
            1.0 / duration,
            gamma,
        )
    } else {
        let rates = estimate_transition_rates(&spans).map_err(|e| e.at_stage("a1a2"))?;
        let a1 = rates.a1.unwrap_or_else(|| {
            flags.push("a1: buzz-free regime never left; a1 = 1/T".into());
            1.0 / duration
        });
        let a2 = rates.a2.unwrap_or_else(|| {
            flags.push("a2: buzz regime never left; a2 = gamma".into());
            gamma
        });
        let buzz = buzz_spans(&spans);
        (b2, spans, buzz, a1, a2)
    };

    let max_i = path.max_level();
    let starts: Vec<f64> = gaps.samples.iter().map(|g| g.t).collect();
    let max_r = reconstruct_r_at(path, &starts, mu, gamma, cfg.r_cap)?
        .iter()
        .map(|p| p.0)
        .fold(0.0f64, f64::max);
    let i_max = cfg.i_max.unwrap_or((4 * max_i).max(10));
    let r_max = cfg
        .r_max
        .or(cfg.r_cap)
        .unwrap_or(((4.0 * max_r).ceil() as u32).max(10));

    let params_hat = ModelParams {
        beta1,
        beta2,
        gamma,
        mu,
        l,
        a1,
        a2,
        i_max,
        r_max,
    };
    params_hat.validate().map_err(|e| e.at_stage("assemble"))?;

    let (t0, dt, n) = match grid {
        Some(g) => g,
        None => {
            let n = cfg.r_hat_points.max(2);
            (path.t0(), duration / (n - 1) as f64, n)
        }
    };
    let times: Vec<f64> = (0..n).map(|k| t0 + k as f64 * dt).collect();
    let r_hat = RHat {
        t0,
        dt,
        values: reconstruct_r_at(path, &times, mu, gamma, Some(r_max))?
            .into_iter()
            .map(|p| p.0)
            .collect(),
    };

    for f in &flags {
        log::info!("estimation: {f}");
    }
    Ok(EstimationResult {
        params_hat,
        r_hat,
        regime_hat,
        diagnostics: Diagnostics {
            t_mu_curve: mu_est
                .curve
                .iter()
                .map(|&(m, t)| (m, (!t.is_nan()).then_some(t)))
                .collect(),
            regression_points: points,
            buzz_intervals,
            detected_intervals: detected,
            burn_in_end: mu_est.burn_in_end,
            n_gaps: gaps.len(),
            flags,
        },
    })
}

fn whole_span(gaps: &InterArrivalSet, path: &WorkloadPath) -> Vec<RegimeSpan> {
    let start = gaps.samples.first().map_or(path.t0(), |g| g.t);
    let end = gaps.samples.last().map_or(path.t_end(), |g| g.t + g.w);
    vec![RegimeSpan {
        start,
        end,
        regime: Regime::BuzzFree,
    }]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemState;
    use crate::presets;
    use crate::simulator::{simulate, Horizon};

    fn demo_path(seed: u64) -> WorkloadPath {
        let p = presets::fitted_trace1();
        let init = SystemState::mean_field(&p).unwrap();
        let tr = simulate(&p, init, Horizon::Events(200_000), seed).unwrap();
        WorkloadPath::from_trace(&tr)
    }

    #[test]
    fn pipeline_is_deterministic() {
        let path = demo_path(3);
        let cfg = EstimationConfig {
            mu_grid_points: 12,
            ..Default::default()
        };
        let a = estimate_all(&path, &cfg).unwrap();
        let b = estimate_all(&path, &cfg).unwrap();
        assert_eq!(a, b);
        a.params_hat.validate().unwrap();
        let iv = &a.diagnostics.buzz_intervals;
        assert!(iv.windows(2).all(|w| w[0].1 <= w[1].0));
    }

    #[test]
    fn time_compression_scales_rates() {
        let path = demo_path(4);
        let cfg = EstimationConfig {
            mu_grid_points: 12,
            ..Default::default()
        };
        let s = 8.0;
        let a = estimate_all(&path, &cfg).unwrap().params_hat;
        let b = estimate_all(&path.compress_time(s), &cfg)
            .unwrap()
            .params_hat;
        for (x, y) in [
            (a.gamma, b.gamma),
            (a.mu, b.mu),
            (a.beta1, b.beta1),
            (a.beta2, b.beta2),
            (a.l, b.l),
            (a.a1, b.a1),
            (a.a2, b.a2),
        ] {
            assert!((y / (s * x) - 1.0).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn json_round_trip() {
        let path = demo_path(5);
        let cfg = EstimationConfig {
            mu_grid_points: 6,
            r_hat_points: 16,
            ..Default::default()
        };
        let res = estimate_all(&path, &cfg).unwrap();
        let back: EstimationResult = serde_json::from_str(&res.to_json_pretty()).unwrap();
        assert_eq!(back.params_hat, res.params_hat);
        assert_eq!(back.r_hat.values.len(), 16);
    }
}
