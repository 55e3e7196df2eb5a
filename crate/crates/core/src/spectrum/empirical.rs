//! Multi-scale spectrum of an observed trace from window integrals.

use rayon::prelude::*;

use super::curve::{SpectrumCurve, SpectrumPoint};
use crate::error::{Error, Result};
use crate::path::WorkloadPath;
use crate::series::WorkloadSeries;

/// Spectrum at scale `tau` of a sampled series; `tau` must be a multiple of
/// the sampling step.
pub fn empirical_spectrum(
    series: &WorkloadSeries,
    tau: f64,
    q_grid: &[f64],
) -> Result<SpectrumCurve> {
    series.check()?;
    let steps = tau / series.dt;
    if !(steps >= 1.0) || (steps - steps.round()).abs() > 1e-6 * steps {
        return Err(Error::InvalidArgument(format!(
            "tau = {tau} is not a multiple of the step {}",
            series.dt
        )));
    }
    let m = steps.round() as usize;
    let y: Vec<f64> = series
        .i
        .chunks_exact(m)
        .map(|c| c.iter().map(|&v| f64::from(v)).sum::<f64>() * series.dt)
        .collect();
    spectrum_from_integrals(&y, tau, q_grid)
}

/// Spectrum at scale `tau` of an exact path.
pub fn empirical_spectrum_path(
    path: &WorkloadPath,
    tau: f64,
    q_grid: &[f64],
) -> Result<SpectrumCurve> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tau must be > 0, got {tau}"
        )));
    }
    spectrum_from_integrals(&path.window_integrals(tau), tau, q_grid)
}

/// Tilted moments of the window integrals `y`:
/// `Lambda = log(mean e^{q y}) / tau`, `alpha = <y>_q / tau`,
/// `eps = sqrt(Var_q(y)) / tau`, and `f = log(share of windows with
/// y / tau in [alpha - eps, alpha + eps]) / tau`.
pub fn spectrum_from_integrals(y: &[f64], tau: f64, q_grid: &[f64]) -> Result<SpectrumCurve> {
    if y.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} windows of length {tau}, need at least 2",
            y.len()
        )));
    }
    if q_grid.iter().any(|q| !q.is_finite()) {
        return Err(Error::InvalidArgument("tilts must be finite".into()));
    }
    let k = y.len() as f64;
    let mut means: Vec<f64> = y.iter().map(|v| v / tau).collect();
    means.sort_by(|a, b| a.total_cmp(b));
    let mut points: Vec<SpectrumPoint> = q_grid
        .par_iter()
        .map(|&q| {
            let top = y.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(q * v));
            let w: Vec<f64> = y.iter().map(|&v| (q * v - top).exp()).collect();
            let s0: f64 = w.iter().sum();
            let mean = w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / s0;
            let var = w
                .iter()
                .zip(y)
                .map(|(a, b)| a * (b - mean) * (b - mean))
                .sum::<f64>()
                / s0;
            let lambda = (top + (s0 / k).ln()) / tau;
            let alpha = mean / tau;
            let eps = var.max(0.0).sqrt() / tau;
            let lo = means.partition_point(|&m| m < alpha - eps);
            let hi = means.partition_point(|&m| m <= alpha + eps);
            let count = hi - lo;
            let f = if count == 0 {
                f64::NEG_INFINITY
            } else {
                (count as f64 / k).ln() / tau
            };
            SpectrumPoint {
                q,
                lambda,
                alpha,
                f,
                eps,
            }
        })
        .collect();
    points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.q.total_cmp(&b.q)));
    Ok(SpectrumCurve { tau, points })
}

/// Spectra at several scales.
pub fn empirical_spectra(
    path: &WorkloadPath,
    taus: &[f64],
    q_grid: &[f64],
) -> Result<Vec<SpectrumCurve>> {
    taus.iter()
        .map(|&t| empirical_spectrum_path(path, t, q_grid))
        .collect()
}
