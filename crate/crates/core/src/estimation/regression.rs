//! Nominal dissemination rate and spontaneous rate by weighted regression of
//! the reciprocal conditional mean gap on the population.

use serde::{Deserialize, Serialize};

use super::gaps::InterArrivalSet;
use crate::error::{Error, Result};

/// One level `x` of the regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionPoint {
    pub x: f64,
    /// `1 / Omega(x)`, reciprocal of the mean gap at that level.
    pub omega_inv: f64,
    /// Number of gaps at that level.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub beta1: f64,
    pub l: f64,
    pub points: Vec<RegressionPoint>,
}

/// Conditional mean gaps for every level with at least `min_group` samples.
pub fn regression_points(gaps: &InterArrivalSet, min_group: usize) -> Vec<RegressionPoint> {
    let mut keyed: Vec<(u32, f64)> = gaps.samples.iter().map(|s| (s.x, s.w)).collect();
    keyed.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let mut out = Vec::new();
    let mut start = 0;
    while start < keyed.len() {
        let mut end = start;
        while end < keyed.len() && keyed[end].0 == keyed[start].0 {
            end += 1;
        }
        let n = end - start;
        if n >= min_group.max(1) {
            let mean = keyed[start..end].iter().map(|g| g.1).sum::<f64>() / n as f64;
            out.push(RegressionPoint {
                x: f64::from(keyed[start].0),
                omega_inv: 1.0 / mean,
                weight: n as f64,
            });
        }
        start = end;
    }
    out
}

/// Weighted least-squares line `omega_inv = l + beta1 x`.
pub fn weighted_line(points: &[RegressionPoint]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} populated levels, need at least 3",
            points.len()
        )));
    }
    let sw: f64 = points.iter().map(|p| p.weight).sum();
    let mx = points.iter().map(|p| p.weight * p.x).sum::<f64>() / sw;
    let my = points.iter().map(|p| p.weight * p.omega_inv).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|p| p.weight * (p.x - mx).powi(2)).sum();
    let sxy: f64 = points
        .iter()
        .map(|p| p.weight * (p.x - mx) * (p.omega_inv - my))
        .sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData(
            "all gaps share a single level".into(),
        ));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Fits `beta1` (slope) and `l` (intercept). A negative slope or intercept
/// is reported as an estimation failure.
pub fn estimate_beta1_l(gaps: &InterArrivalSet, min_group: usize) -> Result<LinearFit> {
    let points = regression_points(gaps, min_group);
    let (beta1, l) = weighted_line(&points)?;
    if !(beta1 > 0.0) {
        return Err(Error::EstimationFailure(format!(
            "fitted slope {beta1:e} is not positive"
        )));
    }
    if !(l > 0.0) {
        return Err(Error::EstimationFailure(format!(
            "fitted intercept {l:e} is not positive"
        )));
    }
    Ok(LinearFit { beta1, l, points })
}

/// Weighted fit of the slope alone, with the intercept held at `l`.
pub fn fit_slope_with_intercept(points: &[RegressionPoint], l: f64) -> Result<f64> {
    let sxx: f64 = points.iter().map(|p| p.weight * p.x * p.x).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData(
            "no populated level above zero".into(),
        ));
    }
    let sxy: f64 = points
        .iter()
        .map(|p| p.weight * p.x * (p.omega_inv - l))
        .sum();
    let slope = sxy / sxx;
    if !(slope > 0.0) {
        return Err(Error::EstimationFailure(format!(
            "fitted slope {slope:e} is not positive"
        )));
    }
    Ok(slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pt(x: f64, y: f64, w: f64) -> RegressionPoint {
        RegressionPoint {
            x,
            omega_inv: y,
            weight: w,
        }
    }

    #[test]
    fn exact_line() {
        let pts: Vec<_> = (1..=5)
            .map(|x| pt(x as f64, 0.5 + 2.0 * x as f64, x as f64))
            .collect();
        let (b, l) = weighted_line(&pts).unwrap();
        assert_relative_eq!(b, 2.0, max_relative = 1e-12);
        assert_relative_eq!(l, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn weights_pull_the_line() {
        let pts = vec![pt(0.0, 0.0, 1.0), pt(1.0, 1.0, 1.0), pt(2.0, 10.0, 1e-9)];
        let (b, _) = weighted_line(&pts).unwrap();
        assert!((b - 1.0).abs() < 1e-6);
    }

    #[test]
    fn single_level_is_degenerate() {
        let gaps = InterArrivalSet::from_triples((0..50).map(|k| (k as f64, 1.0, 7)));
        assert!(estimate_beta1_l(&gaps, 5).is_err());
    }

    #[test]
    fn negative_intercept_fails() {
        let gaps = InterArrivalSet::from_triples((0..300).map(|k| {
            let x = 1 + (k % 3) as u32;
            (k as f64, 1.0 / (f64::from(x) - 0.5), x)
        }));
        assert!(matches!(
            estimate_beta1_l(&gaps, 5),
            Err(Error::EstimationFailure(_))
        ));
    }

    #[test]
    fn slope_with_fixed_intercept() {
        let pts: Vec<_> = (1..=4)
            .map(|x| pt(x as f64, 0.1 + 3.0 * x as f64, 2.0))
            .collect();
        assert_relative_eq!(
            fit_slope_with_intercept(&pts, 0.1).unwrap(),
            3.0,
            max_relative = 1e-12
        );
    }
}
