//! Operational numbers read off a spectrum: reconfiguration time scale,
//! capacity safety margin and the number of servers a link can host.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::WorkloadPath;
use crate::spectrum::SpectrumCurve;

/// Points of the trapezoidal rule in the margin quadrature.
const QUAD_POINTS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overflow {
    pub tau: f64,
    pub probability: f64,
    /// `alpha_star` lies beyond the support of the curve.
    pub beyond_support: bool,
}

/// `integral over [alpha_star, alpha_max] of exp(tau f_tau(alpha))`, by
/// trapezoids on the finite points of the curve.
pub fn overflow_probability(curve: &SpectrumCurve, alpha_star: f64) -> Result<Overflow> {
    let tau = curve.tau;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "overflow needs a finite time scale, got tau = {tau}"
        )));
    }
    let prof = curve.profile();
    let Some(&(hi, _)) = prof.last() else {
        return Err(Error::InsufficientData(
            "spectrum has no finite point".into(),
        ));
    };
    if alpha_star > hi {
        return Ok(Overflow {
            tau,
            probability: 0.0,
            beyond_support: true,
        });
    }
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(prof.len() + 1);
    if alpha_star > prof[0].0 {
        pts.push((alpha_star, curve.f_at(alpha_star)));
    }
    pts.extend(prof.iter().copied().filter(|p| p.0 >= alpha_star));
    let weight = |f: f64| if f.is_finite() { (tau * f).exp() } else { 0.0 };
    let mut total = 0.0;
    for w in pts.windows(2) {
        total += 0.5 * (weight(w[0].1) + weight(w[1].1)) * (w[1].0 - w[0].0);
    }
    Ok(Overflow {
        tau,
        probability: total,
        beyond_support: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconfigurationScale {
    pub tau_star: f64,
    /// Overflow probability at `tau_star`.
    pub probability: f64,
    /// No candidate reached `sigma_star`; `tau_star` is the smallest one.
    pub not_found: bool,
}

/// Largest `tau` among the curves whose overflow probability beyond
/// `alpha_star` is at least `sigma_star`.
pub fn reconfiguration_scale(
    curves: &[SpectrumCurve],
    alpha_star: f64,
    sigma_star: f64,
) -> Result<ReconfigurationScale> {
    let mut finite: Vec<&SpectrumCurve> = curves.iter().filter(|c| c.tau.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::InvalidArgument(
            "no empirical time scale to choose from".into(),
        ));
    }
    if !(sigma_star > 0.0 && sigma_star <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma_star must lie in (0, 1], got {sigma_star}"
        )));
    }
    finite.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    let probs = finite
        .iter()
        .map(|c| overflow_probability(c, alpha_star))
        .collect::<Result<Vec<_>>>()?;
    match probs.iter().rev().find(|o| o.probability >= sigma_star) {
        Some(o) => Ok(ReconfigurationScale {
            tau_star: o.tau,
            probability: o.probability,
            not_found: false,
        }),
        None => Ok(ReconfigurationScale {
            tau_star: probs[0].tau,
            probability: probs[0].probability,
            not_found: true,
        }),
    }
}

/// Loss weight of provisioning capacity `c` with a buffer of `q`:
/// `integral over (c, alpha_end] of (-1/f) exp(q f / (alpha - c))`,
/// starting one quadrature step above `c`.
pub fn loss_integral(profile: &[(f64, f64)], c: f64, buffer_q: f64) -> f64 {
    let Some(&(end, _)) = profile.last() else {
        return 0.0;
    };
    if !(end > c) {
        return 0.0;
    }
    let h = (end - c) / QUAD_POINTS as f64;
    let integrand = |a: f64| {
        let f = crate::spectrum::curve_value(profile, a);
        if !(f < 0.0) || !f.is_finite() {
            return 0.0;
        }
        let expo = if buffer_q > 0.0 {
            buffer_q * f / (a - c)
        } else {
            0.0
        };
        -expo.exp() / f
    };
    let mut total = 0.0;
    let mut prev = integrand(c + h);
    for k in 2..=QUAD_POINTS {
        let a = c + h * k as f64;
        let cur = integrand(a);
        total += 0.5 * (prev + cur) * h;
        prev = cur;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyMargin {
    /// `C0 = C - alpha_as`.
    pub c0: f64,
    pub capacity: f64,
    /// `loss(C)` at the returned capacity.
    pub loss: f64,
    pub iterations: usize,
    /// `p_loss` was not reached inside the support; `C` is the support end.
    pub unreachable: bool,
}

/// Smallest capacity `C > alpha_as` whose loss integral is at most `p_loss`,
/// found by bisection to `1e-6 alpha_as`.
pub fn safety_margin(
    curve: &SpectrumCurve,
    alpha_as: f64,
    buffer_q: f64,
    p_loss: f64,
) -> Result<SafetyMargin> {
    if !(p_loss > 0.0 && p_loss < 1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "p_loss must lie in (0, 1], got {p_loss}"
        )));
    }
    if !(buffer_q >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "buffer must be >= 0, got {buffer_q}"
        )));
    }
    let profile = curve.profile();
    let Some(&(end, _)) = profile.last() else {
        return Err(Error::InsufficientData(
            "spectrum has no finite point".into(),
        ));
    };
    if !(end > alpha_as) {
        return Err(Error::InvalidArgument(format!(
            "spectrum support ends at {end}, not beyond alpha_as = {alpha_as}"
        )));
    }
    let loss = |c: f64| loss_integral(&profile, c, buffer_q);
    let tol = 1e-6 * alpha_as.abs().max(1e-12);
    let (mut lo, mut hi) = (alpha_as, end);
    // hi keeps loss <= p_loss, lo keeps loss > p_loss
    let mut hi_loss = loss(hi - tol);
    if hi_loss > p_loss {
        return Ok(SafetyMargin {
            c0: end - alpha_as,
            capacity: end,
            loss: 0.0,
            iterations: 0,
            unreachable: true,
        });
    }
    hi -= tol;
    let mut iterations = 0;
    while hi - lo > tol && iterations < 200 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let l = loss(mid);
        if l <= p_loss {
            hi = mid;
            hi_loss = l;
        } else {
            lo = mid;
        }
    }
    Ok(SafetyMargin {
        c0: hi - alpha_as,
        capacity: hi,
        loss: hi_loss,
        iterations,
        unreachable: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServerCount {
    pub k: u64,
    /// Capacity below the margin.
    pub insufficient: bool,
}

/// Largest `K` with `K alpha_as + C0 <= C`.
pub fn max_servers(capacity: f64, alpha_as: f64, c0: f64) -> Result<ServerCount> {
    if !(alpha_as > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha_as must be > 0, got {alpha_as}"
        )));
    }
    if capacity < c0 {
        return Ok(ServerCount {
            k: 0,
            insufficient: true,
        });
    }
    Ok(ServerCount {
        k: ((capacity - c0) / alpha_as + 1e-12).floor() as u64,
        insufficient: false,
    })
}

/// Fluid buffer of size `buffer_q` drained at rate `capacity` and fed by the
/// workload path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BufferLoss {
    /// Share of the time the buffer is full while the input exceeds the capacity.
    pub overflow_time: f64,
    /// Share of the offered volume that is dropped.
    pub lost_volume: f64,
}

pub fn fluid_buffer_loss(path: &WorkloadPath, capacity: f64, buffer_q: f64) -> BufferLoss {
    let mut b = 0.0f64;
    let (mut full_time, mut lost, mut offered) = (0.0, 0.0, 0.0);
    let mut t = path.t0();
    let mut level = path.initial();
    let mut step = |dt: f64, level: u32, b: &mut f64| {
        if dt <= 0.0 {
            return;
        }
        let net = f64::from(level) - capacity;
        offered += f64::from(level) * dt;
        if net > 0.0 {
            let fill = (buffer_q - *b) / net;
            if fill < dt {
                full_time += dt - fill;
                lost += net * (dt - fill);
                *b = buffer_q;
            } else {
                *b += net * dt;
            }
        } else {
            *b = (*b + net * dt).max(0.0);
        }
    };
    for k in 0..path.n_jumps() {
        let tk = path.jump_time(k);
        step(tk - t, level, &mut b);
        t = tk;
        level = path.level_after(k);
    }
    step(path.t_end() - t, level, &mut b);
    let d = path.duration();
    BufferLoss {
        overflow_time: if d > 0.0 { full_time / d } else { 0.0 },
        lost_volume: if offered > 0.0 { lost / offered } else { 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::SpectrumPoint;
    use approx::assert_relative_eq;

    /// Parabolic spectrum `f = -(alpha - 3)^2 / 2` on `[0, 10]`.
    fn parabola(tau: f64) -> SpectrumCurve {
        let points = (0..=400)
            .map(|k| {
                let a = 0.025 * k as f64;
                SpectrumPoint {
                    q: a - 3.0,
                    lambda: 0.0,
                    alpha: a,
                    f: -0.5 * (a - 3.0).powi(2),
                    eps: 0.1,
                }
            })
            .collect();
        SpectrumCurve { tau, points }
    }

    #[test]
    fn overflow_below_apex_is_gaussian_mass() {
        // integral of exp(-(a-3)^2 / 2) over [1, 10] = sqrt(2 pi) (1 - Phi(-2))
        let o = overflow_probability(&parabola(1.0), 1.0).unwrap();
        let exact = (2.0 * std::f64::consts::PI).sqrt() * (1.0 - 0.022_750_13);
        assert!((o.probability - exact).abs() < 1e-3, "{}", o.probability);
        let o = overflow_probability(&parabola(1.0), 11.0).unwrap();
        assert!(o.beyond_support && o.probability == 0.0);
    }

    #[test]
    fn overflow_decreases_with_threshold_and_scale() {
        let mut last = f64::INFINITY;
        for a in [3.5, 4.0, 5.0, 6.0] {
            let p = overflow_probability(&parabola(10.0), a)
                .unwrap()
                .probability;
            assert!(p < last);
            last = p;
            let coarse = overflow_probability(&parabola(5.0), a).unwrap().probability;
            assert!(coarse > p);
        }
    }

    #[test]
    fn reconfiguration_picks_largest_scale() {
        let curves = vec![parabola(100.0), parabola(10.0), parabola(1.0)];
        // tau = 10 gives sqrt(2 pi / 10) (1 - Phi(sqrt 10)) ~ 6.2e-4
        let r = reconfiguration_scale(&curves, 4.0, 1e-4).unwrap();
        assert_eq!(r.tau_star, 10.0);
        assert!((r.probability - 6.2e-4).abs() < 0.2e-4, "{}", r.probability);
        let r = reconfiguration_scale(&curves, 4.0, 1.0).unwrap();
        assert!(r.not_found && r.tau_star == 1.0);
        assert!(reconfiguration_scale(&[], 4.0, 0.1).is_err());
    }

    #[test]
    fn margin_meets_the_bound() {
        let c = parabola(f64::INFINITY);
        let m = safety_margin(&c, 3.0, 0.0, 1e-2).unwrap();
        assert!(!m.unreachable && m.loss <= 1e-2);
        assert!(m.iterations <= 60);
        let below = loss_integral(&c.profile(), m.capacity - 1e-3, 0.0);
        assert!(below > 1e-2);
    }

    #[test]
    fn buffer_shrinks_margin() {
        let c = parabola(f64::INFINITY);
        let m0 = safety_margin(&c, 3.0, 0.0, 1e-2).unwrap().c0;
        let m1 = safety_margin(&c, 3.0, 5.0, 1e-2).unwrap().c0;
        assert!(m1 < m0);
    }

    #[test]
    fn server_packing() {
        assert_eq!(max_servers(100.0, 9.0, 10.0).unwrap().k, 10);
        assert_eq!(max_servers(10.0, 9.0, 10.0).unwrap().k, 0);
        assert!(max_servers(5.0, 9.0, 10.0).unwrap().insufficient);
        for c in [50.0, 100.0, 333.0] {
            let k1 = max_servers(c, 7.0, 10.0).unwrap().k;
            let k2 = max_servers(2.0 * c, 7.0, 10.0).unwrap().k;
            assert!(k2 >= 2 * k1 - 1);
        }
    }

    #[test]
    fn fluid_buffer_by_hand() {
        // i = 5 on [0, 10), then 0 until 20; capacity 3, buffer 4:
        // fills in 2 time units, full for 8 and drops 2 per unit.
        let jumps: Vec<(f64, bool)> = (0..5).map(|_| (10.0, false)).collect();
        let p = WorkloadPath::new(0.0, 20.0, 5, &jumps).unwrap();
        let l = fluid_buffer_loss(&p, 3.0, 4.0);
        assert_relative_eq!(l.overflow_time, 8.0 / 20.0);
        assert_relative_eq!(l.lost_volume, 16.0 / 50.0);
    }
}
