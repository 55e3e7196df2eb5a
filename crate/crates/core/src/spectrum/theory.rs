//! Principal eigenvalue of the tilted generator and its Legendre transform.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::band::BandLu;
use super::curve::{SpectrumCurve, SpectrumPoint};
use super::matrix::RateMatrix;
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Operator the power iteration runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenMethod {
    /// `B = I + (A + q Phi) / c`.
    Uniformized,
    /// `(sigma - A - q Phi)^-1` with `sigma` just above the principal
    /// eigenvalue, factored once per shift by banded LU. Falls back to
    /// `Uniformized` when the band storage would exceed `band_limit`.
    ShiftInvert,
}

/// Stopping rule of the power iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    /// Relative change of the eigenvalue quotient between two iterations
    /// below which the iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    pub method: EigenMethod,
    /// Largest band factorization, in `f64` slots.
    pub band_limit: usize,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 5_000_000,
            method: EigenMethod::ShiftInvert,
            band_limit: 50_000_000,
        }
    }
}

/// Result of one eigenvalue solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Scgf {
    pub lambda: f64,
    /// Positive right eigenvector, normalised to sum 1.
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// Width of the final Collatz-Wielandt bracket on `lambda`.
    pub bracket: f64,
}

/// Observable `Phi(i, r, regime) = i` on every state.
pub fn workload_observable(m: &RateMatrix) -> Vec<f64> {
    (0..m.dim()).map(|k| f64::from(m.state(k).i)).collect()
}

/// `Lambda(q)`: principal eigenvalue of `A + q diag(Phi)`, optionally
/// warm-started from a positive vector.
pub fn scgf_with(
    m: &RateMatrix,
    phi: &[f64],
    q: f64,
    start: Option<&[f64]>,
    cfg: &PowerConfig,
) -> Result<Scgf> {
    let n = m.dim();
    if phi.len() != n {
        return Err(Error::InvalidArgument(format!(
            "observable has {} entries for {n} states",
            phi.len()
        )));
    }
    if !q.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "tilt must be finite, got {q}"
        )));
    }
    let (kl, ku) = m.bandwidths();
    match cfg.method {
        EigenMethod::ShiftInvert if BandLu::storage(n, kl, ku) <= cfg.band_limit => {
            shift_invert(m, phi, q, start, cfg)
        }
        _ => uniformized(m, phi, q, start, cfg),
    }
}

/// Quotient `sum (A + q Phi) v / sum v` and the range of the ratios
/// `((A + q Phi) v)_k / v_k`, which brackets the principal eigenvalue for
/// any positive `v`.
fn quotient(m: &RateMatrix, shift: &[f64], v: &[f64], work: &mut [f64]) -> Option<(f64, f64, f64)> {
    m.mul_vec(v, shift, work);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..v.len() {
        if !(v[k] > 0.0) {
            return None;
        }
        let ratio = work[k] / v[k];
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        num += work[k];
        den += v[k];
    }
    Some((num / den, lo, hi))
}

/// Tracks the quotient between iterations.
struct Convergence {
    tol: f64,
    last: f64,
}

impl Convergence {
    /// Converged once the quotient moves by less than `tol` relative and the
    /// ratio bracket is below `sqrt(tol)` relative.
    fn done(&mut self, est: f64, lo: f64, hi: f64) -> bool {
        let scale = est.abs().max(1.0);
        let change = (est - self.last).abs();
        self.last = est;
        change <= self.tol * scale && hi - lo <= self.tol.sqrt() * scale
    }
}

fn start_vector(start: Option<&[f64]>, n: usize) -> Vec<f64> {
    let mut v = match start {
        Some(s) if s.len() == n && s.iter().all(|&x| x > 0.0 && x.is_finite()) => s.to_vec(),
        _ => vec![1.0; n],
    };
    normalise(&mut v);
    v
}

fn shift_invert(
    m: &RateMatrix,
    phi: &[f64],
    q: f64,
    start: Option<&[f64]>,
    cfg: &PowerConfig,
) -> Result<Scgf> {
    let n = m.dim();
    let shift: Vec<f64> = phi.iter().map(|&p| q * p).collect();
    let mut v = start_vector(start, n);
    let mut work = vec![0.0; n];
    let (_, mut lo, mut hi) = quotient(m, &shift, &v, &mut work).expect("positive start");
    let scale = m.max_exit_rate() + shift.iter().fold(0.0f64, |a, &s| a.max(s.abs()));
    let (kl, ku) = m.bandwidths();
    let factor = |sigma: f64| {
        BandLu::factor(n, kl, ku, |r, set| {
            set(r, sigma - m.diagonal()[r] - shift[r]);
            for (c, val) in m.row(r) {
                set(c, -val);
            }
        })
    };
    let offset = |lo: f64, hi: f64| (1e-3 * (hi - lo)).max(1e-9 * scale.max(1.0));
    let mut sigma = hi + offset(lo, hi);
    let mut lu = factor(sigma)?;
    let mut conv = Convergence {
        tol: cfg.tol,
        last: f64::NAN,
    };
    for it in 1..=cfg.max_iter.min(10_000) {
        let mut w = v.clone();
        lu.solve(&mut w);
        let Some((est, a, b)) = (w.iter().all(|x| *x > 0.0))
            .then(|| {
                normalise(&mut w);
                quotient(m, &shift, &w, &mut work)
            })
            .flatten()
        else {
            // roundoff lost positivity in some far state: widen the shift
            sigma = hi + 10.0 * (sigma - hi);
            lu = factor(sigma)?;
            continue;
        };
        v = w;
        lo = lo.max(a);
        hi = hi.min(b);
        if conv.done(est, a, b) {
            return Ok(Scgf {
                lambda: est,
                vector: v,
                iterations: it,
                bracket: b - a,
            });
        }
        let target = hi + offset(lo, hi);
        if it % 8 == 0 && sigma - hi > 100.0 * (target - hi) {
            sigma = target;
            lu = factor(sigma)?;
        }
    }
    Err(Error::Numerical {
        message: format!("shift-invert iteration at q = {q} did not converge"),
        residual: hi - lo,
    })
}

fn uniformized(
    m: &RateMatrix,
    phi: &[f64],
    q: f64,
    start: Option<&[f64]>,
    cfg: &PowerConfig,
) -> Result<Scgf> {
    let n = m.dim();
    let shift: Vec<f64> = phi.iter().map(|&p| q * p).collect();
    let phi_max = phi.iter().fold(0.0f64, |a, &p| a.max(p.abs()));
    let c = 1.05 * (m.max_exit_rate() + q.abs() * phi_max) + 1e-12;
    let mut v = start_vector(start, n);
    let mut work = vec![0.0; n];
    let mut conv = Convergence {
        tol: cfg.tol,
        last: f64::NAN,
    };
    let mut bracket = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let (est, lo, hi) = quotient(m, &shift, &v, &mut work).ok_or_else(|| Error::Numerical {
            message: format!("power iteration at q = {q} lost positivity"),
            residual: bracket,
        })?;
        bracket = hi - lo;
        if conv.done(est, lo, hi) {
            return Ok(Scgf {
                lambda: est,
                vector: v,
                iterations: it,
                bracket,
            });
        }
        for k in 0..n {
            work[k] = v[k] + work[k] / c;
        }
        normalise(&mut work);
        std::mem::swap(&mut v, &mut work);
    }
    Err(Error::Numerical {
        message: format!(
            "power iteration at q = {q} did not converge in {} steps",
            cfg.max_iter
        ),
        residual: bracket,
    })
}

/// `Lambda(q)` for the observable `i`.
pub fn scgf(m: &RateMatrix, q: f64) -> Result<f64> {
    let phi = workload_observable(m);
    Ok(scgf_with(m, &phi, q, None, &PowerConfig::default())?.lambda)
}

/// `Lambda` over a grid. The grid is split into one contiguous chunk per
/// worker and each solve starts from its neighbour's eigenvector.
pub fn scgf_curve(m: &RateMatrix, q_grid: &[f64], cfg: &PowerConfig) -> Result<Vec<f64>> {
    let phi = workload_observable(m);
    let workers = rayon::current_num_threads().max(1);
    let chunk = q_grid.len().div_ceil(workers).max(1);
    let parts: Vec<Result<Vec<f64>>> = q_grid
        .par_chunks(chunk)
        .map(|qs| {
            let mut warm: Option<Vec<f64>> = None;
            let mut out = Vec::with_capacity(qs.len());
            for &q in qs {
                let s = scgf_with(m, &phi, q, warm.as_deref(), cfg)?;
                out.push(s.lambda);
                warm = Some(s.vector);
            }
            Ok(out)
        })
        .collect();
    let mut out = Vec::with_capacity(q_grid.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Stationary law `pi A = 0`: inverse iteration with a tiny shift on the
/// transposed generator, or uniformized power iteration when the band is
/// too wide.
pub fn stationary_distribution(m: &RateMatrix, cfg: &PowerConfig) -> Result<Vec<f64>> {
    let n = m.dim();
    let scale = m.max_exit_rate().max(1e-300);
    let zero = vec![0.0; n];
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    let residual = |x: &[f64], y: &mut [f64]| {
        m.vec_mul(x, &zero, y);
        y.iter().map(|v| v.abs()).sum::<f64>() / scale
    };
    let (kl, ku) = m.bandwidths();
    if cfg.method == EigenMethod::ShiftInvert && BandLu::storage(n, ku, kl) <= cfg.band_limit {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for r in 0..n {
            for (c, v) in m.row(r) {
                cols[c].push((r, v));
            }
        }
        let sigma = 1e-10 * scale;
        let lu = BandLu::factor(n, ku, kl, |r, set| {
            set(r, sigma - m.diagonal()[r]);
            for &(c, v) in &cols[r] {
                set(c, -v);
            }
        })?;
        let mut res = f64::INFINITY;
        for _ in 0..100 {
            lu.solve(&mut x);
            x.iter_mut().for_each(|v| *v = v.max(0.0));
            normalise(&mut x);
            res = residual(&x, &mut y);
            if res <= cfg.tol.max(1e-14) {
                return Ok(x);
            }
        }
        return Err(Error::Numerical {
            message: "stationary inverse iteration did not converge".into(),
            residual: res,
        });
    }
    let c = 1.05 * scale;
    let mut res = f64::INFINITY;
    for it in 0..cfg.max_iter {
        m.vec_mul(&x, &zero, &mut y);
        for k in 0..n {
            y[k] = x[k] + y[k] / c;
        }
        normalise(&mut y);
        std::mem::swap(&mut x, &mut y);
        if it % 64 == 0 {
            res = residual(&x, &mut y);
            if res <= cfg.tol {
                return Ok(x);
            }
        }
    }
    Err(Error::Numerical {
        message: "stationary power iteration did not converge".into(),
        residual: res,
    })
}

/// Mean of `i` under a distribution over the states of `m`.
pub fn mean_workload_of(m: &RateMatrix, pi: &[f64]) -> f64 {
    pi.iter()
        .enumerate()
        .map(|(k, &p)| p * f64::from(m.state(k).i))
        .sum()
}

/// Marginal law of `i` under a distribution over the states of `m`.
pub fn workload_marginal(m: &RateMatrix, pi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.i_max as usize + 1];
    for (k, &p) in pi.iter().enumerate() {
        out[m.state(k).i as usize] += p;
    }
    out
}

/// Default tilts: `n` points on `[-3, 3] / i_max`.
pub fn default_q_grid(i_max: u32, n: usize) -> Vec<f64> {
    let h = 3.0 / f64::from(i_max.max(1));
    linspace(-h, h, n)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Derivative of samples `y` over the strictly increasing grid `x`: three
/// point centred differences inside, one-sided at both ends.
pub fn grid_derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| {
            if k == 0 {
                (y[1] - y[0]) / (x[1] - x[0])
            } else if k == n - 1 {
                (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2])
            } else {
                let (h0, h1) = (x[k] - x[k - 1], x[k + 1] - x[k]);
                (y[k + 1] * h0 * h0 - y[k - 1] * h1 * h1 + y[k] * (h1 * h1 - h0 * h0))
                    / (h0 * h1 * (h0 + h1))
            }
        })
        .collect()
}

/// Legendre transform of `Lambda` on a tilt grid:
/// `alpha = Lambda'(q)`, `f = Lambda(q) - q alpha`, sorted by `alpha`.
pub fn legendre_curve(q_grid: &[f64], lambda: &[f64]) -> Result<SpectrumCurve> {
    if q_grid.len() < 3 || q_grid.len() != lambda.len() {
        return Err(Error::InvalidArgument(
            "need at least 3 tilts with one Lambda value each".into(),
        ));
    }
    if q_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "tilts must be strictly increasing".into(),
        ));
    }
    let alpha = grid_derivative(q_grid, lambda);
    let mut points: Vec<SpectrumPoint> = q_grid
        .iter()
        .zip(lambda)
        .zip(alpha)
        .map(|((&q, &l), a)| SpectrumPoint {
            q,
            lambda: l,
            alpha: a,
            f: l - q * a,
            eps: 0.0,
        })
        .collect();
    points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.q.total_cmp(&b.q)));
    Ok(SpectrumCurve {
        tau: f64::INFINITY,
        points,
    })
}

/// Theoretical spectrum of the model over a tilt grid.
pub fn theoretical_spectrum(params: &ModelParams, q_grid: &[f64]) -> Result<SpectrumCurve> {
    let m = RateMatrix::build(params)?;
    theoretical_spectrum_of(&m, q_grid, &PowerConfig::default())
}

pub fn theoretical_spectrum_of(
    m: &RateMatrix,
    q_grid: &[f64],
    cfg: &PowerConfig,
) -> Result<SpectrumCurve> {
    let lambda = scgf_curve(m, q_grid, cfg)?;
    legendre_curve(q_grid, &lambda)
}

fn normalise(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}
