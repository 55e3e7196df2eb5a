use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One tilt of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub q: f64,
    pub lambda: f64,
    pub alpha: f64,
    /// `f <= 0`; `-inf` marks an empty bin of an empirical spectrum.
    pub f: f64,
    /// Bin half-width, 0 for a theoretical curve.
    pub eps: f64,
}

impl SpectrumPoint {
    /// `f` in base-2 logarithm units.
    pub fn f_log2(&self) -> f64 {
        self.f / std::f64::consts::LN_2
    }
}

/// Spectrum at one time scale; `tau = inf` for the theoretical curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCurve {
    pub tau: f64,
    /// Sorted by `alpha`.
    pub points: Vec<SpectrumPoint>,
}

impl SpectrumCurve {
    pub fn is_theoretical(&self) -> bool {
        self.tau.is_infinite()
    }

    /// Points with a finite spectrum value.
    pub fn finite(&self) -> impl Iterator<Item = &SpectrumPoint> {
        self.points.iter().filter(|p| p.f.is_finite())
    }

    /// Point of largest `f`.
    pub fn apex(&self) -> Option<SpectrumPoint> {
        self.finite().copied().fold(None, |best, p| match best {
            Some(b) if b.f >= p.f => Some(b),
            _ => Some(p),
        })
    }

    /// Range of `alpha` over the finite points.
    pub fn support(&self) -> Option<(f64, f64)> {
        let mut it = self.finite().map(|p| p.alpha);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), a| (lo.min(a), hi.max(a))))
    }

    /// `(alpha, f)` of the finite points, sorted by `alpha`, duplicates of
    /// `alpha` collapsed to their largest `f`.
    pub fn profile(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self.finite().map(|p| (p.alpha, p.f)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for (a, f) in pts {
            match out.last_mut() {
                Some(last) if last.0 == a => last.1 = last.1.max(f),
                _ => out.push((a, f)),
            }
        }
        out
    }

    /// Linear interpolation of `f` at `alpha`; `-inf` outside the support.
    pub fn f_at(&self, alpha: f64) -> f64 {
        interpolate(&self.profile(), alpha)
    }
}

pub(crate) fn interpolate(profile: &[(f64, f64)], alpha: f64) -> f64 {
    let n = profile.len();
    if n == 0 || alpha < profile[0].0 || alpha > profile[n - 1].0 {
        return f64::NEG_INFINITY;
    }
    let k = profile.partition_point(|p| p.0 < alpha);
    if k < n && profile[k].0 == alpha {
        return profile[k].1;
    }
    let (a0, f0) = profile[k - 1];
    let (a1, f1) = profile[k];
    f0 + (f1 - f0) * (alpha - a0) / (a1 - a0)
}

const HEADER: [&str; 7] = ["tau", "q", "lambda", "alpha", "f", "eps", "f_log2"];

/// Writes `tau,q,lambda,alpha,f,eps,f_log2`, one row per point.
pub fn write_spectra_csv<W: Write>(curves: &[SpectrumCurve], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HEADER)?;
    for c in curves {
        for p in &c.points {
            out.write_record([
                fmt(c.tau),
                fmt(p.q),
                fmt(p.lambda),
                fmt(p.alpha),
                fmt(p.f),
                fmt(p.eps),
                fmt(p.f_log2()),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn save_spectra_csv(curves: &[SpectrumCurve], path: impl AsRef<Path>) -> Result<()> {
    write_spectra_csv(curves, std::fs::File::create(path)?)
}

fn fmt(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

/// Reads curves back, one per distinct `tau` in order of first appearance.
pub fn read_spectra_csv<R: Read>(r: R) -> Result<Vec<SpectrumCurve>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing column `{name}`"),
            })
    };
    let idx = [
        col("tau")?,
        col("q")?,
        col("lambda")?,
        col("alpha")?,
        col("f")?,
        col("eps")?,
    ];
    let mut curves: Vec<SpectrumCurve> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k as u64 + 2;
        let mut v = [0.0; 6];
        for (slot, &c) in v.iter_mut().zip(&idx) {
            let s = rec.get(c).unwrap_or("").trim();
            *slot = s.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("not a number: `{s}`"),
            })?;
        }
        let p = SpectrumPoint {
            q: v[1],
            lambda: v[2],
            alpha: v[3],
            f: v[4],
            eps: v[5],
        };
        match curves.iter_mut().find(|c| c.tau == v[0]) {
            Some(c) => c.points.push(p),
            None => curves.push(SpectrumCurve {
                tau: v[0],
                points: vec![p],
            }),
        }
    }
    for c in &mut curves {
        c.points
            .sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.q.total_cmp(&b.q)));
    }
    Ok(curves)
}

pub fn load_spectra_csv(path: impl AsRef<Path>) -> Result<Vec<SpectrumCurve>> {
    read_spectra_csv(std::fs::File::open(path)?)
}
