//! Banded LU with partial pivoting.

use crate::error::{Error, Result};

/// LU factors of a banded matrix with `kl` sub- and `ku` super-diagonals.
/// Rows are stored over columns `[r - kl, r + ku + kl]` to hold pivoting
/// fill-in.
pub(crate) struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    a: Vec<f64>,
    lower: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    /// Storage in `f64` slots the factorization of an `n`-row matrix needs.
    pub fn storage(n: usize, kl: usize, ku: usize) -> usize {
        n * (2 * kl + ku + 1) + n * kl
    }

    /// Factors the matrix whose entries are produced row by row by `fill`,
    /// called with a setter `(col, value)`.
    pub fn factor(
        n: usize,
        kl: usize,
        ku: usize,
        mut fill: impl FnMut(usize, &mut dyn FnMut(usize, f64)),
    ) -> Result<Self> {
        let width = 2 * kl + ku + 1;
        let mut lu = BandLu {
            n,
            kl,
            ku,
            width,
            a: vec![0.0; n * width],
            lower: vec![0.0; n * kl],
            piv: vec![0; n],
        };
        for r in 0..n {
            let a = &mut lu.a;
            let mut set = |c: usize, v: f64| {
                debug_assert!(c + kl >= r && c <= r + ku);
                a[r * width + c + kl - r] += v;
            };
            fill(r, &mut set);
        }
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.at(k, k).abs();
            for r in k + 1..=last {
                let v = lu.at(r, k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > 0.0) {
                return Err(Error::Numerical {
                    message: format!("singular banded matrix at column {k}"),
                    residual: 0.0,
                });
            }
            lu.piv[k] = p;
            let right = (k + ku + kl).min(n - 1);
            if p != k {
                for c in k..=right {
                    let (x, y) = (lu.idx(k, c), lu.idx(p, c));
                    lu.a.swap(x, y);
                }
            }
            let pivot = lu.at(k, k);
            let w = width;
            let (head, tail) = lu.a.split_at_mut((k + 1) * w);
            // row k, columns k..=right
            let krow = &head[k * w + kl..k * w + kl + (right - k) + 1];
            for r in k + 1..=last {
                let base = (r - k - 1) * w + kl - (r - k);
                // row r, columns k..=right
                let rrow = &mut tail[base..base + (right - k) + 1];
                let m = rrow[0] / pivot;
                lu.lower[k * kl + (r - k - 1)] = m;
                rrow[0] = 0.0;
                if m != 0.0 {
                    for (x, u) in rrow[1..].iter_mut().zip(&krow[1..]) {
                        *x -= m * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        r * self.width + c + self.kl - r
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[self.idx(r, c)]
    }

    /// Solves in place.
    pub fn solve(&self, b: &mut [f64]) {
        let (n, kl) = (self.n, self.kl);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                let last = (k + kl).min(n - 1);
                for r in k + 1..=last {
                    b[r] -= self.lower[k * kl + (r - k - 1)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let right = (k + self.ku + kl).min(n - 1);
            let mut acc = b[k];
            for c in k + 1..=right {
                acc -= self.at(k, c) * b[c];
            }
            b[k] = acc / self.at(k, k);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_banded_system() {
        // tridiagonal plus one far super-diagonal, pivoting forced by a zero diagonal
        let n = 7;
        let entry = |r: usize, c: usize| -> f64 {
            if r == 2 && c == 2 {
                0.0
            } else if r == c {
                4.0 + r as f64
            } else if r + 1 == c || c + 1 == r {
                -1.0 - 0.1 * c as f64
            } else if c == r + 2 {
                0.5
            } else {
                0.0
            }
        };
        let (kl, ku) = (1, 2);
        let lu = BandLu::factor(n, kl, ku, |r, set| {
            for c in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                set(c, entry(r, c));
            }
        })
        .unwrap();
        let x: Vec<f64> = (0..n).map(|k| 1.0 + k as f64 * 0.3).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|r| (0..n).map(|c| entry(r, c) * x[c]).sum())
            .collect();
        lu.solve(&mut b);
        for k in 0..n {
            assert!((b[k] - x[k]).abs() < 1e-12, "{k}: {} vs {}", b[k], x[k]);
        }
    }
}
