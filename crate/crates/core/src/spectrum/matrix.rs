//! Sparse generator of the bounded chain over `(i, r, regime)`.

use crate::error::{Error, Result};
use crate::model::{transition_rates_unchecked, ModelParams, Regime, SystemState};

/// Largest state space [`RateMatrix::build`] accepts by default.
pub const DEFAULT_STATE_LIMIT: usize = 2_000_000;

/// Generator in compressed-row form. Off-diagonal entries only; the diagonal
/// is stored apart and equals minus the row sum.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    pub i_max: u32,
    pub r_max: u32,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
    diag: Vec<f64>,
}

impl RateMatrix {
    pub fn build(params: &ModelParams) -> Result<Self> {
        Self::build_with_limit(params, DEFAULT_STATE_LIMIT)
    }

    pub fn build_with_limit(params: &ModelParams, limit: usize) -> Result<Self> {
        params.validate()?;
        let states = state_count(params.i_max, params.r_max);
        if states > limit {
            return Err(Error::TooLarge { states, limit });
        }
        let (i_max, r_max) = (params.i_max, params.r_max);
        let mut m = RateMatrix {
            i_max,
            r_max,
            row_ptr: Vec::with_capacity(states + 1),
            col: Vec::with_capacity(4 * states),
            val: Vec::with_capacity(4 * states),
            diag: Vec::with_capacity(states),
        };
        m.row_ptr.push(0);
        for idx in 0..states {
            let s = m.state(idx);
            let rates = transition_rates_unchecked(&s, params);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(4);
            if rates.arrival > 0.0 {
                row.push((m.index(s.i + 1, s.r, s.regime), rates.arrival));
            }
            if rates.watch_end > 0.0 {
                let r = if s.r < r_max { s.r + 1 } else { s.r };
                row.push((m.index(s.i - 1, r, s.regime), rates.watch_end));
            }
            if rates.memory_end > 0.0 {
                row.push((m.index(s.i, s.r - 1, s.regime), rates.memory_end));
            }
            if rates.regime_switch > 0.0 {
                row.push((m.index(s.i, s.r, s.regime.flipped()), rates.regime_switch));
            }
            row.sort_unstable_by_key(|e| e.0);
            let mut total = 0.0;
            for (c, v) in row {
                total += v;
                m.col.push(c);
                m.val.push(v);
            }
            m.diag.push(-total);
            m.row_ptr.push(m.col.len());
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn nnz_off_diagonal(&self) -> usize {
        self.val.len()
    }

    /// Flat index of `(i, r, regime)`: `((r (i_max + 1)) + i) 2 + regime`.
    pub fn index(&self, i: u32, r: u32, regime: Regime) -> usize {
        ((r as usize * (self.i_max as usize + 1)) + i as usize) * 2 + regime.index()
    }

    pub fn state(&self, idx: usize) -> SystemState {
        let regime = if idx % 2 == 0 {
            Regime::BuzzFree
        } else {
            Regime::Buzz
        };
        let cell = idx / 2;
        let width = self.i_max as usize + 1;
        SystemState {
            i: (cell % width) as u32,
            r: (cell / width) as u32,
            regime,
        }
    }

    /// Entry `(row, col)`, diagonal included.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        if row == col {
            return self.diag[row];
        }
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col[span.clone()].binary_search(&col) {
            Ok(k) => self.val[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Off-diagonal entries of one row as `(col, rate)`.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col[span.clone()]
            .iter()
            .copied()
            .zip(self.val[span].iter().copied())
    }

    /// Dense copy, row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = vec![vec![0.0; n]; n];
        for (r, row) in out.iter_mut().enumerate() {
            row[r] = self.diag[r];
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        out
    }

    /// Lower and upper bandwidths of the off-diagonal pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for r in 0..self.dim() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col[k];
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }

    /// Largest total exit rate.
    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |m, &d| m.max(-d))
    }

    /// `y = (A + diag(shift)) x`.
    pub(crate) fn mul_vec(&self, x: &[f64], shift: &[f64], y: &mut [f64]) {
        for r in 0..self.dim() {
            let mut acc = (self.diag[r] + shift[r]) * x[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.val[k] * x[self.col[k]];
            }
            y[r] = acc;
        }
    }

    /// `y = x (A + diag(shift))` for a row vector `x`.
    pub(crate) fn vec_mul(&self, x: &[f64], shift: &[f64], y: &mut [f64]) {
        for r in 0..self.dim() {
            y[r] = (self.diag[r] + shift[r]) * x[r];
        }
        for r in 0..self.dim() {
            let xr = x[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col[k]] += self.val[k] * xr;
            }
        }
    }
}

pub fn state_count(i_max: u32, r_max: u32) -> usize {
    (i_max as usize + 1) * (r_max as usize + 1) * 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    fn tiny() -> ModelParams {
        ModelParams {
            beta1: 0.2,
            beta2: 0.9,
            gamma: 1.0,
            mu: 0.5,
            l: 0.3,
            a1: 0.1,
            a2: 0.4,
            i_max: 1,
            r_max: 1,
        }
    }

    #[test]
    fn tiny_chain_entries() {
        let p = tiny();
        let m = RateMatrix::build(&p).unwrap();
        assert_eq!(m.dim(), 8);
        let bf = Regime::BuzzFree;
        let bz = Regime::Buzz;
        // (0,0,BF): arrival l, switch a1
        let s = m.index(0, 0, bf);
        assert_relative_eq!(m.get(s, m.index(1, 0, bf)), 0.3);
        assert_relative_eq!(m.get(s, m.index(0, 0, bz)), 0.1);
        assert_relative_eq!(m.get(s, s), -0.4);
        // (0,1,BZ): arrival l + beta2, memory end mu, switch a2
        let s = m.index(0, 1, bz);
        assert_relative_eq!(m.get(s, m.index(1, 1, bz)), 0.3 + 0.9);
        assert_relative_eq!(m.get(s, m.index(0, 0, bz)), 0.5);
        assert_relative_eq!(m.get(s, m.index(0, 1, bf)), 0.4);
        assert_relative_eq!(m.get(s, s), -2.1);
        // (1,0,BF): arrivals blocked at i_max, watch end to (0,1)
        let s = m.index(1, 0, bf);
        assert_relative_eq!(m.get(s, m.index(0, 1, bf)), 1.0);
        assert_relative_eq!(m.get(s, s), -1.1);
        // (1,1,BF): watch end at the r cap leaves r unchanged
        let s = m.index(1, 1, bf);
        assert_relative_eq!(m.get(s, m.index(0, 1, bf)), 1.0);
        assert_relative_eq!(m.get(s, m.index(1, 0, bf)), 0.5);
        assert_relative_eq!(m.get(s, s), -1.6);
    }

    #[test]
    fn rows_sum_to_zero() {
        let m = RateMatrix::build(&presets::demo_buzz()).unwrap();
        for r in 0..m.dim() {
            let s: f64 = m.diagonal()[r] + m.row(r).map(|e| e.1).sum::<f64>();
            assert!(s.abs() < 1e-12);
            assert!(m.row(r).all(|e| e.1 >= 0.0));
        }
    }

    #[test]
    fn demo_state_count() {
        let m = RateMatrix::build(&presets::demo_buzz_free()).unwrap();
        assert_eq!(m.dim(), 3782);
    }

    #[test]
    fn index_round_trip() {
        let m = RateMatrix::build(&tiny()).unwrap();
        for k in 0..m.dim() {
            let s = m.state(k);
            assert_eq!(m.index(s.i, s.r, s.regime), k);
        }
    }

    #[test]
    fn size_limit() {
        let err = RateMatrix::build_with_limit(&presets::demo_buzz(), 100).unwrap_err();
        assert!(matches!(
            err,
            Error::TooLarge {
                states: 3782,
                limit: 100
            }
        ));
    }
}
