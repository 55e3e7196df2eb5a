//! Dense reference computations shared by the test targets.

use buzzload_core::{ModelParams, Regime};
use nalgebra::{DMatrix, DVector};

/// Eight-state chain with `i_max = r_max = 1`.
pub fn tiny() -> ModelParams {
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

/// States in the order `(i, r, regime)` with `i` fastest, then the dense
/// generator written straight from the transition table.
pub fn dense_generator(p: &ModelParams) -> (Vec<(u32, u32, Regime)>, DMatrix<f64>) {
    let mut states = Vec::new();
    for r in 0..=p.r_max {
        for i in 0..=p.i_max {
            for g in [Regime::BuzzFree, Regime::Buzz] {
                states.push((i, r, g));
            }
        }
    }
    let pos = |i: u32, r: u32, g: Regime| {
        states
            .iter()
            .position(|&s| s == (i, r, g))
            .expect("state exists")
    };
    let n = states.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (k, &(i, r, g)) in states.iter().enumerate() {
        let beta = if g == Regime::Buzz { p.beta2 } else { p.beta1 };
        let mut add = |to: usize, rate: f64| {
            a[(k, to)] += rate;
            a[(k, k)] -= rate;
        };
        if i < p.i_max {
            add(pos(i + 1, r, g), p.l + f64::from(i + r) * beta);
        }
        if i > 0 {
            add(pos(i - 1, (r + 1).min(p.r_max), g), p.gamma * f64::from(i));
        }
        if r > 0 {
            add(pos(i, r - 1, g), p.mu * f64::from(r));
        }
        let other = if g == Regime::Buzz {
            Regime::BuzzFree
        } else {
            Regime::Buzz
        };
        add(
            pos(i, r, other),
            if g == Regime::Buzz { p.a2 } else { p.a1 },
        );
    }
    (states, a)
}

/// Solves `pi A = 0`, `sum pi = 1` by replacing one balance equation.
pub fn dense_stationary(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut m = a.transpose();
    let mut b = DVector::<f64>::zeros(n);
    for c in 0..n {
        m[(n - 1, c)] = 1.0;
    }
    b[n - 1] = 1.0;
    m.lu().solve(&b).expect("generator of an irreducible chain")
}

pub fn stationary_by_state(p: &ModelParams) -> Vec<((u32, u32, Regime), f64)> {
    let (states, a) = dense_generator(p);
    let pi = dense_stationary(&a);
    states.into_iter().zip(pi.iter().copied()).collect()
}
