//! Checks against independent dense linear algebra and direct formulas.

mod common;

use buzzload_core::estimation::{estimate_beta1_l, reconstruct_r_at, InterArrivalSet};
use buzzload_core::series::total_variation;
use buzzload_core::spectrum::{
    legendre_curve, linspace, mean_workload_of, scgf, scgf_curve, stationary_distribution,
    PowerConfig,
};
use buzzload_core::{
    presets, simulate, Horizon, ModelParams, RateMatrix, SystemState, WorkloadPath,
};
use common::{dense_generator, stationary_by_state, tiny};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

fn small_demo() -> ModelParams {
    ModelParams {
        i_max: 8,
        r_max: 12,
        ..presets::demo_buzz()
    }
}

#[test]
fn sparse_generator_matches_the_dense_one() {
    for p in [tiny(), small_demo()] {
        let m = RateMatrix::build(&p).unwrap();
        let (states, a) = dense_generator(&p);
        for (k, &(i, r, g)) in states.iter().enumerate() {
            for (c, &(i2, r2, g2)) in states.iter().enumerate() {
                let got = m.get(m.index(i, r, g), m.index(i2, r2, g2));
                assert!((got - a[(k, c)]).abs() < 1e-14, "({k}, {c})");
            }
        }
    }
}

#[test]
fn stationary_law_matches_dense_solve() {
    for p in [tiny(), small_demo()] {
        let m = RateMatrix::build(&p).unwrap();
        let pi = stationary_distribution(&m, &PowerConfig::default()).unwrap();
        for ((i, r, g), v) in stationary_by_state(&p) {
            let got = pi[m.index(i, r, g)];
            assert!((got - v).abs() < 1e-10, "({i}, {r}, {g:?}): {got} vs {v}");
        }
    }
}

#[test]
fn demo_chain_mean_matches_dense_solve() {
    let p = presets::demo_buzz();
    let m = RateMatrix::build(&p).unwrap();
    let pi = stationary_distribution(&m, &PowerConfig::default()).unwrap();
    let ours = mean_workload_of(&m, &pi);
    let dense: f64 = stationary_by_state(&p)
        .iter()
        .map(|((i, _, _), v)| f64::from(*i) * v)
        .sum();
    assert!((ours - dense).abs() < 1e-8 * dense, "{ours} vs {dense}");
}

#[test]
fn tiny_chain_simulation_matches_stationary_law() {
    let p = tiny();
    let trace = simulate(&p, SystemState::empty(), Horizon::Events(1 << 20), 11).unwrap();
    let occ = trace.occupancy(0.0);
    let dense = stationary_by_state(&p);
    let mut sim = Vec::new();
    let mut exact = Vec::new();
    for ((i, r, g), v) in &dense {
        exact.push(*v);
        sim.push(
            occ.get(&SystemState::new(*i, *r, *g))
                .copied()
                .unwrap_or(0.0),
        );
    }
    let tv = total_variation(&sim, &exact);
    assert!(tv <= 0.02, "tv {tv}");
    let mut marginal = vec![0.0; 2];
    for ((i, _, _), v) in &dense {
        marginal[*i as usize] += v;
    }
    let hist = WorkloadPath::from_trace(&trace).histogram();
    assert!(total_variation(&hist, &marginal) <= 0.02);
}

#[test]
fn principal_eigenvalue_matches_dense_eigensolve() {
    let p = tiny();
    let m = RateMatrix::build(&p).unwrap();
    let (states, a) = dense_generator(&p);
    for q in linspace(-2.0, 2.0, 41) {
        let mut t = a.clone();
        for (k, s) in states.iter().enumerate() {
            t[(k, k)] += q * f64::from(s.0);
        }
        let top = t
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let ours = scgf(&m, q).unwrap();
        assert!((ours - top).abs() <= 1e-8, "q {q}: {ours} vs {top}");
    }
}

#[test]
fn legendre_transform_matches_direct_supremum() {
    let p = tiny();
    let m = RateMatrix::build(&p).unwrap();
    let cfg = PowerConfig::default();
    let q = linspace(-2.0, 2.0, 201);
    let lambda = scgf_curve(&m, &q, &cfg).unwrap();
    let curve = legendre_curve(&q, &lambda).unwrap();
    let fine = linspace(-2.5, 2.5, 2001);
    let fine_lambda = scgf_curve(&m, &fine, &cfg).unwrap();
    for pt in curve.points.iter().filter(|pt| pt.q.abs() <= 1.9) {
        let sup = fine
            .iter()
            .zip(&fine_lambda)
            .map(|(qq, l)| qq * pt.alpha - l)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            (pt.f + sup).abs() <= 1e-5,
            "q {}: f {} vs {}",
            pt.q,
            pt.f,
            -sup
        );
    }
}

#[test]
fn regression_recovers_exponential_gap_rates() {
    let (beta, l) = (0.05, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut triples = Vec::new();
    let mut t = 0.0;
    for x in 1..=20u32 {
        let d = Exp::new(beta * f64::from(x) + l).unwrap();
        for _ in 0..100_000 {
            let w: f64 = d.sample(&mut rng);
            triples.push((t, w, x));
            t += w;
        }
    }
    let fit = estimate_beta1_l(&InterArrivalSet::from_triples(triples), 5).unwrap();
    assert!((fit.beta1 / beta - 1.0).abs() <= 0.02, "beta {}", fit.beta1);
    assert!((fit.l / l - 1.0).abs() <= 0.02, "l {}", fit.l);
}

#[test]
fn r_reconstruction_tracks_true_past_viewers() {
    let p = presets::case_b();
    let trace = simulate(
        &p,
        SystemState::mean_field(&p).unwrap(),
        Horizon::Events(1 << 21),
        1,
    )
    .unwrap();
    let path = WorkloadPath::from_trace(&trace);
    let w = 1.0 / p.gamma + 1.0 / p.mu;
    let start = trace.t0 + w;
    let n = 4096;
    let dt = (trace.t_end - start) / n as f64;
    let times: Vec<f64> = (0..n).map(|k| start + k as f64 * dt).collect();
    let est = reconstruct_r_at(&path, &times, p.mu, p.gamma, None).unwrap();
    let mut k = 0;
    let (mut err, mut total) = (0.0, 0.0);
    let mut r = trace.initial.r;
    for (t, (rh, _)) in times.iter().zip(est) {
        while k < trace.events.len() && trace.events[k].t <= *t {
            r = trace.events[k].state_after.r;
            k += 1;
        }
        err += (rh - f64::from(r)).abs();
        total += f64::from(r);
    }
    let rel = err / total;
    assert!(rel < 0.25, "mean absolute error {rel} of mean r");
}
