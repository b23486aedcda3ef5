mod common;

use common::*;
use mic_core::moments::{first_moment_ode, stationary_cascade_intensity, MomentSystem};
use mic_core::{expected_counts, expected_intensity, moment_curves, simulate, stability, Mixing, ModelParams};
use nalgebra::{DMatrix, DVector};

/// Fixed-step RK4 on `dm/dt = μ/τ − (I/τ − Wᵀ) m`, `dn/dt = m`, `m(0) = μ`, `n(0) = 0`.
fn rk4_moments(params: &ModelParams, t_end: f64, dt: f64) -> (DVector<f64>, DVector<f64>) {
    let n = params.n_users();
    let tau = params.kernel.tau;
    let mu = DVector::from_vec(params.total_baselines());
    let wt = params.influence.transpose();
    let deriv = |m: &DVector<f64>| &mu / tau - m / tau + &wt * m;
    let mut m = mu.clone();
    let mut counts = DVector::zeros(n);
    let steps = (t_end / dt).round() as usize;
    let h = t_end / steps as f64;
    for _ in 0..steps {
        let k1 = deriv(&m);
        let k2 = deriv(&(&m + &k1 * (h / 2.0)));
        let k3 = deriv(&(&m + &k2 * (h / 2.0)));
        let k4 = deriv(&(&m + &k3 * h));
        // counts integrate m, whose RK4 stages are the states at the stage points
        let m2 = &m + &k1 * (h / 2.0);
        let m3 = &m + &k2 * (h / 2.0);
        let m4 = &m + &k3 * h;
        counts += (&m + &m2 * 2.0 + &m3 * 2.0 + &m4) * (h / 6.0);
        m += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    (m, counts)
}

fn max_rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| rel_err(*x, *y)).fold(0.0, f64::max)
}

#[test]
fn closed_form_matches_rk4() {
    let mut rng = rng(20);
    for k in 0..10 {
        let (params, _) = random_params(&mut rng, 2 + k % 4, 2, Mixing::Linear);
        let system = MomentSystem::new(&params).unwrap();
        for t in [0.3, 2.0, 7.5] {
            let (m, n) = rk4_moments(&params, t, 1e-3);
            assert!(max_rel(&system.expected_intensity_at(t), &m) < 1e-6);
            assert!(max_rel(&system.expected_counts_at(t), &n) < 1e-6);
        }
    }
}

#[test]
fn counts_derivative_is_intensity() {
    let mut rng = rng(21);
    for _ in 0..10 {
        let (params, _) = random_params(&mut rng, 4, 2, Mixing::Linear);
        let h = 1e-4;
        for t in [0.5, 3.0, 10.0] {
            let counts = expected_counts(&params, &[t - h, t + h]).unwrap();
            let lambda = expected_intensity(&params, &[t]).unwrap();
            for u in 0..4 {
                let fd = (counts[(u, 1)] - counts[(u, 0)]) / (2.0 * h);
                assert!(rel_err(fd, lambda[(u, 0)]) < 1e-4);
            }
        }
    }
}

#[test]
fn long_run_limit_is_stationary_intensity() {
    let mut rng = rng(22);
    for _ in 0..10 {
        let (params, _) = random_params(&mut rng, 5, 2, Mixing::Linear);
        assert!(stability(&params).stable);
        let system = MomentSystem::new(&params).unwrap();
        let late = system.expected_intensity_at(50.0 * params.kernel.tau);
        assert!(max_rel(&late, &system.stationary_intensity()) < 1e-6);
    }
}

#[test]
fn diagonal_influence_matches_scalar_formula() {
    let mut rng = rng(23);
    for _ in 0..10 {
        let (mut params, _) = random_params(&mut rng, 4, 2, Mixing::Linear);
        let tau = params.kernel.tau;
        let w: Vec<f64> = (0..4).map(|u| 0.9 * (u as f64 + 1.0) / (4.0 * tau)).collect();
        params.influence = DMatrix::from_diagonal(&DVector::from_vec(w.clone()));
        let times = [0.0, 0.1, 1.0, 4.0, 20.0];
        let got = expected_intensity(&params, &times).unwrap();
        let got_n = expected_counts(&params, &times).unwrap();
        for u in 0..4 {
            let mu = params.total_baseline(u);
            let gain = 1.0 / (1.0 - tau * w[u]);
            let rate = (1.0 - tau * w[u]) / tau;
            for (k, &t) in times.iter().enumerate() {
                let lambda = mu * gain + (mu - mu * gain) * (-rate * t).exp();
                let n = mu * gain * t + (mu - mu * gain) * (1.0 - (-rate * t).exp()) / rate;
                assert!(rel_err(got[(u, k)], lambda) < 1e-12, "{} vs {lambda}", got[(u, k)]);
                if t > 0.0 {
                    assert!(rel_err(got_n[(u, k)], n) < 1e-12, "{} vs {n}", got_n[(u, k)]);
                }
            }
        }
    }
}

#[test]
fn per_cascade_ode_sums_to_closed_form_and_settles_at_fixed_point() {
    let mut rng = rng(24);
    for _ in 0..5 {
        let (params, _) = random_params(&mut rng, 3, 3, Mixing::boltzmann(2.0).unwrap());
        let tau = params.kernel.tau;
        let times = [0.0, 0.5 * tau, 2.0 * tau, 60.0 * tau];
        let ode = first_moment_ode(&params, &times).unwrap();
        let closed = expected_intensity(&params, &times).unwrap();
        for (k, y) in ode.iter().enumerate() {
            for u in 0..3 {
                let total: f64 = y.row(u).iter().sum();
                assert!(rel_err(total, closed[(u, k)]) < 1e-8);
            }
        }
        // fixed point of the closure: M + τ Wᵀ S with S the stationary per-cascade intensities
        let stationary = stationary_cascade_intensity(&params).unwrap();
        let fixed_point = &params.baseline + params.influence.transpose() * &stationary * tau;
        let last = ode.last().unwrap();
        for (a, b) in last.iter().zip(fixed_point.iter()) {
            assert!(rel_err(*a, *b) < 1e-6, "{a} vs {b}");
        }
        let curves = moment_curves(&params, &times).unwrap();
        for u in 0..3 {
            for k in 0..times.len() {
                let split: f64 = (0..3).map(|c| curves.per_cascade_intensity[u][c][k]).sum();
                assert!(rel_err(split, curves.expected_intensity[u][k]) < 1e-12);
            }
        }
    }
}

#[test]
fn expected_counts_agree_with_monte_carlo() {
    let mut rng = rng(25);
    let (params, graph) = random_params(&mut rng, 3, 2, Mixing::boltzmann(1.0).unwrap());
    let horizon = 6.0;
    let expected = expected_counts(&params, &[horizon]).unwrap();
    let runs = 2000;
    let mut sums = [0.0f64; 3];
    let mut squares = [0.0f64; 3];
    for r in 0..runs {
        let log = simulate(&params, &graph, horizon, 1000 + r).unwrap();
        for (u, n) in log.user_counts(3).into_iter().enumerate() {
            sums[u] += n as f64;
            squares[u] += (n * n) as f64;
        }
    }
    for u in 0..3 {
        let mean = sums[u] / runs as f64;
        let var = squares[u] / runs as f64 - mean * mean;
        let z = (mean - expected[(u, 0)]) / (var / runs as f64).sqrt();
        assert!(z.abs() < 4.5, "user {u}: mean {mean} vs {} (z = {z})", expected[(u, 0)]);
    }
}
