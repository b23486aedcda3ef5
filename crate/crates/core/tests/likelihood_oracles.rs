mod common;

use common::*;
use mic_core::likelihood::log_likelihood_window;
use mic_core::linalg::min_symmetric_eigenvalue;
use mic_core::model::{contextual_intensities, global_intensity, independent_intensity, marked_intensity};
use mic_core::rng::uniform;
use mic_core::{
    compensator, gradient, hessian_sigma, log_likelihood, partial_log_likelihood, Event, EventLog, IntensityState,
    Mixing, ModelParams, Wrt,
};
use nalgebra::DMatrix;

fn mixings(rng: &mut mic_core::rng::SimRng) -> [Mixing; 2] {
    [Mixing::Linear, Mixing::boltzmann(0.5 + 4.0 * uniform(rng)).unwrap()]
}

#[test]
fn compensator_matches_adaptive_quadrature() {
    let mut rng = rng(1);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let (nu, nc) = (2 + k % 3, 1 + k % 3);
        let (params, graph) = random_params(&mut rng, nu, nc, Mixing::Linear);
        let log = random_log(&mut rng, nu, nc, 10 + k, 10.0);
        let t0 = 3.0 * uniform(&mut rng);
        let t1 = t0 + (10.0 - t0) * (0.2 + 0.8 * uniform(&mut rng));
        let closed = compensator(&params, &graph, &log, t0, t1).unwrap();
        let quad = quadrature_compensator(&params, log.events(), t0, t1, 1e-13);
        worst = worst.max(rel_err(closed, quad));
    }
    assert!(worst < 1e-8, "worst relative error {worst:e}");
}

#[test]
fn log_likelihood_matches_definition() {
    let mut rng = rng(2);
    for k in 0..20 {
        for mixing in mixings(&mut rng) {
            let (nu, nc) = (2 + k % 3, 1 + k % 3);
            let (params, graph) = random_params(&mut rng, nu, nc, mixing);
            let log = random_log(&mut rng, nu, nc, 15 + k, 8.0);
            let fast = log_likelihood(&params, &graph, &log).unwrap();
            let slow = brute_log_likelihood(&params, &log);
            assert!(rel_err(fast.total, slow) < 1e-9, "{} vs {slow}", fast.total);
        }
    }
}

#[test]
fn per_user_terms_sum_to_total() {
    let mut rng = rng(3);
    for mixing in mixings(&mut rng) {
        let (params, graph) = random_params(&mut rng, 4, 3, mixing);
        let log = random_log(&mut rng, 4, 3, 40, 12.0);
        let total = log_likelihood(&params, &graph, &log).unwrap().total;
        let sum: f64 = (0..4).map(|u| partial_log_likelihood(&params, &graph, &log, u).unwrap()).sum();
        assert!((total - sum).abs() < 1e-10 * total.abs());
    }
}

/// Event terms only; the compensator does not depend on Σ.
fn brute_event_terms(params: &ModelParams, events: &[Event]) -> f64 {
    events
        .iter()
        .map(|e| {
            let nu_star = brute_contextual(params, events, e.user, e.time);
            let f = brute_density(params.mixing, &nu_star);
            (brute_total(params, events, e.user, e.time) * f[e.cascade]).ln()
        })
        .sum()
}

fn with_sigma(params: &ModelParams, flat: &[f64]) -> ModelParams {
    let nc = params.n_cascades();
    let mut p = params.clone();
    p.interaction = DMatrix::from_row_slice(nc, nc, flat);
    p
}

fn rel_norm(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = rng(4);
    let h = 1e-6;
    for k in 0..20 {
        let mixing = mixings(&mut rng)[k % 2];
        let (nu, nc) = (3, 2 + k % 2);
        let (params, graph) = random_params(&mut rng, nu, nc, mixing);
        let log = random_log(&mut rng, nu, nc, 30, 10.0);
        let ll = |p: &ModelParams| log_likelihood(p, &graph, &log).unwrap().total;

        for u in 0..nu {
            let g = gradient(&params, &graph, &log, Wrt::Baseline(u)).unwrap();
            let fd: Vec<f64> = (0..nc)
                .map(|c| {
                    let at = |x: &[f64]| {
                        let mut p = params.clone();
                        p.baseline[(u, c)] = x[0];
                        ll(&p)
                    };
                    central_difference(&at, &[params.baseline[(u, c)]], 0, h)
                })
                .collect();
            assert!(rel_norm(g.as_slice(), &fd) < 1e-5, "baseline {u}: {g} vs {fd:?}");

            let g = gradient(&params, &graph, &log, Wrt::Influence(u)).unwrap();
            let support = graph.influencers(u).to_vec();
            let analytic: Vec<f64> = support.iter().map(|&v| g[v]).collect();
            let fd: Vec<f64> = support
                .iter()
                .map(|&v| {
                    let at = |x: &[f64]| {
                        let mut p = params.clone();
                        p.influence[(v, u)] = x[0];
                        ll(&p)
                    };
                    central_difference(&at, &[params.influence[(v, u)]], 0, h)
                })
                .collect();
            if !support.is_empty() {
                assert!(rel_norm(&analytic, &fd) < 1e-5, "influence {u}: {analytic:?} vs {fd:?}");
            }
            for v in 0..nu {
                if !graph.has_edge(v, u) {
                    assert_eq!(g[v], 0.0);
                }
            }
        }

        let g = gradient(&params, &graph, &log, Wrt::Interaction).unwrap();
        let flat: Vec<f64> = params.interaction.transpose().iter().copied().collect();
        let f = |x: &[f64]| brute_event_terms(&with_sigma(&params, x), log.events());
        let fd: Vec<f64> = (0..nc * nc).map(|i| central_difference(&f, &flat, i, h)).collect();
        assert!(rel_norm(g.as_slice(), &fd) < 1e-5, "interaction: {g} vs {fd:?}");
    }
}

#[test]
fn interaction_hessian_matches_second_differences_and_is_psd() {
    let mut rng = rng(5);
    for _ in 0..5 {
        let mixing = Mixing::boltzmann(0.5 + 2.0 * uniform(&mut rng)).unwrap();
        let (params, graph) = random_params(&mut rng, 3, 3, mixing);
        let log = random_log(&mut rng, 3, 3, 25, 10.0);
        let hess = hessian_sigma(&params, &graph, &log).unwrap();
        let flat: Vec<f64> = params.interaction.transpose().iter().copied().collect();
        let neg = |x: &[f64]| -brute_event_terms(&with_sigma(&params, x), log.events());
        let h = 2e-3;
        let n = flat.len();
        let mut fd = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let at = |di: f64, dj: f64| {
                    let mut x = flat.clone();
                    x[i] += di;
                    x[j] += dj;
                    neg(&x)
                };
                fd[(i, j)] = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
            }
        }
        let err = (&hess - &fd).norm() / hess.norm().max(1e-12);
        assert!(err < 1e-4, "relative Hessian error {err:e}");
        assert!(min_symmetric_eigenvalue(&hess) >= -1e-9 * hess.norm());
    }
    let (params, graph) = random_params(&mut rng, 2, 2, Mixing::Linear);
    let log = random_log(&mut rng, 2, 2, 5, 3.0);
    assert!(hessian_sigma(&params, &graph, &log).is_err());
}

#[test]
fn windowed_score_with_context_equals_difference_for_poisson() {
    // W = 0: the process has independent increments, so the score of the
    // second part equals the full score minus the score of the first part
    let mut rng = rng(6);
    let (mut params, _) = random_params(&mut rng, 3, 2, Mixing::boltzmann(2.0).unwrap());
    params.influence.fill(0.0);
    let graph = mic_core::UserGraph::new(3);
    let log = random_log(&mut rng, 3, 2, 30, 10.0);
    let n_train = 20;
    let boundary = log.events()[n_train - 1].time;
    let first = EventLog::new(log.events()[..n_train].to_vec(), boundary).unwrap();
    let full = log_likelihood(&params, &graph, &log).unwrap().total;
    let head = log_likelihood(&params, &graph, &first).unwrap().total;
    let window = mic_core::likelihood::ScoreWindow {
        score_from: n_train,
        t0: boundary,
        t1: log.horizon(),
    };
    let tail = log_likelihood_window(&params, &graph, log.events(), window).unwrap().total;
    assert!((full - head - tail).abs() < 1e-10 * full.abs());
}

fn random_state(rng: &mut mic_core::rng::SimRng, nu: usize, nc: usize) -> IntensityState {
    let mut s = IntensityState::new(nu, nc);
    for u in 0..nu {
        for c in 0..nc {
            if uniform(rng) < 0.7 {
                s.set_excitation(u, c, 3.0 * uniform(rng));
            }
        }
    }
    s
}

#[test]
fn identity_linear_reduces_to_independent_cascades() {
    let mut rng = rng(7);
    for _ in 0..100 {
        let (mut params, _) = random_params(&mut rng, 4, 3, Mixing::Linear);
        params.interaction = DMatrix::identity(3, 3);
        let state = random_state(&mut rng, 4, 3);
        for u in 0..4 {
            for c in 0..3 {
                let marked = marked_intensity(&params, &state, u, c).unwrap();
                let independent = independent_intensity(&params, &state, u, c).unwrap();
                assert_eq!(marked.to_bits(), independent.to_bits());
            }
        }
    }
}

#[test]
fn zero_temperature_mixing_is_uniform() {
    let mut rng = rng(8);
    for _ in 0..100 {
        let (params, _) = random_params(&mut rng, 3, 4, Mixing::boltzmann(0.0).unwrap());
        let state = random_state(&mut rng, 3, 4);
        for u in 0..3 {
            let f = mic_core::model::mixing_density(&params, &state, u).unwrap();
            assert!(f.iter().all(|p| (p - 0.25).abs() < 1e-12), "{f:?}");
        }
    }
}

#[test]
fn identity_boltzmann_matches_competing_cascades_oracle() {
    let mut rng = rng(9);
    for _ in 0..100 {
        let beta = 10.0 * uniform(&mut rng);
        let (mut params, _) = random_params(&mut rng, 3, 3, Mixing::boltzmann(beta).unwrap());
        params.interaction = DMatrix::identity(3, 3);
        let state = random_state(&mut rng, 3, 3);
        for u in 0..3 {
            // λ_u^(c) = λ_u exp(β ν_u^(c)) / Σ_s exp(β ν_u^(s)) with the independent intensities
            let nu: Vec<f64> = (0..3).map(|c| params.baseline[(u, c)] + state.excitation(u, c)).collect();
            let lambda: f64 = nu.iter().sum();
            let z: f64 = nu.iter().map(|x| (beta * x).exp()).sum();
            for c in 0..3 {
                let oracle = lambda * (beta * nu[c]).exp() / z;
                let got = marked_intensity(&params, &state, u, c).unwrap();
                assert!((got - oracle).abs() <= 1e-10 * oracle.max(1.0), "{got} vs {oracle}");
            }
            assert!((global_intensity(&params, &state, u).unwrap() - lambda).abs() < 1e-12 * lambda);
            let ctx = contextual_intensities(&params, &state, u).unwrap();
            assert!(ctx.iter().zip(&nu).all(|(a, b)| (a - b).abs() < 1e-15 * b.max(1.0)));
        }
    }
}

fn midpoint_gap(f: &dyn Fn(&ModelParams) -> f64, a: &ModelParams, b: &ModelParams) -> f64 {
    let mut mid = a.clone();
    mid.baseline = (&a.baseline + &b.baseline) * 0.5;
    mid.interaction = (&a.interaction + &b.interaction) * 0.5;
    mid.influence = (&a.influence + &b.influence) * 0.5;
    0.5 * (f(a) + f(b)) - f(&mid)
}

#[test]
fn negative_log_likelihood_is_blockwise_midpoint_convex() {
    let mut rng = rng(10);
    for k in 0..40 {
        let mixing = mixings(&mut rng)[k % 2];
        let (a, graph) = random_params(&mut rng, 3, 3, mixing);
        let log = random_log(&mut rng, 3, 3, 30, 10.0);
        let neg = |p: &ModelParams| -log_likelihood(p, &graph, &log).unwrap().total;

        // Σ block with (M, W) fixed
        let mut b = a.clone();
        b.interaction = random_stochastic(&mut rng, 3);
        let gap = midpoint_gap(&neg, &a, &b);
        assert!(gap >= -1e-9 * neg(&a).abs().max(1.0), "Σ block gap {gap}");

        // (M, W) block with Σ fixed, same edge support
        let mut b = a.clone();
        b.baseline = b.baseline.map(|x| x * (0.2 + 2.0 * uniform(&mut rng)));
        b.influence = b.influence.map(|x| x * 2.0 * uniform(&mut rng));
        let gap = midpoint_gap(&neg, &a, &b);
        assert!(gap >= -1e-9 * neg(&a).abs().max(1.0), "(M, W) block gap {gap}");
    }
}
