//! Independent reference implementations used as oracles by the integration tests.
//!
//! Everything here recomputes quantities from their definitions (sums over the
//! whole history, numerical quadrature) without the incremental state machine.
#![allow(dead_code)]

use mic_core::rng::{stream_rng, uniform, SimRng};
use mic_core::{Event, EventLog, ExponentialKernel, Mixing, ModelParams, UserGraph};
use nalgebra::DMatrix;

pub fn rng(seed: u64) -> SimRng {
    stream_rng(seed, 7)
}

pub fn random_stochastic(rng: &mut SimRng, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(n, n, |_, _| uniform(rng) + 1e-3);
    for mut row in m.row_iter_mut() {
        let s: f64 = row.iter().sum();
        row /= s;
    }
    m
}

/// Random small instance with a stable, fairly dense influence graph.
pub fn random_params(rng: &mut SimRng, n_users: usize, n_cascades: usize, mixing: Mixing) -> (ModelParams, UserGraph) {
    let tau = 0.5 + 2.0 * uniform(rng);
    let mut w = DMatrix::zeros(n_users, n_users);
    for v in 0..n_users {
        for u in 0..n_users {
            if uniform(rng) < 0.5 {
                w[(v, u)] = 0.6 * uniform(rng) / (tau * n_users as f64);
            }
        }
    }
    let baseline = DMatrix::from_fn(n_users, n_cascades, |_, _| 0.05 + 0.5 * uniform(rng));
    let params = ModelParams::new(
        baseline,
        random_stochastic(rng, n_cascades),
        w,
        ExponentialKernel::new(tau).unwrap(),
        mixing,
    )
    .unwrap();
    let graph = UserGraph::from_weights(&params.influence).unwrap();
    (params, graph)
}

/// Random event log on `[0, horizon]` (not a sample of the model; any log is valid input).
pub fn random_log(rng: &mut SimRng, n_users: usize, n_cascades: usize, n_events: usize, horizon: f64) -> EventLog {
    let events = (0..n_events)
        .map(|_| {
            let u = ((uniform(rng) * n_users as f64) as usize).min(n_users - 1);
            let c = ((uniform(rng) * n_cascades as f64) as usize).min(n_cascades - 1);
            Event::new(u, c, uniform(rng) * horizon)
        })
        .collect();
    EventLog::new(events, horizon).unwrap()
}

/// `Σ_{j: t_j < t, c_j = c} w_{u_j u} exp(−(t − t_j)/τ)` by direct summation.
pub fn brute_excitation(params: &ModelParams, events: &[Event], u: usize, c: usize, t: f64) -> f64 {
    events
        .iter()
        .filter(|e| e.time < t && e.cascade == c)
        .map(|e| params.influence[(e.user, u)] * (-(t - e.time) / params.kernel.tau).exp())
        .sum()
}

pub fn brute_independent(params: &ModelParams, events: &[Event], u: usize, t: f64) -> Vec<f64> {
    (0..params.n_cascades())
        .map(|c| params.baseline[(u, c)] + brute_excitation(params, events, u, c, t))
        .collect()
}

pub fn brute_contextual(params: &ModelParams, events: &[Event], u: usize, t: f64) -> Vec<f64> {
    let nc = params.n_cascades();
    let exc: Vec<f64> = (0..nc).map(|s| brute_excitation(params, events, u, s, t)).collect();
    (0..nc)
        .map(|c| params.baseline[(u, c)] + (0..nc).map(|s| params.interaction[(s, c)] * exc[s]).sum::<f64>())
        .collect()
}

/// Softmax / linear normalization written out without shared helpers.
pub fn brute_density(mixing: Mixing, nu_star: &[f64]) -> Vec<f64> {
    match mixing {
        Mixing::Linear => {
            let total: f64 = nu_star.iter().sum();
            nu_star.iter().map(|x| x / total).collect()
        }
        Mixing::Boltzmann { beta } => {
            let m = nu_star.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = nu_star.iter().map(|x| (beta * (x - m)).exp()).collect();
            let z: f64 = w.iter().sum();
            w.iter().map(|x| x / z).collect()
        }
    }
}

pub fn brute_total(params: &ModelParams, events: &[Event], u: usize, t: f64) -> f64 {
    brute_independent(params, events, u, t).iter().sum()
}

/// Adaptive Simpson quadrature with an absolute tolerance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `∫_{t0}^{t1} Σ_u λ_u(t) dt` by quadrature between consecutive event times.
pub fn quadrature_compensator(params: &ModelParams, events: &[Event], t0: f64, t1: f64, tol: f64) -> f64 {
    let mut knots: Vec<f64> = events.iter().map(|e| e.time).filter(|&t| t > t0 && t < t1).collect();
    knots.insert(0, t0);
    knots.push(t1);
    knots.dedup();
    knots
        .windows(2)
        .map(|w| {
            // between knots the history is fixed; events at the left knot count (right-continuous limit)
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let past: Vec<Event> = events.iter().filter(|e| e.time < mid).copied().collect();
            let f = |t: f64| {
                let mu: f64 = params.baseline.iter().sum();
                let exc: f64 = past
                    .iter()
                    .map(|e| {
                        let out: f64 = (0..params.n_users()).map(|u| params.influence[(e.user, u)]).sum();
                        out * (-(t - e.time) / params.kernel.tau).exp()
                    })
                    .sum();
                mu + exc
            };
            adaptive_simpson(&f, a, b, tol * (b - a) / (t1 - t0).max(1e-300))
        })
        .sum()
}

/// Full log-likelihood from the definitions: mark-resolved log-intensities at
/// events minus the compensator computed by quadrature.
pub fn brute_log_likelihood(params: &ModelParams, log: &EventLog) -> f64 {
    let events = log.events();
    let mut total = 0.0;
    for e in events {
        let nu_star = brute_contextual(params, events, e.user, e.time);
        let lambda = brute_total(params, events, e.user, e.time);
        let f = brute_density(params.mixing, &nu_star);
        total += (lambda * f[e.cascade]).ln();
    }
    total - quadrature_compensator(params, events, 0.0, log.horizon(), 1e-12)
}

/// Central finite difference of `g` at `x` along coordinate `i`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(g: &F, x: &[f64], i: usize, h: f64) -> f64 {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[i] += h;
    minus[i] -= h;
    (g(&plus) - g(&minus)) / (2.0 * h)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// One-sample Kolmogorov–Smirnov statistic of `sample` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS statistic with the Stephens small-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let tail: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    (2.0 * tail).clamp(0.0, 1.0)
}
