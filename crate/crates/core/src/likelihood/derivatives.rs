//! Objective functions in the optimization variables, with exact first and
//! second derivatives.
//!
//! Per user `u` the variables are `x = (μ_u^(0..N_c), w_{v u} for v ∈ F_u)`. Both
//! `λ_u(t_i)` and every `ν*_u^(c)(t_i)` are linear in `x`:
//!
//! ```text
//! λ_i  = a_iᵀ x,   a_i = (1, …, 1, Σ_s G_i[v][s] …)
//! ν*_i = J_i x,    J_i = [ I | (G_i Σ)ᵀ ]
//! ```
//!
//! so `−L_u = −Σ_i [log(a_iᵀx) + m(J_i x; c_i)] + span·Σ_c μ_c + Σ_v w_v K_v`,
//! where `m` is the log mark probability. For the interaction step the
//! variables are the entries `σ_sc` (row-major) and `ν*_i[c] = μ_{u_i}^(c) + Σ_s σ_sc E_i[s]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::features::{split_by_user, user_statistics, UserStatistics};
use super::stream::{check_inputs, compensator_per_user};
use super::ScoreWindow;
use crate::error::{Error, Result};
use crate::math;
use crate::model::{Event, EventLog, IntensityState, Mixing, ModelParams, UserGraph};

/// Scratch space for the log mark probability `m(ν*; c)` and its derivatives in `ν*`.
pub(crate) struct MarkScratch {
    prob: Vec<f64>,
    scaled: Vec<f64>,
    /// `∂m/∂ν*`.
    pub grad: Vec<f64>,
    /// `∂²m/∂ν*²`, row-major.
    pub hess: Vec<f64>,
}

impl MarkScratch {
    pub fn new(n_cascades: usize) -> Self {
        Self {
            prob: vec![0.0; n_cascades],
            scaled: vec![0.0; n_cascades],
            grad: vec![0.0; n_cascades],
            hess: vec![0.0; n_cascades * n_cascades],
        }
    }

    /// Returns `m`, or `None` when it is `−∞`.
    pub fn evaluate(&mut self, mixing: Mixing, nu_star: &[f64], c: usize, second: bool) -> Option<f64> {
        let n = nu_star.len();
        match mixing {
            Mixing::Boltzmann { beta } => {
                for (s, &x) in self.scaled.iter_mut().zip(nu_star) {
                    *s = beta * x;
                }
                let lse = math::log_sum_exp(&self.scaled);
                for (p, &s) in self.prob.iter_mut().zip(&self.scaled) {
                    *p = math::exp(s - lse);
                }
                for k in 0..n {
                    self.grad[k] = beta * ((k == c) as u8 as f64 - self.prob[k]);
                }
                if second {
                    let b2 = beta * beta;
                    for a in 0..n {
                        for b in 0..n {
                            let diag = if a == b { self.prob[a] } else { 0.0 };
                            self.hess[a * n + b] = -b2 * (diag - self.prob[a] * self.prob[b]);
                        }
                    }
                }
                Some(self.scaled[c] - lse)
            }
            Mixing::Linear => {
                let nu = nu_star[c];
                let total: f64 = nu_star.iter().sum();
                if !(nu > 0.0 && total > 0.0) {
                    return None;
                }
                for k in 0..n {
                    self.grad[k] = -1.0 / total;
                }
                self.grad[c] += 1.0 / nu;
                if second {
                    let t2 = 1.0 / (total * total);
                    self.hess.fill(t2);
                    self.hess[c * n + c] -= 1.0 / (nu * nu);
                }
                Some(math::ln(nu) - math::ln(total))
            }
        }
    }
}

/// Value, gradient and Hessian of `−L_u`.
pub(crate) struct Derivatives {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

/// Evaluation failure at a point: `(event index, user, cascade, time)`.
pub(crate) type Infeasible = (usize, usize, usize, f64);

pub(crate) fn infeasible_error((index, user, cascade, time): Infeasible) -> Error {
    Error::ImpossibleEvent {
        index,
        user,
        cascade,
        time,
    }
}

/// `−L_u` at `x`; with `order ≥ 1` also the gradient, with `order = 2` the Hessian.
pub(crate) fn user_objective(
    stats: &UserStatistics,
    sigma: &DMatrix<f64>,
    mixing: Mixing,
    x: &[f64],
    order: u8,
) -> core::result::Result<Derivatives, Infeasible> {
    let nc = stats.n_cascades;
    let k = stats.influencers.len();
    let dim = nc + k;
    debug_assert_eq!(x.len(), dim);
    let (mu, w) = x.split_at(nc);
    let mu_total: f64 = mu.iter().sum();

    let mut value = stats.span * mu_total + w.iter().zip(&stats.compensator_weights).map(|(a, b)| a * b).sum::<f64>();
    let mut grad = DVector::zeros(if order >= 1 { dim } else { 0 });
    let mut hess = DMatrix::zeros(if order >= 2 { dim } else { 0 }, if order >= 2 { dim } else { 0 });
    if order >= 1 {
        for c in 0..nc {
            grad[c] = stats.span;
        }
        for j in 0..k {
            grad[nc + j] = stats.compensator_weights[j];
        }
    }

    let mut excitation = vec![0.0; nc];
    let mut nu_star = vec![0.0; nc];
    let mut a = vec![0.0; dim];
    // J is N_c × dim; only the influencer block (G Σ)ᵀ needs storage.
    let mut gs = vec![0.0; k * nc];
    let mut mark = MarkScratch::new(nc);

    for i in 0..stats.n_events() {
        let block = stats.event_block(i);
        let c_i = stats.cascades[i];
        excitation.fill(0.0);
        for j in 0..k {
            let row = &block[j * nc..(j + 1) * nc];
            for s in 0..nc {
                excitation[s] += w[j] * row[s];
            }
        }
        let lambda = mu_total + excitation.iter().sum::<f64>();
        let fail = (stats.indices[i], stats.user, c_i, stats.times[i]);
        if !(lambda > 0.0) {
            return Err(fail);
        }
        for c in 0..nc {
            let mut acc = 0.0;
            for s in 0..nc {
                acc += sigma[(s, c)] * excitation[s];
            }
            nu_star[c] = mu[c] + acc;
        }
        let m = mark.evaluate(mixing, &nu_star, c_i, order >= 2).ok_or(fail)?;
        value -= math::ln(lambda) + m;

        if order == 0 {
            continue;
        }
        for c in 0..nc {
            a[c] = 1.0;
        }
        for j in 0..k {
            let row = &block[j * nc..(j + 1) * nc];
            a[nc + j] = row.iter().sum();
            for c in 0..nc {
                let mut acc = 0.0;
                for s in 0..nc {
                    acc += row[s] * sigma[(s, c)];
                }
                gs[j * nc + c] = acc;
            }
        }
        // gradient of log λ + m: a/λ + Jᵀ q
        let inv = 1.0 / lambda;
        for d in 0..dim {
            grad[d] -= a[d] * inv;
        }
        for c in 0..nc {
            grad[c] -= mark.grad[c];
        }
        for j in 0..k {
            let mut acc = 0.0;
            for c in 0..nc {
                acc += gs[j * nc + c] * mark.grad[c];
            }
            grad[nc + j] -= acc;
        }

        if order < 2 {
            continue;
        }
        // Hessian of −(log λ + m) = a aᵀ/λ² − Jᵀ Q J
        let inv2 = inv * inv;
        for p in 0..dim {
            for q in 0..dim {
                hess[(p, q)] += a[p] * a[q] * inv2;
            }
        }
        let qm = &mark.hess;
        // J column for variable d, as a length-N_c vector
        let jcol = |d: usize, c: usize| -> f64 {
            if d < nc {
                (d == c) as u8 as f64
            } else {
                gs[(d - nc) * nc + c]
            }
        };
        for p in 0..dim {
            for q in p..dim {
                let mut acc = 0.0;
                for c1 in 0..nc {
                    let jp = jcol(p, c1);
                    if jp == 0.0 {
                        continue;
                    }
                    for c2 in 0..nc {
                        acc += jp * qm[c1 * nc + c2] * jcol(q, c2);
                    }
                }
                hess[(p, q)] -= acc;
                if q != p {
                    hess[(q, p)] -= acc;
                }
            }
        }
    }
    Ok(Derivatives { value, grad, hess })
}

/// Per-event quantities that stay fixed while only Σ changes.
#[derive(Debug, Clone)]
pub(crate) struct SigmaStatistics {
    pub n_cascades: usize,
    pub baseline: Vec<f64>,
    pub excitation: Vec<f64>,
    pub cascades: Vec<usize>,
    pub indices: Vec<usize>,
    pub users: Vec<usize>,
    pub times: Vec<f64>,
    /// `−Σ_i log λ_i + compensator`, the part of `−L` independent of Σ.
    pub constant: f64,
}

pub(crate) fn sigma_statistics(
    params: &ModelParams,
    graph: &UserGraph,
    events: &[Event],
    window: ScoreWindow,
) -> Result<SigmaStatistics> {
    let nc = params.n_cascades();
    let n_scored = events.len() - window.score_from;
    let mut out = SigmaStatistics {
        n_cascades: nc,
        baseline: Vec::with_capacity(n_scored * nc),
        excitation: Vec::with_capacity(n_scored * nc),
        cascades: Vec::with_capacity(n_scored),
        indices: Vec::with_capacity(n_scored),
        users: Vec::with_capacity(n_scored),
        times: Vec::with_capacity(n_scored),
        constant: 0.0,
    };
    let mu = params.total_baselines();
    let start = events.first().map_or(0.0, |e| e.time.min(window.t0));
    let mut state = IntensityState::starting_at(params.n_users(), nc, start);
    let mut i = 0;
    while i < events.len() {
        let t = events[i].time;
        let mut j = i;
        while j < events.len() && events[j].time == t {
            j += 1;
        }
        state.advance(t, &params.kernel)?;
        for (index, e) in events.iter().enumerate().take(j).skip(i.max(window.score_from)) {
            let row = state.excitation_row(e.user);
            let lambda = mu[e.user] + row.iter().sum::<f64>();
            if !(lambda > 0.0) {
                return Err(Error::ImpossibleEvent {
                    index,
                    user: e.user,
                    cascade: e.cascade,
                    time: t,
                });
            }
            out.constant -= math::ln(lambda);
            out.excitation.extend_from_slice(row);
            out.baseline.extend(params.baseline.row(e.user).iter());
            out.cascades.push(e.cascade);
            out.indices.push(index);
            out.users.push(e.user);
            out.times.push(t);
        }
        for e in &events[i..j] {
            state.apply_event(e, params, graph)?;
        }
        i = j;
    }
    out.constant += compensator_per_user(params, graph, events, window.t0, window.t1)
        .iter()
        .sum::<f64>();
    Ok(out)
}

/// `−L` as a function of the flattened Σ (row-major).
pub(crate) fn sigma_objective(
    stats: &SigmaStatistics,
    mixing: Mixing,
    sigma: &[f64],
    order: u8,
) -> core::result::Result<Derivatives, Infeasible> {
    let nc = stats.n_cascades;
    let dim = nc * nc;
    let mut value = stats.constant;
    let mut grad = DVector::zeros(if order >= 1 { dim } else { 0 });
    let mut hess = DMatrix::zeros(if order >= 2 { dim } else { 0 }, if order >= 2 { dim } else { 0 });
    let mut nu_star = vec![0.0; nc];
    let mut mark = MarkScratch::new(nc);
    for i in 0..stats.cascades.len() {
        let e = &stats.excitation[i * nc..(i + 1) * nc];
        let mu = &stats.baseline[i * nc..(i + 1) * nc];
        for c in 0..nc {
            let mut acc = 0.0;
            for s in 0..nc {
                acc += sigma[s * nc + c] * e[s];
            }
            nu_star[c] = mu[c] + acc;
        }
        let c_i = stats.cascades[i];
        let m = mark
            .evaluate(mixing, &nu_star, c_i, order >= 2)
            .ok_or((stats.indices[i], stats.users[i], c_i, stats.times[i]))?;
        value -= m;
        if order >= 1 {
            for s in 0..nc {
                for c in 0..nc {
                    grad[s * nc + c] -= mark.grad[c] * e[s];
                }
            }
        }
        if order >= 2 {
            for s1 in 0..nc {
                if e[s1] == 0.0 {
                    continue;
                }
                for c1 in 0..nc {
                    for s2 in 0..nc {
                        let ee = e[s1] * e[s2];
                        for c2 in 0..nc {
                            hess[(s1 * nc + c1, s2 * nc + c2)] -= ee * mark.hess[c1 * nc + c2];
                        }
                    }
                }
            }
        }
    }
    Ok(Derivatives { value, grad, hess })
}

/// Parameter block to differentiate with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrt {
    /// `∂L/∂μ_u^(c)` for all `c` (length `N_c`).
    Baseline(usize),
    /// `∂L/∂w_vu` for all `v` (length `N_u`); zero for `v ∉ F_u`.
    Influence(usize),
    /// `∂L/∂σ_sc`, flattened row-major (length `N_c²`).
    Interaction,
}

pub(crate) fn user_point(params: &ModelParams, stats: &UserStatistics) -> Vec<f64> {
    let u = stats.user;
    let mut x: Vec<f64> = params.baseline.row(u).iter().copied().collect();
    x.extend(stats.influencers.iter().map(|&v| params.influence[(v, u)]));
    x
}

/// Exact gradient of the full-history log-likelihood.
pub fn gradient(params: &ModelParams, graph: &UserGraph, log: &EventLog, wrt: Wrt) -> Result<DVector<f64>> {
    check_inputs(params, graph, log.events())?;
    let window = ScoreWindow::full(log);
    match wrt {
        Wrt::Baseline(u) | Wrt::Influence(u) => {
            if u >= params.n_users() {
                return Err(Error::UserOutOfRange {
                    user: u,
                    n_users: params.n_users(),
                });
            }
            let by_user = split_by_user(log.events(), params.n_users());
            let stats = user_statistics(u, graph, &by_user, params.n_cascades(), &params.kernel, window);
            let x = user_point(params, &stats);
            let d = user_objective(&stats, &params.interaction, params.mixing, &x, 1)
                .map_err(infeasible_error)?;
            let nc = params.n_cascades();
            Ok(match wrt {
                Wrt::Baseline(_) => DVector::from_iterator(nc, d.grad.iter().take(nc).map(|g| -g)),
                _ => {
                    let mut out = DVector::zeros(params.n_users());
                    for (j, &v) in stats.influencers.iter().enumerate() {
                        out[v] = -d.grad[nc + j];
                    }
                    out
                }
            })
        }
        Wrt::Interaction => {
            let stats = sigma_statistics(params, graph, log.events(), window)?;
            let sigma: Vec<f64> = params.interaction.transpose().iter().copied().collect();
            let d = sigma_objective(&stats, params.mixing, &sigma, 1).map_err(infeasible_error)?;
            Ok(-d.grad)
        }
    }
}

/// Hessian of `−L` in the flattened (row-major) entries of Σ.
///
/// Requires Boltzmann mixing; the result is positive semidefinite.
pub fn hessian_sigma(params: &ModelParams, graph: &UserGraph, log: &EventLog) -> Result<DMatrix<f64>> {
    if !matches!(params.mixing, Mixing::Boltzmann { .. }) {
        return Err(Error::InvalidConfig(format!(
            "interaction Hessian needs Boltzmann mixing, got {:?}",
            params.mixing
        )));
    }
    check_inputs(params, graph, log.events())?;
    let stats = sigma_statistics(params, graph, log.events(), ScoreWindow::full(log))?;
    let sigma: Vec<f64> = params.interaction.transpose().iter().copied().collect();
    Ok(sigma_objective(&stats, params.mixing, &sigma, 2)
        .map_err(infeasible_error)?
        .hess)
}

/// `−L` summed over all users from the per-user statistics.
pub(crate) fn total_from_users(
    stats: &[UserStatistics],
    params: &ModelParams,
) -> core::result::Result<f64, Infeasible> {
    let mut total = 0.0;
    for s in stats {
        let x = user_point(params, s);
        total += user_objective(s, &params.interaction, params.mixing, &x, 0)?.value;
    }
    Ok(total)
}
