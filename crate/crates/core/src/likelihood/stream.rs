use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::intensity::contextual_into;
use crate::model::{Event, EventLog, IntensityState, Mixing, ModelParams, UserGraph};

/// Log-likelihood split into its additive pieces.
///
/// `total = event_terms + partition_terms − compensator` and
/// `total = Σ_u per_user[u]`. For Boltzmann mixing `event_terms` collects
/// `log λ_{u_i}(t_i) + β ν*_{u_i}^{(c_i)}(t_i)` and `partition_terms` collects
/// `−log Z_{u_i}(t_i)`; for linear mixing they are `log λ + log ν*` and
/// `−log Σ_s ν*^{(s)}`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LikelihoodBreakdown {
    pub total: f64,
    pub per_user: Vec<f64>,
    pub event_terms: f64,
    pub compensator: f64,
    pub partition_terms: f64,
    /// Number of events that contributed terms.
    pub n_scored: usize,
}

/// Which events of a sorted slice are scored and over which window the
/// compensator is integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreWindow {
    /// Events with index `< score_from` are context only.
    pub score_from: usize,
    pub t0: f64,
    pub t1: f64,
}

impl ScoreWindow {
    pub fn full(log: &EventLog) -> Self {
        Self {
            score_from: 0,
            t0: 0.0,
            t1: log.horizon(),
        }
    }

    pub(crate) fn check(&self, events: &[Event]) -> Result<()> {
        if !(self.t0 >= 0.0 && self.t1 >= self.t0 && self.t1.is_finite()) {
            return Err(Error::InvalidWindow {
                t0: self.t0,
                t1: self.t1,
            });
        }
        if self.score_from > events.len() {
            return Err(Error::InvalidConfig(format!(
                "score_from {} beyond {} events",
                self.score_from,
                events.len()
            )));
        }
        for (index, e) in events.iter().enumerate().skip(self.score_from) {
            if e.time < self.t0 || e.time > self.t1 {
                return Err(Error::InvalidEvent {
                    index,
                    reason: format!("scored event at t={} outside [{}, {}]", e.time, self.t0, self.t1),
                });
            }
        }
        if events.windows(2).any(|w| w[0].canonical_cmp(&w[1]).is_gt()) {
            return Err(Error::InvalidConfig("events are not in canonical order".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_inputs(params: &ModelParams, graph: &UserGraph, events: &[Event]) -> Result<()> {
    params.validate()?;
    if graph.n_users() != params.n_users() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} users, parameters {}",
            graph.n_users(),
            params.n_users()
        )));
    }
    for e in events {
        if e.user >= params.n_users() {
            return Err(Error::UserOutOfRange {
                user: e.user,
                n_users: params.n_users(),
            });
        }
        if e.cascade >= params.n_cascades() {
            return Err(Error::CascadeOutOfRange {
                cascade: e.cascade,
                n_cascades: params.n_cascades(),
            });
        }
    }
    Ok(())
}

/// `∫_{t0}^{t1} Σ_u λ_u(s) ds` in closed form, per user.
pub(crate) fn compensator_per_user(
    params: &ModelParams,
    graph: &UserGraph,
    events: &[Event],
    t0: f64,
    t1: f64,
) -> Vec<f64> {
    let span = t1 - t0;
    let mut out: Vec<f64> = params.total_baselines().into_iter().map(|m| m * span).collect();
    for e in events {
        if e.time >= t1 {
            break;
        }
        let k = params.kernel.window_integral(e.time, t0, t1);
        for &u in graph.followers(e.user) {
            out[u] += params.influence[(e.user, u)] * k;
        }
    }
    out
}

/// Closed-form integral of the total intensity over `[t0, t1]`; `−compensator` is the
/// log-probability of seeing no event in that window. Every event of `log` before
/// `t1` contributes its decayed excitation.
pub fn compensator(
    params: &ModelParams,
    graph: &UserGraph,
    log: &EventLog,
    t0: f64,
    t1: f64,
) -> Result<f64> {
    if !(t0 >= 0.0 && t1 >= t0 && t1.is_finite()) {
        return Err(Error::InvalidWindow { t0, t1 });
    }
    check_inputs(params, graph, log.events())?;
    Ok(compensator_per_user(params, graph, log.events(), t0, t1).iter().sum())
}

/// Full-history log-likelihood on `[0, T]`.
pub fn log_likelihood(params: &ModelParams, graph: &UserGraph, log: &EventLog) -> Result<LikelihoodBreakdown> {
    log_likelihood_window(params, graph, log.events(), ScoreWindow::full(log))
}

/// Per-user summand of the log-likelihood.
pub fn partial_log_likelihood(
    params: &ModelParams,
    graph: &UserGraph,
    log: &EventLog,
    u: usize,
) -> Result<f64> {
    if u >= params.n_users() {
        return Err(Error::UserOutOfRange {
            user: u,
            n_users: params.n_users(),
        });
    }
    Ok(log_likelihood(params, graph, log)?.per_user[u])
}

/// Log-likelihood of the events selected by `window`, with all earlier events as context.
pub fn log_likelihood_window(
    params: &ModelParams,
    graph: &UserGraph,
    events: &[Event],
    window: ScoreWindow,
) -> Result<LikelihoodBreakdown> {
    check_inputs(params, graph, events)?;
    window.check(events)?;
    let n_users = params.n_users();
    let n_cascades = params.n_cascades();
    let mu = params.total_baselines();

    let mut event_user = vec![0.0; n_users];
    let mut partition_user = vec![0.0; n_users];
    let mut event_terms = 0.0;
    let mut partition_terms = 0.0;
    let mut nu_star = vec![0.0; n_cascades];
    let mut scaled = vec![0.0; n_cascades];

    let start = events.first().map_or(0.0, |e| e.time.min(window.t0));
    let mut state = IntensityState::starting_at(n_users, n_cascades, start);
    let mut i = 0;
    while i < events.len() {
        let t = events[i].time;
        let mut j = i;
        while j < events.len() && events[j].time == t {
            j += 1;
        }
        state.advance(t, &params.kernel)?;
        for (index, e) in events.iter().enumerate().take(j).skip(i.max(window.score_from)) {
            let u = e.user;
            let lambda = mu[u] + state.excitation_row(u).iter().sum::<f64>();
            let impossible = Error::ImpossibleEvent {
                index,
                user: u,
                cascade: e.cascade,
                time: t,
            };
            if !(lambda > 0.0) {
                return Err(impossible);
            }
            contextual_into(params, state.excitation_row(u), u, &mut nu_star);
            let (ev, part) = match params.mixing {
                Mixing::Boltzmann { beta } => {
                    for (s, &x) in scaled.iter_mut().zip(&nu_star) {
                        *s = beta * x;
                    }
                    (
                        math::ln(lambda) + beta * nu_star[e.cascade],
                        -math::log_sum_exp(&scaled),
                    )
                }
                Mixing::Linear => {
                    let nu = nu_star[e.cascade];
                    if !(nu > 0.0) {
                        return Err(impossible);
                    }
                    let total: f64 = nu_star.iter().sum();
                    (math::ln(lambda) + math::ln(nu), -math::ln(total))
                }
            };
            event_user[u] += ev;
            partition_user[u] += part;
            event_terms += ev;
            partition_terms += part;
        }
        for e in &events[i..j] {
            state.apply_event(e, params, graph)?;
        }
        i = j;
    }

    let comp = compensator_per_user(params, graph, events, window.t0, window.t1);
    let per_user: Vec<f64> = (0..n_users)
        .map(|u| event_user[u] + partition_user[u] - comp[u])
        .collect();
    let compensator: f64 = comp.iter().sum();
    let total = event_terms + partition_terms - compensator;
    if !total.is_finite() {
        return Err(Error::NonFinite("log-likelihood".into()));
    }
    Ok(LikelihoodBreakdown {
        total,
        per_user,
        event_terms,
        compensator,
        partition_terms,
        n_scored: events.len() - window.score_from,
    })
}
