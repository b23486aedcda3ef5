use alloc::vec;
use alloc::vec::Vec;

use super::{Event, ExponentialKernel, ModelParams, UserGraph};
use crate::error::{Error, Result};

/// Recursive excitation accumulators for the exponential kernel.
///
/// `excitation(u, c) = Σ_{v∈F_u} w_vu Σ_{e_j ∈ H_v^(c)(t_last)} κ(t_last − t_j)`, so that
/// `ν_u^(c)(t_last) = μ_u^(c) + excitation(u, c)`. Events applied at `t_last` do
/// not change intensities evaluated *before* they were applied; callers evaluate
/// all events sharing a timestamp first and apply them afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityState {
    t_last: f64,
    n_cascades: usize,
    excitation: Vec<f64>,
}

impl IntensityState {
    /// Empty history at `t = 0`.
    pub fn new(n_users: usize, n_cascades: usize) -> Self {
        Self::starting_at(n_users, n_cascades, 0.0)
    }

    pub fn starting_at(n_users: usize, n_cascades: usize, t: f64) -> Self {
        Self {
            t_last: t,
            n_cascades,
            excitation: vec![0.0; n_users * n_cascades],
        }
    }

    pub fn for_params(params: &ModelParams) -> Self {
        Self::new(params.n_users(), params.n_cascades())
    }

    pub fn time(&self) -> f64 {
        self.t_last
    }

    pub fn n_users(&self) -> usize {
        self.excitation.len().checked_div(self.n_cascades).unwrap_or(0)
    }

    pub fn n_cascades(&self) -> usize {
        self.n_cascades
    }

    pub fn excitation(&self, u: usize, c: usize) -> f64 {
        self.excitation[u * self.n_cascades + c]
    }

    /// Excitation of user `u` on every cascade.
    pub fn excitation_row(&self, u: usize) -> &[f64] {
        let k = self.n_cascades;
        &self.excitation[u * k..(u + 1) * k]
    }

    pub fn set_excitation(&mut self, u: usize, c: usize, value: f64) {
        self.excitation[u * self.n_cascades + c] = value;
    }

    /// Moves the state to time `t`, decaying all excitation by `exp(−(t − t_last)/τ)`.
    pub fn advance(&mut self, t: f64, kernel: &ExponentialKernel) -> Result<()> {
        if t < self.t_last || t.is_nan() {
            return Err(Error::TimeReversal {
                current: self.t_last,
                requested: t,
            });
        }
        if t > self.t_last {
            let factor = kernel.decay(t - self.t_last);
            for x in &mut self.excitation {
                *x *= factor;
            }
            self.t_last = t;
        }
        Ok(())
    }

    /// Consuming form of [`advance`](Self::advance).
    pub fn advanced(mut self, t: f64, kernel: &ExponentialKernel) -> Result<Self> {
        self.advance(t, kernel)?;
        Ok(self)
    }

    /// Adds the jump `w_{e.user, u}` to `excitation(u, e.cascade)` for every follower `u`.
    pub fn apply_event(&mut self, e: &Event, params: &ModelParams, graph: &UserGraph) -> Result<()> {
        if e.time != self.t_last {
            return Err(Error::StaleState {
                state: self.t_last,
                event: e.time,
            });
        }
        if e.user >= graph.n_users() {
            return Err(Error::UserOutOfRange {
                user: e.user,
                n_users: graph.n_users(),
            });
        }
        if e.cascade >= self.n_cascades {
            return Err(Error::CascadeOutOfRange {
                cascade: e.cascade,
                n_cascades: self.n_cascades,
            });
        }
        let k = self.n_cascades;
        for &u in graph.followers(e.user) {
            self.excitation[u * k + e.cascade] += params.influence[(e.user, u)];
        }
        Ok(())
    }
}
