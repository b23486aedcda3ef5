//! Parameter-free sufficient statistics for the per-user likelihood.
//!
//! With the kernel fixed, the partial log-likelihood of user `u` depends on the
//! history only through, for every scored event `i` of `u` and every influencer
//! `v ∈ F_u`, the per-cascade decayed counts
//! `G_i[v][s] = Σ_{e_j ∈ H_v^(s)(t_i)} κ(t_i − t_j)` and, per influencer, the
//! compensator weight `K_v = Σ_{e_j ∈ H_v} ∫_{t0}^{t1} κ(s − t_j) ds`.
//! Both are computed once and reused across optimizer iterations.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{Event, ExponentialKernel, UserGraph};

use super::ScoreWindow;

#[derive(Debug, Clone)]
pub(crate) struct UserStatistics {
    pub user: usize,
    pub influencers: Vec<usize>,
    pub n_cascades: usize,
    /// Cascade of each scored event of `user`.
    pub cascades: Vec<usize>,
    /// Position of each scored event in the full event slice.
    pub indices: Vec<usize>,
    /// Time of each scored event.
    pub times: Vec<f64>,
    /// `G_i` for every scored event, row-major `influencer × cascade`, concatenated.
    pub decayed: Vec<f64>,
    /// `K_v` for every influencer.
    pub compensator_weights: Vec<f64>,
    /// `t1 − t0`.
    pub span: f64,
}

impl UserStatistics {
    pub fn n_events(&self) -> usize {
        self.cascades.len()
    }

    /// `G_i` as a slice of length `|F_u| · N_c`.
    pub fn event_block(&self, i: usize) -> &[f64] {
        let stride = self.influencers.len() * self.n_cascades;
        &self.decayed[i * stride..(i + 1) * stride]
    }
}

/// Per-user event times and cascades, in time order.
pub(crate) fn split_by_user(events: &[Event], n_users: usize) -> Vec<Vec<(usize, f64, usize)>> {
    let mut out = vec![Vec::new(); n_users];
    for (index, e) in events.iter().enumerate() {
        out[e.user].push((index, e.time, e.cascade));
    }
    out
}

pub(crate) fn user_statistics(
    u: usize,
    graph: &UserGraph,
    by_user: &[Vec<(usize, f64, usize)>],
    n_cascades: usize,
    kernel: &ExponentialKernel,
    window: ScoreWindow,
) -> UserStatistics {
    let influencers = graph.influencers(u).to_vec();
    let scored: Vec<(usize, f64, usize)> = by_user[u]
        .iter()
        .filter(|(index, _, _)| *index >= window.score_from)
        .copied()
        .collect();
    let k = influencers.len();
    let stride = k * n_cascades;
    let mut decayed = vec![0.0; scored.len() * stride];
    let mut compensator_weights = vec![0.0; k];
    let mut acc = vec![0.0; n_cascades];

    for (j, &v) in influencers.iter().enumerate() {
        let source = &by_user[v];
        compensator_weights[j] = source
            .iter()
            .take_while(|(_, t, _)| *t < window.t1)
            .map(|&(_, t, _)| kernel.window_integral(t, window.t0, window.t1))
            .sum();

        acc.fill(0.0);
        let mut acc_time = f64::NEG_INFINITY;
        let mut next = 0;
        for (i, &(_, t_i, _)) in scored.iter().enumerate() {
            while next < source.len() && source[next].1 < t_i {
                let (_, t_j, c_j) = source[next];
                if acc_time > f64::NEG_INFINITY {
                    let d = kernel.decay(t_j - acc_time);
                    acc.iter_mut().for_each(|a| *a *= d);
                }
                acc[c_j] += 1.0;
                acc_time = t_j;
                next += 1;
            }
            if acc_time > f64::NEG_INFINITY {
                let d = kernel.decay(t_i - acc_time);
                acc.iter_mut().for_each(|a| *a *= d);
                acc_time = t_i;
            }
            let base = i * stride + j * n_cascades;
            decayed[base..base + n_cascades].copy_from_slice(&acc);
        }
    }

    UserStatistics {
        user: u,
        influencers,
        n_cascades,
        cascades: scored.iter().map(|&(_, _, c)| c).collect(),
        indices: scored.iter().map(|&(i, _, _)| i).collect(),
        times: scored.iter().map(|&(_, t, _)| t).collect(),
        decayed,
        compensator_weights,
        span: window.t1 - window.t0,
    }
}

/// Statistics for every user.
pub(crate) fn all_user_statistics(
    graph: &UserGraph,
    events: &[Event],
    n_cascades: usize,
    kernel: &ExponentialKernel,
    window: ScoreWindow,
) -> Vec<UserStatistics> {
    let by_user = split_by_user(events, graph.n_users());
    let build = |u| user_statistics(u, graph, &by_user, n_cascades, kernel, window);
    #[cfg(feature = "std")]
    {
        use rayon::prelude::*;
        (0..graph.n_users()).into_par_iter().map(build).collect()
    }
    #[cfg(not(feature = "std"))]
    {
        (0..graph.n_users()).map(build).collect()
    }
}
