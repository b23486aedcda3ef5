use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::intensity::contextual_into;
use crate::model::{Event, EventLog, IntensityState, ModelParams, UserGraph};
use crate::rng::{categorical, exponential, stream_rng, uniform, SIMULATION_STREAM};

/// Streams `history` (sorted, all times `≤ until`) into a fresh state positioned at `until`.
pub fn replay_history(
    params: &ModelParams,
    graph: &UserGraph,
    history: &[Event],
    until: f64,
) -> Result<IntensityState> {
    let start = history.first().map_or(until, |e| e.time.min(until));
    let mut state = IntensityState::starting_at(params.n_users(), params.n_cascades(), start);
    for e in history {
        if e.time > until {
            return Err(Error::InvalidConfig(format!(
                "history event at t={} lies after the simulation start {until}",
                e.time
            )));
        }
        state.advance(e.time, &params.kernel)?;
        state.apply_event(e, params, graph)?;
    }
    state.advance(until, &params.kernel)?;
    Ok(state)
}

/// One path on `[0, horizon]` from an empty history, using the simulation stream of `seed`.
pub fn simulate(params: &ModelParams, graph: &UserGraph, horizon: f64, seed: u64) -> Result<EventLog> {
    simulate_from(params, graph, &[], 0.0, horizon, seed)
}

/// One path on `(t_start, t_end]` continuing from `history`.
pub fn simulate_from(
    params: &ModelParams,
    graph: &UserGraph,
    history: &[Event],
    t_start: f64,
    t_end: f64,
    seed: u64,
) -> Result<EventLog> {
    let mut rng = stream_rng(seed, SIMULATION_STREAM);
    let events = simulate_with_rng(params, graph, history, t_start, t_end, &mut rng)?;
    EventLog::new(events, t_end)
}

/// Ogata thinning driven by an arbitrary generator.
///
/// The bound `Λ̄ = Σ_u λ_u(t)` is refreshed at every candidate, accepted or not:
/// with a nonincreasing kernel the total intensity can only decay until the next
/// accepted event. Rejected candidates still move the state forward.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    params: &ModelParams,
    graph: &UserGraph,
    history: &[Event],
    t_start: f64,
    t_end: f64,
    rng: &mut R,
) -> Result<Vec<Event>> {
    params.validate()?;
    if graph.n_users() != params.n_users() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} users, parameters {}",
            graph.n_users(),
            params.n_users()
        )));
    }
    if !(t_start.is_finite() && t_end.is_finite() && t_start >= 0.0 && t_end >= t_start) {
        return Err(Error::InvalidWindow {
            t0: t_start,
            t1: t_end,
        });
    }
    let n_users = params.n_users();
    let n_cascades = params.n_cascades();
    let mut state = replay_history(params, graph, history, t_start)?;
    let mu: Vec<f64> = params.total_baselines();

    let mut lambda = vec![0.0; n_users];
    let refresh = |state: &IntensityState, lambda: &mut [f64]| -> f64 {
        let mut total = 0.0;
        for (u, l) in lambda.iter_mut().enumerate() {
            *l = mu[u] + state.excitation_row(u).iter().sum::<f64>();
            total += *l;
        }
        total
    };
    let mut bound = refresh(&state, &mut lambda);
    let mut nu_star = vec![0.0; n_cascades];
    let mut marks = vec![0.0; n_cascades];
    let mut events = Vec::new();
    let mut t = t_start;

    while bound > 0.0 {
        t += exponential(rng, bound);
        if t > t_end {
            break;
        }
        state.advance(t, &params.kernel)?;
        let total = refresh(&state, &mut lambda);
        debug_assert!(
            total <= bound * (1.0 + 1e-12) + 1e-300,
            "thinning bound violated: {total} > {bound}"
        );
        if uniform(rng) * bound <= total {
            let u = categorical(rng, &lambda, total);
            contextual_into(params, state.excitation_row(u), u, &mut nu_star);
            params.mixing.density_into(&nu_star, &mut marks);
            let c = categorical(rng, &marks, 1.0);
            let e = Event::new(u, c, t);
            state.apply_event(&e, params, graph)?;
            events.push(e);
            bound = refresh(&state, &mut lambda);
        } else {
            bound = total;
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExponentialKernel, Mixing};
    use nalgebra::DMatrix;

    fn poisson(mu: f64) -> (ModelParams, UserGraph) {
        let p = ModelParams::new(
            DMatrix::from_element(1, 1, mu),
            DMatrix::identity(1, 1),
            DMatrix::zeros(1, 1),
            ExponentialKernel::new(1.0).unwrap(),
            Mixing::Linear,
        )
        .unwrap();
        (p, UserGraph::new(1))
    }

    #[test]
    fn zero_baseline_gives_empty_log() {
        let (mut p, _) = poisson(0.0);
        p.influence[(0, 0)] = 0.9;
        let g = UserGraph::from_weights(&p.influence).unwrap();
        let log = simulate(&p, &g, 100.0, 5).unwrap();
        assert!(log.is_empty());
    }

    #[test]
    fn homogeneous_poisson_count() {
        let (p, g) = poisson(1.0);
        let log = simulate(&p, &g, 1000.0, 9).unwrap();
        let n = log.len() as f64;
        assert!((n - 1000.0).abs() < 3.0 * 1000f64.sqrt(), "count {n}");
    }

    #[test]
    fn deterministic() {
        let (p, g) = poisson(0.5);
        assert_eq!(simulate(&p, &g, 50.0, 1).unwrap(), simulate(&p, &g, 50.0, 1).unwrap());
    }

    #[test]
    fn warm_start_respects_window() {
        let (p, g) = poisson(0.5);
        let hist = [Event::new(0, 0, 1.0), Event::new(0, 0, 2.0)];
        let log = simulate_from(&p, &g, &hist, 5.0, 20.0, 2).unwrap();
        assert!(log.events().iter().all(|e| e.time > 5.0 && e.time <= 20.0));
        assert!(simulate_from(&p, &g, &hist, 1.5, 20.0, 2).is_err());
    }
}
