//! Held-out scoring and comparison of real against simulated activity.
//!
//! Logs are split by event index. Test events are scored with the training
//! events as context, and simulated test periods are warm-started from the
//! training history so both start from the same excitation state.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::likelihood::{log_likelihood_window, LikelihoodBreakdown, ScoreWindow};
use crate::math;
use crate::model::{Event, EventLog, ModelParams, UserGraph};
use crate::rng::replication_rng;
use crate::simulator::{empirical_intensity_window, simulate_with_rng, Grouping};

/// Splits after the first `⌊fraction · N_e⌋` events.
///
/// The training log ends at its last event time (the split boundary); the
/// test log keeps the original horizon.
pub fn split_train_test(log: &EventLog, fraction: f64) -> Result<(EventLog, EventLog)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("train fraction {fraction} must lie in (0, 1)")));
    }
    let n = log.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("cannot split a log of {n} events")));
    }
    let n_train = math::floor(fraction * n as f64) as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidConfig(format!(
            "train fraction {fraction} leaves an empty side on {n} events"
        )));
    }
    let (train, test) = log.events().split_at(n_train);
    let boundary = train[n_train - 1].time;
    Ok((
        EventLog::new(train.to_vec(), boundary)?,
        EventLog::new(test.to_vec(), log.horizon())?,
    ))
}

fn context_events(train: &EventLog, context_fraction: Option<f64>) -> Result<&[Event]> {
    let events = train.events();
    match context_fraction {
        None => Ok(events),
        Some(x) if x > 0.0 && x <= 1.0 => {
            let keep = (math::ceil(x * events.len() as f64) as usize).min(events.len());
            Ok(&events[events.len() - keep..])
        }
        Some(x) => Err(Error::InvalidConfig(format!("context fraction {x} must lie in (0, 1]"))),
    }
}

/// Breakdown of the test-period log-likelihood on `[T_train, T]`.
///
/// `context_fraction = Some(x)` keeps only the last `⌈x · N_train⌉` training
/// events as context.
pub fn test_log_likelihood_breakdown(
    params: &ModelParams,
    graph: &UserGraph,
    train: &EventLog,
    test: &EventLog,
    context_fraction: Option<f64>,
) -> Result<LikelihoodBreakdown> {
    let context = context_events(train, context_fraction)?;
    if test.horizon() < train.horizon() {
        return Err(Error::InvalidWindow {
            t0: train.horizon(),
            t1: test.horizon(),
        });
    }
    let mut events = Vec::with_capacity(context.len() + test.len());
    events.extend_from_slice(context);
    events.extend_from_slice(test.events());
    let window = ScoreWindow {
        score_from: context.len(),
        t0: train.horizon(),
        t1: test.horizon(),
    };
    log_likelihood_window(params, graph, &events, window)
}

pub fn test_log_likelihood(
    params: &ModelParams,
    graph: &UserGraph,
    train: &EventLog,
    test: &EventLog,
    context_fraction: Option<f64>,
) -> Result<f64> {
    Ok(test_log_likelihood_breakdown(params, graph, train, test, context_fraction)?.total)
}

/// Test log-likelihood restricted to the `⌈top_fraction · N_u⌉` users with the
/// most training events (ties broken by lower id).
pub fn quantile_log_likelihood(
    params: &ModelParams,
    graph: &UserGraph,
    train: &EventLog,
    test: &EventLog,
    top_fraction: f64,
) -> Result<f64> {
    let breakdown = test_log_likelihood_breakdown(params, graph, train, test, None)?;
    quantile_from_breakdown(&breakdown, train, params.n_users(), top_fraction)
}

fn quantile_from_breakdown(
    breakdown: &LikelihoodBreakdown,
    train: &EventLog,
    n_users: usize,
    top_fraction: f64,
) -> Result<f64> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("top fraction {top_fraction} must lie in (0, 1]")));
    }
    let counts = train.user_counts(n_users);
    let mut order: Vec<usize> = (0..n_users).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let k = (math::ceil(top_fraction * n_users as f64) as usize).min(n_users);
    Ok(order[..k].iter().map(|&u| breakdown.per_user[u]).sum())
}

/// `1 / (1 + mean_b |real_b − sim_b|)`, in `(0, 1]`.
///
/// The distance is averaged over bins so the score does not depend on how
/// finely the window is divided.
pub fn inverse_l1(real: &[f64], sim: &[f64]) -> Result<f64> {
    if real.len() != sim.len() || real.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "binned series of lengths {} and {}",
            real.len(),
            sim.len()
        )));
    }
    let mean_abs = real.iter().zip(sim).map(|(a, b)| math::abs(a - b)).sum::<f64>() / real.len() as f64;
    Ok(1.0 / (1.0 + mean_abs))
}

/// Product-moment correlation; fails on zero-variance input.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("series of lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / math::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Entity whose activity is ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entity {
    User(usize),
    Cascade(usize),
}

/// Descending event counts of the real log next to the per-rank mean and
/// standard deviation over simulated replications.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankedActivity {
    pub real: Vec<usize>,
    pub simulated_mean: Vec<f64>,
    pub simulated_std: Vec<f64>,
}

fn ranked_counts(log: &EventLog, by: Entity) -> Vec<usize> {
    let mut counts = match by {
        Entity::User(n) => log.user_counts(n),
        Entity::Cascade(n) => log.cascade_counts(n),
    };
    counts.sort_unstable_by(|a, b| b.cmp(a));
    counts
}

/// Ranks activity per entity; the standard deviation is the population one
/// over replications.
pub fn ranked_activity(real: &EventLog, simulated: &[EventLog], by: Entity) -> Result<RankedActivity> {
    if simulated.is_empty() {
        return Err(Error::InvalidConfig("ranked activity needs at least one simulated log".to_string()));
    }
    let real_counts = ranked_counts(real, by);
    let n = real_counts.len();
    let k = simulated.len() as f64;
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    for log in simulated {
        for (rank, &c) in ranked_counts(log, by).iter().enumerate() {
            sum[rank] += c as f64;
            sum_sq[rank] += (c * c) as f64;
        }
    }
    let simulated_mean: Vec<f64> = sum.iter().map(|s| s / k).collect();
    let simulated_std = sum_sq
        .iter()
        .zip(&simulated_mean)
        .map(|(sq, m)| math::sqrt((sq / k - m * m).max(0.0)))
        .collect();
    Ok(RankedActivity {
        real: real_counts,
        simulated_mean,
        simulated_std,
    })
}

/// Simulates `replications` test periods warm-started from `train`.
///
/// Replication `r` draws from its own random stream, so results do not
/// depend on scheduling.
pub fn simulate_replications(
    params: &ModelParams,
    graph: &UserGraph,
    train: &EventLog,
    horizon: f64,
    replications: usize,
    seed: u64,
) -> Result<Vec<EventLog>> {
    let run = |r: usize| -> Result<EventLog> {
        let mut rng = replication_rng(seed, r as u64);
        let events = simulate_with_rng(params, graph, train.events(), train.horizon(), horizon, &mut rng)?;
        EventLog::new(events, horizon)
    };
    #[cfg(feature = "std")]
    {
        use rayon::prelude::*;
        (0..replications).into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "std"))]
    {
        (0..replications).map(run).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Bins across the test window for the intensity comparisons.
    pub n_bins: usize,
    pub replications: usize,
    pub seed: u64,
    /// Context fractions of the training log for the likelihood-vs-context series.
    pub context_fractions: Vec<f64>,
    /// Top-activity fractions for the quantile log-likelihoods.
    pub top_fractions: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_bins: 100,
            replications: 10,
            seed: 0,
            context_fractions: vec![0.1, 0.25, 0.5, 0.75, 1.0],
            top_fractions: vec![0.05, 0.1, 0.25],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FractionScore {
    pub fraction: f64,
    pub loglik: f64,
}

/// Per-cascade scores plus one on the series summed over cascades.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CascadeScores<T> {
    pub per_cascade: Vec<T>,
    pub overall: T,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricReport {
    pub test_loglik: f64,
    pub n_test_events: usize,
    pub loglik_vs_train_fraction: Vec<FractionScore>,
    /// Inverse l1-distance between real and simulated binned rates, averaged over replications.
    pub inverse_l1: CascadeScores<f64>,
    /// Correlation between the real binned rates and the replication-mean
    /// simulated rates; `None` where either series is constant.
    pub pearson: CascadeScores<Option<f64>>,
    pub ranked_users: RankedActivity,
    pub ranked_cascades: RankedActivity,
    pub quantile_loglik: Vec<FractionScore>,
    pub n_bins: usize,
    pub replications: usize,
}

fn mean_series(series: &[Vec<f64>]) -> Vec<f64> {
    let k = series.len() as f64;
    let mut out = vec![0.0; series.first().map_or(0, Vec::len)];
    for s in series {
        for (o, v) in out.iter_mut().zip(s) {
            *o += v / k;
        }
    }
    out
}

/// The full metric suite of a fitted model on a train/test split.
pub fn evaluate(
    params: &ModelParams,
    graph: &UserGraph,
    train: &EventLog,
    test: &EventLog,
    cfg: &EvalConfig,
) -> Result<MetricReport> {
    if cfg.n_bins == 0 || cfg.replications == 0 {
        return Err(Error::InvalidConfig("bins and replications must be ≥ 1".to_string()));
    }
    let n_users = params.n_users();
    let n_cascades = params.n_cascades();
    let breakdown = test_log_likelihood_breakdown(params, graph, train, test, None)?;
    let loglik_vs_train_fraction = cfg
        .context_fractions
        .iter()
        .map(|&fraction| {
            test_log_likelihood(params, graph, train, test, Some(fraction)).map(|loglik| FractionScore { fraction, loglik })
        })
        .collect::<Result<Vec<_>>>()?;
    let quantile_loglik = cfg
        .top_fractions
        .iter()
        .map(|&fraction| {
            quantile_from_breakdown(&breakdown, train, n_users, fraction).map(|loglik| FractionScore { fraction, loglik })
        })
        .collect::<Result<Vec<_>>>()?;

    let simulated = simulate_replications(params, graph, train, test.horizon(), cfg.replications, cfg.seed)?;
    let (start, end) = (train.horizon(), test.horizon());
    let by = Grouping::PerCascade(n_cascades);
    let real = empirical_intensity_window(test, start, end, cfg.n_bins, by)?;
    let sims = simulated
        .iter()
        .map(|log| empirical_intensity_window(log, start, end, cfg.n_bins, by))
        .collect::<Result<Vec<_>>>()?;

    let k = sims.len() as f64;
    let mut l1_cascade = vec![0.0; n_cascades];
    let mut l1_overall = 0.0;
    for s in &sims {
        for c in 0..n_cascades {
            l1_cascade[c] += inverse_l1(&real.rates[c], &s.rates[c])? / k;
        }
        l1_overall += inverse_l1(&real.total(), &s.total())? / k;
    }
    let defined = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedCorrelation) => Ok(None),
        Err(e) => Err(e),
    };
    let mut pearson_cascade = Vec::with_capacity(n_cascades);
    for c in 0..n_cascades {
        let series: Vec<Vec<f64>> = sims.iter().map(|s| s.rates[c].clone()).collect();
        pearson_cascade.push(defined(pearson(&real.rates[c], &mean_series(&series)))?);
    }
    let totals: Vec<Vec<f64>> = sims.iter().map(|s| s.total()).collect();
    let pearson_overall = defined(pearson(&real.total(), &mean_series(&totals)))?;

    Ok(MetricReport {
        test_loglik: breakdown.total,
        n_test_events: breakdown.n_scored,
        loglik_vs_train_fraction,
        inverse_l1: CascadeScores {
            per_cascade: l1_cascade,
            overall: l1_overall,
        },
        pearson: CascadeScores {
            per_cascade: pearson_cascade,
            overall: pearson_overall,
        },
        ranked_users: ranked_activity(test, &simulated, Entity::User(n_users))?,
        ranked_cascades: ranked_activity(test, &simulated, Entity::Cascade(n_cascades))?,
        quantile_loglik,
        n_bins: cfg.n_bins,
        replications: cfg.replications,
    })
}
