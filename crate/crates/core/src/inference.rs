//! Alternating maximum-likelihood estimation of (M, Σ, W).
//!
//! Each outer iteration first solves for Σ with (M, W) fixed, then for every
//! user `u` solves for `(μ_u^(·), w_{·u})` with Σ fixed. Both sub-problems are
//! convex (see the `likelihood` module) and are solved by projected Newton.
//! The kernel time scale and the mixing temperature are fixed per fit;
//! [`cross_validate`] chooses them on held-out data.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::evaluation::{split_train_test, test_log_likelihood};
use crate::likelihood::derivatives::{
    infeasible_error, sigma_objective, sigma_statistics, total_from_users, user_objective, user_point,
    SigmaStatistics,
};
use crate::likelihood::features::{all_user_statistics, UserStatistics};
use crate::likelihood::ScoreWindow;
use crate::math;
use crate::model::{EventLog, ExponentialKernel, Mixing, ModelParams, UserGraph};
use crate::optim::{projected_newton, Feasible, NewtonOptions, Objective};

/// Floor applied to empirical baseline rates at initialization.
pub const BASELINE_FLOOR: f64 = 1e-4;
/// Initial weight on every edge of the graph.
pub const INITIAL_INFLUENCE: f64 = 0.1;

/// How Σ is treated during a fit.
#[derive(Debug, Clone, PartialEq)]
pub enum InteractionMode {
    /// Estimated, starting from uniform rows.
    Learn,
    /// Held at the identity (no cross-cascade excitation).
    FixedIdentity,
    /// Held at the given row-stochastic matrix.
    Fixed(DMatrix<f64>),
}

/// Starting point of the alternating scheme.
#[derive(Debug, Clone, PartialEq)]
pub enum InitScheme {
    /// Uniform Σ rows, empirical per-cascade rates for M, [`INITIAL_INFLUENCE`] on edges.
    Empirical,
    /// Start from the given parameters (their kernel and mixing are overridden by the config).
    Given(ModelParams),
}

/// Model family fitted by [`fit`], as a special case of the general process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelVariant {
    /// Boltzmann mixing with learned Σ.
    Mic { beta: f64 },
    /// Linear mixing with learned Σ.
    LinMic,
    /// Linear mixing with Σ = I (independent cascades).
    Ic,
    /// Boltzmann mixing with Σ = I (correlated cascades).
    Cc { beta: f64 },
}

impl ModelVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ModelVariant::Mic { .. } => "MIC",
            ModelVariant::LinMic => "linMIC",
            ModelVariant::Ic => "IC",
            ModelVariant::Cc { .. } => "CC",
        }
    }

    pub fn mixing(&self) -> Mixing {
        match *self {
            ModelVariant::Mic { beta } | ModelVariant::Cc { beta } => Mixing::Boltzmann { beta },
            ModelVariant::LinMic | ModelVariant::Ic => Mixing::Linear,
        }
    }

    pub fn interaction_mode(&self) -> InteractionMode {
        match self {
            ModelVariant::Mic { .. } | ModelVariant::LinMic => InteractionMode::Learn,
            ModelVariant::Ic | ModelVariant::Cc { .. } => InteractionMode::FixedIdentity,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Stop when the train log-likelihood changes by less than this between outer iterations.
    pub epsilon: f64,
    pub max_outer_iters: usize,
    pub tau: f64,
    pub mixing: Mixing,
    pub interaction: InteractionMode,
    pub init: InitScheme,
    /// Number of cascades; defaults to the largest cascade id in the log + 1.
    pub n_cascades: Option<usize>,
    /// Solve the per-user sub-problems on the thread pool (needs the `std` feature).
    pub parallel_users: bool,
    /// Lower bound on every fitted baseline `μ_u^(c)`. The unconstrained
    /// estimate is 0 for pairs without training events, which makes any
    /// held-out event of such a pair impossible; 0 gives the plain MLE.
    pub baseline_floor: f64,
    /// Stopping rule of each Newton sub-solve.
    pub inner: NewtonOptions,
    /// After each outer iteration, try a step along the change made by the
    /// iteration and keep it only if it raises the likelihood.
    pub extrapolate: bool,
}

impl FitConfig {
    pub fn new(tau: f64, mixing: Mixing) -> Self {
        Self {
            epsilon: 1e-3,
            max_outer_iters: 50,
            tau,
            mixing,
            interaction: InteractionMode::Learn,
            init: InitScheme::Empirical,
            n_cascades: None,
            baseline_floor: BASELINE_FLOOR,
            parallel_users: true,
            inner: NewtonOptions::default(),
            extrapolate: true,
        }
    }

    pub fn for_variant(variant: ModelVariant, tau: f64) -> Self {
        Self {
            interaction: variant.interaction_mode(),
            ..Self::new(tau, variant.mixing())
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.baseline_floor >= 0.0 && self.baseline_floor.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "baseline floor must be finite and ≥ 0, got {}",
                self.baseline_floor
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidConfig("max_outer_iters must be ≥ 1".to_string()));
        }
        ExponentialKernel::new(self.tau)?;
        if let Mixing::Boltzmann { beta } = self.mixing {
            Mixing::boltzmann(beta)?;
        }
        if self.inner.max_iters == 0 || !(self.inner.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("invalid inner solver options {:?}", self.inner)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ModelParams,
    /// Train log-likelihood at the initial point and after every outer iteration.
    pub trajectory: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Strictly feasible starting point: uniform Σ rows, `μ_u^(c)` = event rate of
/// `u` on `c` floored at [`BASELINE_FLOOR`], [`INITIAL_INFLUENCE`] on every edge.
pub fn initialize(
    log: &EventLog,
    graph: &UserGraph,
    n_cascades: usize,
    kernel: ExponentialKernel,
    mixing: Mixing,
) -> Result<ModelParams> {
    let n_users = graph.n_users();
    if n_cascades == 0 {
        return Err(Error::InvalidConfig("at least one cascade is required".to_string()));
    }
    log.check_ids(n_users, n_cascades)?;
    let horizon = log.horizon();
    let mut baseline = DMatrix::zeros(n_users, n_cascades);
    for e in log.events() {
        baseline[(e.user, e.cascade)] += 1.0;
    }
    baseline.iter_mut().for_each(|m| {
        let rate: f64 = if horizon > 0.0 { *m / horizon } else { 0.0 };
        *m = rate.max(BASELINE_FLOOR);
    });
    let interaction = DMatrix::from_element(n_cascades, n_cascades, 1.0 / n_cascades as f64);
    let influence = graph.adjacency() * INITIAL_INFLUENCE;
    ModelParams::new(baseline, interaction, influence, kernel, mixing)
}

/// `−L_u` in shifted variables: the first `N_c` coordinates are `μ_u^(c) − floor`.
struct UserProblem<'a> {
    stats: &'a UserStatistics,
    sigma: &'a DMatrix<f64>,
    mixing: Mixing,
    floor: f64,
}

impl UserProblem<'_> {
    fn unshift(&self, x: &[f64]) -> Vec<f64> {
        let nc = self.stats.n_cascades;
        x.iter()
            .enumerate()
            .map(|(i, &v)| if i < nc { v + self.floor } else { v })
            .collect()
    }
}

impl Objective for UserProblem<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        user_objective(self.stats, self.sigma, self.mixing, &self.unshift(x), 0).map_or(f64::INFINITY, |d| d.value)
    }

    fn derivatives(&self, x: &[f64]) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        user_objective(self.stats, self.sigma, self.mixing, &self.unshift(x), 2)
            .ok()
            .map(|d| (d.value, d.grad, d.hess))
    }
}

struct SigmaProblem<'a> {
    stats: &'a SigmaStatistics,
    mixing: Mixing,
}

impl Objective for SigmaProblem<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        sigma_objective(self.stats, self.mixing, x, 0).map_or(f64::INFINITY, |d| d.value)
    }

    fn derivatives(&self, x: &[f64]) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        sigma_objective(self.stats, self.mixing, x, 2)
            .ok()
            .map(|d| (d.value, d.grad, d.hess))
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().iter().copied().collect()
}

fn train_log_likelihood(stats: &[UserStatistics], params: &ModelParams) -> Result<f64> {
    let neg = total_from_users(stats, params).map_err(infeasible_error)?;
    if !neg.is_finite() {
        return Err(Error::NonFinite(format!("train log-likelihood {}", -neg)));
    }
    Ok(-neg)
}

fn starting_point(log: &EventLog, graph: &UserGraph, cfg: &FitConfig) -> Result<ModelParams> {
    let kernel = ExponentialKernel::new(cfg.tau)?;
    let n_cascades = match (&cfg.init, cfg.n_cascades) {
        (_, Some(n)) => n,
        (InitScheme::Given(p), None) => p.n_cascades(),
        (InitScheme::Empirical, None) => log.id_extent().1,
    };
    let mut params = match &cfg.init {
        InitScheme::Empirical => initialize(log, graph, n_cascades, kernel, cfg.mixing)?,
        InitScheme::Given(p) => {
            let mut p = p.clone();
            p.kernel = kernel;
            p.mixing = cfg.mixing;
            // keep the influence support on the graph's edges
            let adjacency = graph.adjacency();
            if p.influence.shape() != adjacency.shape() {
                return Err(Error::DimensionMismatch(format!(
                    "initial influence is {:?}, graph has {} users",
                    p.influence.shape(),
                    graph.n_users()
                )));
            }
            p.influence.component_mul_assign(&adjacency);
            p
        }
    };
    match &cfg.interaction {
        InteractionMode::Learn => {}
        InteractionMode::FixedIdentity => params.interaction = DMatrix::identity(n_cascades, n_cascades),
        InteractionMode::Fixed(sigma) => params.interaction = sigma.clone(),
    }
    params.validate()?;
    log.check_ids(params.n_users(), params.n_cascades())?;
    Ok(params)
}

fn sigma_step(
    params: &mut ModelParams,
    graph: &UserGraph,
    log: &EventLog,
    window: ScoreWindow,
    opts: NewtonOptions,
) -> Result<()> {
    let nc = params.n_cascades();
    let stats = sigma_statistics(params, graph, log.events(), window)?;
    let problem = SigmaProblem {
        stats: &stats,
        mixing: params.mixing,
    };
    let report = projected_newton(
        &problem,
        Feasible::RowSimplex { width: nc },
        &row_major(&params.interaction),
        opts,
        "interaction step",
    )?;
    params.interaction = DMatrix::from_row_slice(nc, nc, &report.x);
    Ok(())
}

fn solve_user(stats: &UserStatistics, params: &ModelParams, floor: f64, opts: NewtonOptions) -> Result<Vec<f64>> {
    let problem = UserProblem {
        stats,
        sigma: &params.interaction,
        mixing: params.mixing,
        floor,
    };
    let nc = stats.n_cascades;
    let mut x0 = user_point(params, stats);
    x0.iter_mut().take(nc).for_each(|m| *m = (*m - floor).max(0.0));
    let stage = format!("user {} step", stats.user);
    let report = projected_newton(&problem, Feasible::NonNegative, &x0, opts, &stage)?;
    Ok(problem.unshift(&report.x))
}

fn user_steps(params: &mut ModelParams, stats: &[UserStatistics], cfg: &FitConfig) -> Result<()> {
    let (floor, opts) = (cfg.baseline_floor, cfg.inner);
    let parallel = cfg.parallel_users;
    let frozen: &ModelParams = params;
    let solutions: Vec<Result<Vec<f64>>> = if parallel {
        #[cfg(feature = "std")]
        {
            use rayon::prelude::*;
            stats.par_iter().map(|s| solve_user(s, frozen, floor, opts)).collect()
        }
        #[cfg(not(feature = "std"))]
        {
            stats.iter().map(|s| solve_user(s, frozen, floor, opts)).collect()
        }
    } else {
        stats.iter().map(|s| solve_user(s, frozen, floor, opts)).collect()
    };
    let nc = params.n_cascades();
    for (s, x) in stats.iter().zip(solutions) {
        let x = x?;
        let u = s.user;
        for c in 0..nc {
            params.baseline[(u, c)] = x[c];
        }
        for (j, &v) in s.influencers.iter().enumerate() {
            params.influence[(v, u)] = x[nc + j];
        }
    }
    Ok(())
}

/// Fits the model to `log` with the influence support fixed to `graph`'s edges.
pub fn fit(log: &EventLog, graph: &UserGraph, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    if log.is_empty() {
        return Err(Error::InvalidConfig("cannot fit an empty event log".to_string()));
    }
    let mut params = starting_point(log, graph, cfg)?;
    let window = ScoreWindow::full(log);
    let stats = all_user_statistics(graph, log.events(), params.n_cascades(), &params.kernel, window);
    let learn_sigma = cfg.interaction == InteractionMode::Learn && params.n_cascades() > 1;

    let mut current = train_log_likelihood(&stats, &params)?;
    let mut trajectory = Vec::with_capacity(cfg.max_outer_iters + 1);
    trajectory.push(current);
    let mut converged = false;
    let mut iterations = 0;
    let mut step = 1.0;
    while iterations < cfg.max_outer_iters {
        iterations += 1;
        let previous = params.clone();
        if learn_sigma {
            sigma_step(&mut params, graph, log, window, cfg.inner).map_err(|e| with_trace(e, &trajectory))?;
        }
        user_steps(&mut params, &stats, cfg).map_err(|e| with_trace(e, &trajectory))?;
        let mut next = train_log_likelihood(&stats, &params)?;
        if cfg.extrapolate {
            let candidate = extrapolated(&previous, &params, step, learn_sigma, cfg.baseline_floor);
            match train_log_likelihood(&stats, &candidate) {
                Ok(value) if value > next => {
                    params = candidate;
                    next = value;
                    step = (step * 2.0).min(8.0);
                }
                _ => step = 1.0,
            }
        }
        trajectory.push(next);
        let change = math::abs(next - current);
        current = next;
        if change < cfg.epsilon {
            converged = true;
            break;
        }
    }
    log::debug!(
        "fit finished after {iterations} iterations (converged: {converged}), log-likelihood {current}"
    );
    Ok(FitResult {
        params,
        trajectory,
        converged,
        iterations,
    })
}

/// `current + step · (current − previous)`, projected back onto the feasible set.
fn extrapolated(
    previous: &ModelParams,
    current: &ModelParams,
    step: f64,
    learn_sigma: bool,
    floor: f64,
) -> ModelParams {
    let push = |a: &DMatrix<f64>, b: &DMatrix<f64>, low: f64| (b + (b - a) * step).map(|x| x.max(low));
    let mut out = current.clone();
    out.baseline = push(&previous.baseline, &current.baseline, floor);
    out.influence = push(&previous.influence, &current.influence, 0.0);
    if learn_sigma {
        let nc = current.n_cascades();
        let mut sigma = row_major(&(&current.interaction + (&current.interaction - &previous.interaction) * step));
        Feasible::RowSimplex { width: nc }.project(&mut sigma);
        out.interaction = DMatrix::from_row_slice(nc, nc, &sigma);
    }
    out
}

/// Attaches the outer-loop likelihood trajectory to a solver failure.
fn with_trace(e: Error, trajectory: &[f64]) -> Error {
    match e {
        Error::SolverFailure {
            stage,
            iterations,
            reason,
            trace,
        } => Error::SolverFailure {
            stage,
            iterations,
            reason: format!("{reason}; outer log-likelihoods so far {trajectory:?}"),
            trace,
        },
        other => other,
    }
}

/// One cell of a cross-validation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidationCell {
    pub beta: f64,
    pub tau: f64,
    /// Held-out log-likelihood, or the reason the fit or scoring failed.
    pub score: core::result::Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub best_beta: f64,
    pub best_tau: f64,
    pub best_score: f64,
    /// Cells in β-major order.
    pub table: Vec<CrossValidationCell>,
}

/// Grid search over `(β, τ)` scored by held-out log-likelihood.
///
/// Fits on the first `split` fraction of events and scores the remainder with
/// the training events as context. `base` supplies everything except β and τ;
/// with linear mixing β is irrelevant and every β value yields the same score.
pub fn cross_validate(
    log: &EventLog,
    graph: &UserGraph,
    betas: &[f64],
    taus: &[f64],
    split: f64,
    base: &FitConfig,
) -> Result<CrossValidation> {
    if betas.is_empty() || taus.is_empty() {
        return Err(Error::InvalidConfig("cross-validation grids must be nonempty".to_string()));
    }
    let (train, test) = split_train_test(log, split)?;
    let mut base = base.clone();
    if base.n_cascades.is_none() {
        base.n_cascades = Some(log.id_extent().1);
    }
    let mut table = Vec::with_capacity(betas.len() * taus.len());
    for &beta in betas {
        for &tau in taus {
            let mut cfg = base.clone();
            cfg.tau = tau;
            if let Mixing::Boltzmann { .. } = cfg.mixing {
                cfg.mixing = Mixing::Boltzmann { beta };
            }
            let score = fit(&train, graph, &cfg)
                .and_then(|r| test_log_likelihood(&r.params, graph, &train, &test, None))
                .and_then(|s| {
                    if s.is_finite() {
                        Ok(s)
                    } else {
                        Err(Error::NonFinite(format!("held-out log-likelihood {s}")))
                    }
                })
                .map_err(|e| e.to_string());
            if let Err(reason) = &score {
                log::warn!("cross-validation cell beta={beta} tau={tau} failed: {reason}");
            }
            table.push(CrossValidationCell { beta, tau, score });
        }
    }
    let best = table
        .iter()
        .filter_map(|c| c.score.as_ref().ok().map(|&s| (c, s)))
        .fold(None::<(&CrossValidationCell, f64)>, |acc, (c, s)| match acc {
            Some((_, b)) if b >= s => acc,
            _ => Some((c, s)),
        });
    let Some((cell, best_score)) = best else {
        return Err(Error::SolverFailure {
            stage: "cross-validation".to_string(),
            iterations: table.len(),
            reason: "every grid cell failed".to_string(),
            trace: Vec::new(),
        });
    };
    Ok(CrossValidation {
        best_beta: cell.beta,
        best_tau: cell.tau,
        best_score,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Event;

    fn toy_log() -> (EventLog, UserGraph) {
        let events = [(0, 0, 0.5), (1, 0, 0.9), (0, 1, 1.7), (1, 1, 2.0), (0, 0, 3.1), (1, 0, 3.3)]
            .iter()
            .map(|&(u, c, t)| Event::new(u, c, t))
            .collect();
        let graph = UserGraph::from_edges(2, [(0, 1), (1, 0)]).unwrap();
        (EventLog::new(events, 5.0).unwrap(), graph)
    }

    #[test]
    fn initialization_rules() {
        let (log, graph) = toy_log();
        let graph3 = UserGraph::from_edges(3, graph.edges()).unwrap();
        let p = initialize(&log, &graph3, 2, ExponentialKernel::new(1.0).unwrap(), Mixing::Linear).unwrap();
        assert_eq!(p.interaction, DMatrix::from_element(2, 2, 0.5));
        assert_eq!(p.baseline[(0, 0)], 2.0 / 5.0);
        assert_eq!(p.baseline[(2, 1)], BASELINE_FLOOR);
        assert_eq!(p.influence[(0, 1)], INITIAL_INFLUENCE);
        assert_eq!(p.influence[(0, 0)], 0.0);
    }

    #[test]
    fn single_cascade_keeps_unit_interaction() {
        let events = (0..20).map(|i| Event::new(i % 2, 0, 0.3 + i as f64)).collect();
        let log = EventLog::new(events, 21.0).unwrap();
        let graph = UserGraph::from_edges(2, [(0, 1)]).unwrap();
        let r = fit(&log, &graph, &FitConfig::new(1.0, Mixing::boltzmann(2.0).unwrap())).unwrap();
        assert_eq!(r.params.interaction[(0, 0)], 1.0);
    }

    #[test]
    fn trajectory_is_monotone_and_feasible() {
        let (log, graph) = toy_log();
        let r = fit(&log, &graph, &FitConfig::new(1.0, Mixing::boltzmann(1.0).unwrap())).unwrap();
        assert!(r.trajectory.windows(2).all(|w| w[1] >= w[0] - 1e-6), "{:?}", r.trajectory);
        r.params.validate().unwrap();
        assert_eq!(r.trajectory.len(), r.iterations + 1);
    }

    #[test]
    fn rejects_bad_config() {
        let (log, graph) = toy_log();
        let mut cfg = FitConfig::new(1.0, Mixing::Linear);
        cfg.epsilon = 0.0;
        assert!(matches!(fit(&log, &graph, &cfg), Err(Error::InvalidConfig(_))));
        let empty = EventLog::empty(1.0).unwrap();
        assert!(fit(&empty, &graph, &FitConfig::new(1.0, Mixing::Linear)).is_err());
    }
}
