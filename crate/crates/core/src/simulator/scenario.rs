use alloc::format;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::spectral_radius;
use crate::model::{ExponentialKernel, Mixing, ModelParams, UserGraph};
use crate::rng::{stream_rng, uniform, SCENARIO_STREAM};

/// Interaction matrix of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum InteractionSpec {
    Identity,
    Matrix(DMatrix<f64>),
}

impl InteractionSpec {
    /// Σ with reinforcement `σ_{1,0} = s` from the second cascade onto the first:
    /// `[[1,0,0],[s,1−s,0],[0,0,1]]` (extended with identity rows for more cascades).
    pub fn reinforcement(n_cascades: usize, s: f64) -> Self {
        let mut m = DMatrix::identity(n_cascades, n_cascades);
        if n_cascades >= 2 {
            m[(1, 0)] = s;
            m[(1, 1)] = 1.0 - s;
        }
        Self::Matrix(m)
    }

    pub fn matrix(&self, n_cascades: usize) -> DMatrix<f64> {
        match self {
            Self::Identity => DMatrix::identity(n_cascades, n_cascades),
            Self::Matrix(m) => m.clone(),
        }
    }
}

/// Random Erdős–Rényi influence network with uniform weights and baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_users: usize,
    pub n_cascades: usize,
    /// Independent probability of each directed edge `v → u`, `v ≠ u`.
    pub edge_prob: f64,
    pub horizon: f64,
    pub tau: f64,
    pub mixing: Mixing,
    pub interaction: InteractionSpec,
    /// Edge weights are drawn from `U(0, w_max)`.
    pub w_max: f64,
    /// Each `μ_u^(c)` is drawn from `U(0, mu_max)`.
    pub mu_max: f64,
    /// When set, draws are repeated until `ρ(W) τ ≤ max_branching`.
    pub max_branching: Option<f64>,
    /// When set, draws are also repeated until the mean stationary rate
    /// amplification `1ᵀ(I − τWᵀ)⁻¹1 / N_u` is at most this value. Sparse
    /// networks can have a tiny spectral radius yet amplify activity along
    /// chains of strong edges by orders of magnitude.
    pub max_amplification: Option<f64>,
    pub seed: u64,
}

impl ScenarioConfig {
    /// 50 users, 3 cascades, `w ~ U[0,1]`, `μ ~ U[0,0.2]`, `T = 500`, `τ = 3`.
    pub fn synthetic(mixing: Mixing, interaction: InteractionSpec, seed: u64) -> Self {
        Self {
            n_users: 50,
            n_cascades: 3,
            edge_prob: 0.02,
            horizon: 500.0,
            tau: 3.0,
            mixing,
            interaction,
            w_max: 1.0,
            mu_max: 0.2,
            max_branching: Some(0.8),
            max_amplification: Some(8.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_cascades == 0 {
            return Err(Error::InvalidConfig("need at least one user and one cascade".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::InvalidConfig(format!(
                "edge probability {} outside [0, 1]",
                self.edge_prob
            )));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidConfig(format!("horizon {} must be positive", self.horizon)));
        }
        if !(self.w_max.is_finite() && self.w_max > 0.0 && self.mu_max.is_finite() && self.mu_max > 0.0) {
            return Err(Error::InvalidConfig("distribution bounds must be positive".into()));
        }
        if let Some(b) = self.max_branching {
            if !(b > 0.0) {
                return Err(Error::InvalidConfig(format!("max branching {b} must be positive")));
            }
        }
        if let Some(a) = self.max_amplification {
            if !(a >= 1.0) {
                return Err(Error::InvalidConfig(format!("max amplification {a} must be at least 1")));
            }
        }
        if let InteractionSpec::Matrix(m) = &self.interaction {
            if m.shape() != (self.n_cascades, self.n_cascades) {
                return Err(Error::DimensionMismatch(format!(
                    "interaction is {:?}, expected {} cascades",
                    m.shape(),
                    self.n_cascades
                )));
            }
        }
        ExponentialKernel::new(self.tau)?;
        Ok(())
    }
}

const MAX_STABILITY_DRAWS: usize = 10_000;

/// `1ᵀ(I − τWᵀ)⁻¹1 / N_u`, or `None` when the system is singular or amplifies negatively.
fn mean_amplification(w: &DMatrix<f64>, tau: f64) -> Option<f64> {
    let n = w.nrows();
    let b = (DMatrix::identity(n, n) - w.transpose() * tau).try_inverse()?;
    let a = b.sum() / n as f64;
    (a.is_finite() && a >= 1.0).then_some(a)
}

/// Draws the influence network and parameters of a scenario.
///
/// Deterministic in `cfg`: the same configuration always returns the same pair.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<(UserGraph, ModelParams)> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, SCENARIO_STREAM);
    let n = cfg.n_users;
    let kernel = ExponentialKernel::new(cfg.tau)?;

    let mut draws = 0;
    let influence = loop {
        draws += 1;
        let mut w = DMatrix::zeros(n, n);
        for v in 0..n {
            for u in 0..n {
                if v != u && uniform(&mut rng) < cfg.edge_prob {
                    // strictly positive so the edge stays in the support
                    let mut x = uniform(&mut rng) * cfg.w_max;
                    while x == 0.0 {
                        x = uniform(&mut rng) * cfg.w_max;
                    }
                    w[(v, u)] = x;
                }
            }
        }
        let branching_ok = cfg.max_branching.is_none_or(|cap| spectral_radius(&w) * cfg.tau <= cap);
        let amplification_ok = cfg
            .max_amplification
            .is_none_or(|cap| mean_amplification(&w, cfg.tau).is_some_and(|a| a <= cap));
        if branching_ok && amplification_ok {
            break w;
        }
        if draws >= MAX_STABILITY_DRAWS {
            return Err(Error::InvalidConfig(format!(
                "no network within the branching/amplification caps after {draws} draws; lower edge_prob or w_max"
            )));
        }
    };

    let mut baseline = DMatrix::zeros(n, cfg.n_cascades);
    for u in 0..n {
        for c in 0..cfg.n_cascades {
            baseline[(u, c)] = uniform(&mut rng) * cfg.mu_max;
        }
    }
    let params = ModelParams::new(
        baseline,
        cfg.interaction.matrix(cfg.n_cascades),
        influence,
        kernel,
        cfg.mixing,
    )?;
    let graph = UserGraph::from_weights(&params.influence)?;
    Ok((graph, params))
}
