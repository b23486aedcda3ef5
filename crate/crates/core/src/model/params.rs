use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::math;

/// Rows of the interaction matrix must sum to one within this tolerance.
pub const SIGMA_ROW_TOLERANCE: f64 = 1e-9;

/// `κ(t) = 1{t>0} exp(−t/τ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExponentialKernel {
    pub tau: f64,
}

impl ExponentialKernel {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParams(format!("tau must be positive, got {tau}")));
        }
        Ok(Self { tau })
    }

    pub fn value(&self, t: f64) -> f64 {
        if t > 0.0 {
            math::exp(-t / self.tau)
        } else {
            0.0
        }
    }

    /// Multiplicative decay of excitation over a lag `dt ≥ 0`.
    #[inline]
    pub fn decay(&self, dt: f64) -> f64 {
        math::exp(-dt / self.tau)
    }

    /// `∫_{max(t0, t_j)}^{t1} κ(s − t_j) ds` for an event at `t_j`.
    pub fn window_integral(&self, t_j: f64, t0: f64, t1: f64) -> f64 {
        if t_j >= t1 {
            return 0.0;
        }
        let start = if t0 > t_j { t0 - t_j } else { 0.0 };
        let end = t1 - t_j;
        // τ (e^{−a/τ} − e^{−b/τ}) = τ e^{−a/τ} (1 − e^{−(b−a)/τ})
        -self.tau * math::exp(-start / self.tau) * math::expm1(-(end - start) / self.tau)
    }
}

/// The map φ that turns contextual intensities into the mark density.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum Mixing {
    /// `φ(x) = x`.
    Linear,
    /// `φ(x) = exp(βx)`, `β ≥ 0`.
    Boltzmann { beta: f64 },
}

impl Mixing {
    pub fn boltzmann(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "beta must be finite and nonnegative, got {beta}"
            )));
        }
        Ok(Self::Boltzmann { beta })
    }

    /// `β` for Boltzmann mixing, `None` for linear.
    pub fn beta(&self) -> Option<f64> {
        match *self {
            Mixing::Linear => None,
            Mixing::Boltzmann { beta } => Some(beta),
        }
    }

    /// Writes `f(·)` for the contextual intensities `nu_star` into `out`.
    ///
    /// Returns `true` when linear mixing met an all-zero input; `out` is then uniform.
    pub fn density_into(&self, nu_star: &[f64], out: &mut [f64]) -> bool {
        debug_assert_eq!(nu_star.len(), out.len());
        let n = nu_star.len();
        match *self {
            Mixing::Linear => {
                let total: f64 = nu_star.iter().sum();
                if total > 0.0 {
                    for (o, &x) in out.iter_mut().zip(nu_star) {
                        *o = x / total;
                    }
                    false
                } else {
                    out.fill(1.0 / n as f64);
                    true
                }
            }
            Mixing::Boltzmann { beta } => {
                let m = nu_star.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for (o, &x) in out.iter_mut().zip(nu_star) {
                    *o = math::exp(beta * (x - m));
                    total += *o;
                }
                for o in out.iter_mut() {
                    *o /= total;
                }
                false
            }
        }
    }

    pub fn density(&self, nu_star: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; nu_star.len()];
        if self.density_into(nu_star, &mut out) {
            log::warn!("linear mixing with all-zero contextual intensities; using uniform marks");
        }
        out
    }
}

/// Θ = (M, Σ, W) plus the kernel and mixing hyperparameters.
///
/// * `baseline` is `N_u × N_c`, entry `(u, c)` = `μ_u^(c)`.
/// * `interaction` is `N_c × N_c`, entry `(s, c)` = `σ_sc`; every row sums to one.
/// * `influence` is `N_u × N_u`, entry `(v, u)` = `w_vu`, the influence of `v` on `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub baseline: DMatrix<f64>,
    pub interaction: DMatrix<f64>,
    pub influence: DMatrix<f64>,
    pub kernel: ExponentialKernel,
    pub mixing: Mixing,
}

impl ModelParams {
    pub fn new(
        baseline: DMatrix<f64>,
        interaction: DMatrix<f64>,
        influence: DMatrix<f64>,
        kernel: ExponentialKernel,
        mixing: Mixing,
    ) -> Result<Self> {
        let p = Self {
            baseline,
            interaction,
            influence,
            kernel,
            mixing,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn n_users(&self) -> usize {
        self.baseline.nrows()
    }

    pub fn n_cascades(&self) -> usize {
        self.baseline.ncols()
    }

    /// `μ_u = Σ_c μ_u^(c)`.
    pub fn total_baseline(&self, u: usize) -> f64 {
        self.baseline.row(u).iter().sum()
    }

    /// Vector of `μ_u` for all users.
    pub fn total_baselines(&self) -> Vec<f64> {
        (0..self.n_users()).map(|u| self.total_baseline(u)).collect()
    }

    /// True when Σ is exactly the identity matrix.
    pub fn has_identity_interaction(&self) -> bool {
        let n = self.interaction.nrows();
        (0..n).all(|s| (0..n).all(|c| self.interaction[(s, c)] == if s == c { 1.0 } else { 0.0 }))
    }

    pub fn validate(&self) -> Result<()> {
        let (nu, nc) = self.baseline.shape();
        if nu == 0 || nc == 0 {
            return Err(Error::InvalidParams("need at least one user and one cascade".into()));
        }
        if self.interaction.shape() != (nc, nc) {
            return Err(Error::DimensionMismatch(format!(
                "interaction is {:?}, expected ({nc}, {nc})",
                self.interaction.shape()
            )));
        }
        if self.influence.shape() != (nu, nu) {
            return Err(Error::DimensionMismatch(format!(
                "influence is {:?}, expected ({nu}, {nu})",
                self.influence.shape()
            )));
        }
        for (name, m) in [
            ("baseline", &self.baseline),
            ("interaction", &self.interaction),
            ("influence", &self.influence),
        ] {
            if let Some(x) = m.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(Error::InvalidParams(format!(
                    "{name} entries must be finite and nonnegative, found {x}"
                )));
            }
        }
        for s in 0..nc {
            let row: f64 = self.interaction.row(s).iter().sum();
            if math::abs(row - 1.0) > SIGMA_ROW_TOLERANCE {
                return Err(Error::InvalidParams(format!(
                    "interaction row {s} sums to {row}, expected 1"
                )));
            }
            if let Some(x) = self.interaction.row(s).iter().find(|x| **x > 1.0) {
                return Err(Error::InvalidParams(format!("interaction entry {x} exceeds 1")));
            }
        }
        ExponentialKernel::new(self.kernel.tau)?;
        if let Mixing::Boltzmann { beta } = self.mixing {
            Mixing::boltzmann(beta)?;
        }
        Ok(())
    }
}
