//! First moments of the process.
//!
//! With `A = (I − τWᵀ)/τ` and `B = (I − τWᵀ)⁻¹` the expected intensity obeys
//! `dE[λ]/dt = −(E[λ] − μ)/τ + Wᵀ E[λ]`, `E[λ(0)] = μ`, whose solution is
//!
//! ```text
//! E[λ(t)] = [B + (I − B) e^{−At}] μ
//! E[n(t)] = [B t + (I − B) B τ (I − e^{−At})] μ
//! ```
//!
//! When `ρ(Wᵀ) < 1/τ` both settle into the stationary regime `E[λ] → Bμ`.
//! Per-cascade quantities have no closed form; they use the stationary
//! mixing `f_u ∝ φ((B M Σ)_u)` as a closure.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, expm, spectral_radius};
use crate::math;
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Stability {
    /// Spectral radius of Wᵀ.
    pub rho: f64,
    /// `1/τ`.
    pub threshold: f64,
    pub stable: bool,
}

pub fn stability(params: &ModelParams) -> Stability {
    let rho = spectral_radius(&params.influence.transpose());
    let threshold = 1.0 / params.kernel.tau;
    Stability {
        rho,
        threshold,
        stable: rho < threshold,
    }
}

/// Precomputed `B`, `A` and `μ` for repeated evaluation.
#[derive(Debug, Clone)]
pub struct MomentSystem {
    pub(crate) tau: f64,
    pub(crate) b: DMatrix<f64>,
    pub(crate) a: DMatrix<f64>,
    pub(crate) mu: DVector<f64>,
}

impl MomentSystem {
    /// Fails with [`Error::Singular`] when `I − τWᵀ` is not invertible,
    /// naming the eigenvalue of `τWᵀ` closest to one.
    pub fn new(params: &ModelParams) -> Result<Self> {
        let n = params.n_users();
        let tau = params.kernel.tau;
        let m = DMatrix::identity(n, n) - params.influence.transpose() * tau;
        let singular = || {
            let nearest = eigenvalues(&(params.influence.transpose() * tau))
                .into_iter()
                .min_by(|x, y| math::hypot(x.re - 1.0, x.im).total_cmp(&math::hypot(y.re - 1.0, y.im)));
            let z = nearest.unwrap_or_default();
            Error::Singular { re: z.re, im: z.im }
        };
        let b = m.clone().try_inverse().ok_or_else(singular)?;
        // reject numerically singular systems as well
        let scale = m.amax().max(1.0) * b.amax();
        if !scale.is_finite() || scale > 1e14 {
            return Err(singular());
        }
        Ok(Self {
            tau,
            a: m / tau,
            b,
            mu: DVector::from_vec(params.total_baselines()),
        })
    }

    /// `B = (I − τWᵀ)⁻¹`.
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// `Bμ`, the stationary intensity in the stable case.
    pub fn stationary_intensity(&self) -> DVector<f64> {
        &self.b * &self.mu
    }

    pub fn expected_intensity_at(&self, t: f64) -> DVector<f64> {
        let n = self.mu.len();
        let decay = expm(&(&self.a * -t));
        (&self.b + (DMatrix::identity(n, n) - &self.b) * decay) * &self.mu
    }

    pub fn expected_counts_at(&self, t: f64) -> DVector<f64> {
        let n = self.mu.len();
        let id = DMatrix::<f64>::identity(n, n);
        let decay = expm(&(&self.a * -t));
        (&self.b * t + (&id - &self.b) * &self.b * self.tau * (&id - decay)) * &self.mu
    }
}

fn check_grid(times: &[f64]) -> Result<()> {
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::InvalidConfig(format!("grid time {t} must be finite and nonnegative")));
    }
    Ok(())
}

/// Columns of the result are indexed by grid point.
fn on_grid<F>(n_users: usize, times: &[f64], eval: F) -> DMatrix<f64>
where
    F: Fn(f64) -> DVector<f64> + Sync,
{
    #[cfg(feature = "std")]
    let columns: Vec<DVector<f64>> = {
        use rayon::prelude::*;
        times.par_iter().map(|&t| eval(t)).collect()
    };
    #[cfg(not(feature = "std"))]
    let columns: Vec<DVector<f64>> = times.iter().map(|&t| eval(t)).collect();
    let mut out = DMatrix::zeros(n_users, times.len());
    for (k, col) in columns.iter().enumerate() {
        out.set_column(k, col);
    }
    out
}

/// `E[λ_u(t)]`, users × grid.
pub fn expected_intensity(params: &ModelParams, times: &[f64]) -> Result<DMatrix<f64>> {
    check_grid(times)?;
    let system = MomentSystem::new(params)?;
    Ok(on_grid(params.n_users(), times, |t| system.expected_intensity_at(t)))
}

/// `E[n_u(t)]`, users × grid.
pub fn expected_counts(params: &ModelParams, times: &[f64]) -> Result<DMatrix<f64>> {
    check_grid(times)?;
    let system = MomentSystem::new(params)?;
    Ok(on_grid(params.n_users(), times, |t| system.expected_counts_at(t)))
}

/// Mixing densities evaluated at `B M Σ`, one row per user.
fn stationary_mixing(params: &ModelParams, system: &MomentSystem) -> DMatrix<f64> {
    let scores = &system.b * &params.baseline * &params.interaction;
    let mut out = DMatrix::zeros(params.n_users(), params.n_cascades());
    for u in 0..params.n_users() {
        let row: Vec<f64> = scores.row(u).iter().copied().collect();
        let f = params.mixing.density(&row);
        for (c, v) in f.into_iter().enumerate() {
            out[(u, c)] = v;
        }
    }
    out
}

fn require_stable(params: &ModelParams) -> Result<()> {
    let s = stability(params);
    if s.stable {
        Ok(())
    } else {
        Err(Error::Unstable {
            rho: s.rho,
            threshold: s.threshold,
        })
    }
}

/// Stationary per-cascade intensities `(Bμ)_u · f_u(c)` with `f_u` the
/// mixing density at `(B M Σ)_u`; rows sum to `(Bμ)_u`.
///
/// This is an approximation: it ignores the correlation between `λ_u` and `f_u`.
pub fn stationary_cascade_intensity(params: &ModelParams) -> Result<DMatrix<f64>> {
    require_stable(params)?;
    let system = MomentSystem::new(params)?;
    let lambda = system.stationary_intensity();
    let mut f = stationary_mixing(params, &system);
    for u in 0..params.n_users() {
        f.row_mut(u).scale_mut(lambda[u]);
    }
    Ok(f)
}

/// Closed-form first-moment curves on a grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentCurves {
    pub times: Vec<f64>,
    /// `[u][k]` = `E[λ_u(t_k)]`.
    pub expected_intensity: Vec<Vec<f64>>,
    /// `[u][k]` = `E[n_u(t_k)]`.
    pub expected_counts: Vec<Vec<f64>>,
    /// `[u][c][k]` = `E[λ_u(t_k)] · f_u(c)` with the stationary mixing closure.
    pub per_cascade_intensity: Vec<Vec<Vec<f64>>>,
    /// `Bμ`.
    pub stationary_intensity: Vec<f64>,
    pub stability: Stability,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn moment_curves(params: &ModelParams, times: &[f64]) -> Result<MomentCurves> {
    check_grid(times)?;
    let system = MomentSystem::new(params)?;
    let n = params.n_users();
    let intensity = on_grid(n, times, |t| system.expected_intensity_at(t));
    let counts = on_grid(n, times, |t| system.expected_counts_at(t));
    let f = stationary_mixing(params, &system);
    let per_cascade = (0..n)
        .map(|u| {
            (0..params.n_cascades())
                .map(|c| intensity.row(u).iter().map(|l| l * f[(u, c)]).collect())
                .collect()
        })
        .collect();
    Ok(MomentCurves {
        times: times.to_vec(),
        expected_intensity: rows(&intensity),
        expected_counts: rows(&counts),
        per_cascade_intensity: per_cascade,
        stationary_intensity: system.stationary_intensity().iter().copied().collect(),
        stability: stability(params),
    })
}

/// Integrates the per-cascade first-moment system
///
/// ```text
/// dE[ν_u^(c)]/dt = −(E[ν_u^(c)] − μ_u^(c))/τ + Σ_j w_ju E[λ_j] f_j(c),   E[ν(0)] = M
/// ```
///
/// with `f_j` the stationary mixing closure, using adaptive Dormand–Prince
/// steps. Returns one `N_u × N_c` matrix per grid time; `times` must be
/// nondecreasing. Summed over cascades the system is exactly the one solved
/// by [`expected_intensity`].
pub fn first_moment_ode(params: &ModelParams, times: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    check_grid(times)?;
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig("grid times must be nondecreasing".to_string()));
    }
    let system = MomentSystem::new(params)?;
    let f = stationary_mixing(params, &system);
    let wt = params.influence.transpose();
    let mu = params.baseline.clone();
    let tau = params.kernel.tau;
    let (n, nc) = (params.n_users(), params.n_cascades());
    let rhs = |y: &DMatrix<f64>| -> DMatrix<f64> {
        let mut g = f.clone();
        for j in 0..n {
            let total: f64 = y.row(j).iter().sum();
            g.row_mut(j).scale_mut(total);
        }
        (y - &mu) / -tau + &wt * g
    };
    let mut integrator = DormandPrince::new(1e-10, 1e-12);
    let mut y = mu.clone();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        y = integrator.integrate(&rhs, y, t, target)?;
        t = target;
        debug_assert_eq!(y.shape(), (n, nc));
        out.push(y.clone());
    }
    Ok(out)
}

/// Embedded 5(4) Runge–Kutta pair for autonomous systems; steps continue from the fifth-order solution.
struct DormandPrince {
    rtol: f64,
    atol: f64,
    step: Option<f64>,
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus fourth-order weights.
const ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl DormandPrince {
    fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, step: None }
    }

    fn integrate<F>(&mut self, rhs: &F, mut y: DMatrix<f64>, mut t: f64, end: f64) -> Result<DMatrix<f64>>
    where
        F: Fn(&DMatrix<f64>) -> DMatrix<f64>,
    {
        if end <= t {
            return Ok(y);
        }
        let mut h = self.step.unwrap_or((end - t) * 1e-3).min(end - t);
        let mut budget = 1_000_000usize;
        while t < end {
            budget -= 1;
            if budget == 0 || !(h > 1e-14 * (1.0 + math::abs(t))) {
                return Err(Error::IntegrationFailure { t, step: h });
            }
            let last = t + h >= end;
            if last {
                h = end - t;
            }
            let mut k: Vec<DMatrix<f64>> = Vec::with_capacity(7);
            k.push(rhs(&y));
            for stage in 1..7 {
                let mut arg = y.clone();
                for (j, kj) in k.iter().enumerate() {
                    let a = A[stage][j];
                    if a != 0.0 {
                        arg += kj * (a * h);
                    }
                }
                k.push(rhs(&arg));
            }
            let mut next = y.clone();
            for (j, kj) in k.iter().enumerate().take(6) {
                if A[6][j] != 0.0 {
                    next += kj * (A[6][j] * h);
                }
            }
            let mut err = DMatrix::zeros(y.nrows(), y.ncols());
            for (j, kj) in k.iter().enumerate() {
                if ERR[j] != 0.0 {
                    err += kj * (ERR[j] * h);
                }
            }
            let mut norm = 0.0f64;
            for ((e, a), b) in err.iter().zip(y.iter()).zip(next.iter()) {
                let scale = self.atol + self.rtol * math::abs(*a).max(math::abs(*b));
                norm = norm.max(math::abs(*e) / scale);
            }
            if !norm.is_finite() {
                h *= 0.1;
                continue;
            }
            if norm <= 1.0 {
                t = if last { end } else { t + h };
                y = next;
            }
            let factor = if norm == 0.0 {
                5.0
            } else {
                (0.9 * math::exp(-0.2 * math::ln(norm))).clamp(0.2, 5.0)
            };
            h *= factor;
            if norm <= 1.0 {
                self.step = Some(h);
            }
        }
        Ok(y)
    }
}
