//! Log-likelihood of an event history under the MIC process, its per-user
//! factorization, and analytic derivatives.
//!
//! For an observation window `[t0, t1]` the log-likelihood is
//!
//! ```text
//! L = Σ_i log λ_{u_i}(t_i) + Σ_i log f_{u_i}(c_i | t_i) − ∫_{t0}^{t1} Σ_u λ_u(s) ds
//! ```
//!
//! where intensities at `t_i` only see events strictly before `t_i`. Events
//! before `t0` (or before the first scored event) act as context: they excite
//! intensities inside the window but contribute no terms of their own.

pub(crate) mod derivatives;
pub(crate) mod features;
mod stream;

pub use derivatives::{gradient, hessian_sigma, Wrt};
pub use stream::{
    compensator, log_likelihood, log_likelihood_window, partial_log_likelihood, LikelihoodBreakdown,
    ScoreWindow,
};
