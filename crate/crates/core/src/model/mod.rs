//! Domain types and the intensity equations of the mixture-of-interacting-cascades
//! (MIC) process.
//!
//! Notation used throughout the crate:
//!
//! ```text
//! ν_u^(c)(t)  = μ_u^(c) + Σ_{v∈F_u} w_vu Σ_{e_j ∈ H_v^(c)(t)} κ(t − t_j)      independent intensity
//! ν*_u^(c)(t) = μ_u^(c) + Σ_s σ_sc Σ_{v∈F_u} w_vu Σ_{e_j ∈ H_v^(s)(t)} κ(t − t_j) contextual intensity
//! f_u(c|t)    = φ(ν*_u^(c)) / Σ_s φ(ν*_u^(s))                                   mixing density
//! λ_u(t)      = Σ_c ν_u^(c)(t)                                                  global intensity
//! λ_u^(c)(t)  = λ_u(t) f_u(c|t)                                                 marked intensity
//! ```
//!
//! `F_u` is the set of *influencers* of `u` (users `v` with an edge `v → u`).
//! The interaction matrix Σ is row-stochastic: source cascade `s` spreads one
//! unit of influence over the target cascades `c`.

mod event;
mod graph;
pub(crate) mod intensity;
mod params;
mod state;

pub use event::{Event, EventLog};
pub use graph::UserGraph;
pub use intensity::{
    contextual_intensities, contextual_intensity, global_intensity, independent_intensity,
    marked_intensity, mixing_density,
};
pub use params::{ExponentialKernel, Mixing, ModelParams, SIGMA_ROW_TOLERANCE};
pub use state::IntensityState;
