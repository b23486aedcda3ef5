//! Exact sample paths of the MIC process and synthetic scenario construction.

mod binning;
mod scenario;
mod thinning;

pub use binning::{empirical_intensity, empirical_intensity_window, BinnedRates, Grouping};
pub use scenario::{generate_scenario, InteractionSpec, ScenarioConfig};
pub use thinning::{replay_history, simulate, simulate_from, simulate_with_rng};
