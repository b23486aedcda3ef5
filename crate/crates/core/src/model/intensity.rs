use alloc::vec;
use alloc::vec::Vec;

use super::{IntensityState, Mixing, ModelParams};
use crate::error::{Error, Result};

fn check_user(params: &ModelParams, state: &IntensityState, u: usize) -> Result<()> {
    let n_users = params.n_users();
    if u >= n_users || u >= state.n_users() {
        return Err(Error::UserOutOfRange { user: u, n_users });
    }
    Ok(())
}

fn check_ids(params: &ModelParams, state: &IntensityState, u: usize, c: usize) -> Result<()> {
    check_user(params, state, u)?;
    let n_cascades = params.n_cascades();
    if c >= n_cascades || c >= state.n_cascades() {
        return Err(Error::CascadeOutOfRange {
            cascade: c,
            n_cascades,
        });
    }
    Ok(())
}

/// `ν*_u^(c) = μ_u^(c) + Σ_s σ_sc E_u^(s)` for all `c`, written into `out`.
pub(crate) fn contextual_into(params: &ModelParams, excitation: &[f64], u: usize, out: &mut [f64]) {
    let sigma = &params.interaction;
    for (c, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (s, &e) in excitation.iter().enumerate() {
            acc += sigma[(s, c)] * e;
        }
        *o = params.baseline[(u, c)] + acc;
    }
}

/// `ν_u^(c)`: baseline plus same-cascade excitation.
pub fn independent_intensity(
    params: &ModelParams,
    state: &IntensityState,
    u: usize,
    c: usize,
) -> Result<f64> {
    check_ids(params, state, u, c)?;
    Ok(params.baseline[(u, c)] + state.excitation(u, c))
}

/// `ν*_u^(c)`: baseline plus excitation routed through the interaction matrix.
pub fn contextual_intensity(
    params: &ModelParams,
    state: &IntensityState,
    u: usize,
    c: usize,
) -> Result<f64> {
    check_ids(params, state, u, c)?;
    let mut acc = 0.0;
    for (s, &e) in state.excitation_row(u).iter().enumerate() {
        acc += params.interaction[(s, c)] * e;
    }
    Ok(params.baseline[(u, c)] + acc)
}

/// `ν*_u^(·)` for every cascade.
pub fn contextual_intensities(
    params: &ModelParams,
    state: &IntensityState,
    u: usize,
) -> Result<Vec<f64>> {
    check_user(params, state, u)?;
    let mut out = vec![0.0; params.n_cascades()];
    contextual_into(params, state.excitation_row(u), u, &mut out);
    Ok(out)
}

/// `f_u(·|t)`, the probability of each cascade for the next event of `u`.
///
/// Linear mixing with all contextual intensities at zero yields the uniform
/// distribution (the global intensity is zero there, so the mark is never drawn).
pub fn mixing_density(params: &ModelParams, state: &IntensityState, u: usize) -> Result<Vec<f64>> {
    let nu_star = contextual_intensities(params, state, u)?;
    Ok(params.mixing.density(&nu_star))
}

/// `λ_u = Σ_c ν_u^(c)`.
pub fn global_intensity(params: &ModelParams, state: &IntensityState, u: usize) -> Result<f64> {
    check_user(params, state, u)?;
    let exc: f64 = state.excitation_row(u).iter().sum();
    Ok(params.total_baseline(u) + exc)
}

/// `λ_u^(c) = λ_u f_u(c|t)`.
///
/// For linear mixing the row-stochastic Σ gives `Σ_s ν*_u^(s) = λ_u`, so the
/// marked intensity is `ν*_u^(c)` itself; with Σ = I this is exactly `ν_u^(c)`.
pub fn marked_intensity(
    params: &ModelParams,
    state: &IntensityState,
    u: usize,
    c: usize,
) -> Result<f64> {
    check_ids(params, state, u, c)?;
    match params.mixing {
        Mixing::Linear => contextual_intensity(params, state, u, c),
        Mixing::Boltzmann { .. } => {
            let f = mixing_density(params, state, u)?;
            Ok(global_intensity(params, state, u)? * f[c])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Event, ExponentialKernel, UserGraph};
    use nalgebra::DMatrix;

    fn one_edge(mu: f64, w: f64, tau: f64, mixing: Mixing) -> (ModelParams, UserGraph) {
        let mut infl = DMatrix::zeros(2, 2);
        infl[(0, 1)] = w;
        let p = ModelParams::new(
            DMatrix::from_element(2, 1, mu),
            DMatrix::identity(1, 1),
            infl,
            ExponentialKernel::new(tau).unwrap(),
            mixing,
        )
        .unwrap();
        let g = UserGraph::from_weights(&p.influence).unwrap();
        (p, g)
    }

    #[test]
    fn empty_history_is_baseline() {
        let (p, _) = one_edge(0.1, 0.5, 3.0, Mixing::Linear);
        let s = IntensityState::for_params(&p);
        assert_eq!(independent_intensity(&p, &s, 1, 0).unwrap(), 0.1);
        assert_eq!(global_intensity(&p, &s, 1).unwrap(), 0.1);
    }

    #[test]
    fn one_follower_event_at_lag_tau() {
        let (p, g) = one_edge(0.1, 0.5, 3.0, Mixing::Linear);
        let mut s = IntensityState::for_params(&p);
        s.apply_event(&Event::new(0, 0, 0.0), &p, &g).unwrap();
        s.advance(3.0, &p.kernel).unwrap();
        let nu = independent_intensity(&p, &s, 1, 0).unwrap();
        assert!((nu - (0.1 + 0.5 * (-1.0f64).exp())).abs() < 1e-15);
        assert!((nu - 0.2839).abs() < 1e-4);
    }

    #[test]
    fn contextual_single_term() {
        // σ_{1,0} = 1: excitation on cascade 1 feeds cascade 0 entirely
        let sigma = DMatrix::from_row_slice(3, 3, &[1., 0., 0., 1., 0., 0., 0., 0., 1.]);
        let p = ModelParams::new(
            DMatrix::from_element(1, 3, 0.2),
            sigma,
            DMatrix::zeros(1, 1),
            ExponentialKernel::new(1.0).unwrap(),
            Mixing::Linear,
        )
        .unwrap();
        let mut s = IntensityState::for_params(&p);
        s.set_excitation(0, 1, 1.0);
        assert!((contextual_intensity(&p, &s, 0, 0).unwrap() - 1.2).abs() < 1e-15);
        assert_eq!(contextual_intensity(&p, &s, 0, 1).unwrap(), 0.2);
    }

    #[test]
    fn out_of_range_ids() {
        let (p, _) = one_edge(0.1, 0.5, 3.0, Mixing::Linear);
        let s = IntensityState::for_params(&p);
        assert!(matches!(
            independent_intensity(&p, &s, 2, 0),
            Err(Error::UserOutOfRange { .. })
        ));
        assert!(matches!(
            marked_intensity(&p, &s, 0, 1),
            Err(Error::CascadeOutOfRange { .. })
        ));
    }

    #[test]
    fn boltzmann_zero_beta_splits_evenly() {
        let p = ModelParams::new(
            DMatrix::from_row_slice(1, 4, &[0.1, 0.4, 0.2, 0.3]),
            DMatrix::identity(4, 4),
            DMatrix::zeros(1, 1),
            ExponentialKernel::new(1.0).unwrap(),
            Mixing::boltzmann(0.0).unwrap(),
        )
        .unwrap();
        let s = IntensityState::for_params(&p);
        for c in 0..4 {
            assert!((marked_intensity(&p, &s, 0, c).unwrap() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn large_beta_saturates() {
        let p = ModelParams::new(
            DMatrix::from_row_slice(1, 3, &[0.1, 0.3, 0.2]),
            DMatrix::identity(3, 3),
            DMatrix::zeros(1, 1),
            ExponentialKernel::new(1.0).unwrap(),
            Mixing::boltzmann(1e3).unwrap(),
        )
        .unwrap();
        let s = IntensityState::for_params(&p);
        let lam = global_intensity(&p, &s, 0).unwrap();
        assert!((marked_intensity(&p, &s, 0, 1).unwrap() - lam).abs() < 1e-12);
        assert!(marked_intensity(&p, &s, 0, 0).unwrap() < 1e-12);
    }
}
