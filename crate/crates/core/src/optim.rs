//! Projected Newton minimization over simple convex sets.
//!
//! Each iteration builds the quadratic model `gᵀd + ½ dᵀ H d` with the exact
//! Hessian (eigenvalues lifted to keep it positive definite), minimizes it over
//! the feasible set, and backtracks along the resulting direction. Because the
//! model minimizer is feasible and the set is convex, every trial point on the
//! segment is feasible.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::clamp_spectrum;
use crate::math;

/// Feasible region of the optimization variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasible {
    /// Every coordinate `≥ 0`.
    NonNegative,
    /// Consecutive blocks of `width` coordinates each lie on the probability simplex.
    RowSimplex { width: usize },
}

impl Feasible {
    pub fn project(&self, x: &mut [f64]) {
        match *self {
            Feasible::NonNegative => x.iter_mut().for_each(|v| *v = v.max(0.0)),
            Feasible::RowSimplex { width } => x.chunks_mut(width).for_each(project_simplex),
        }
    }

    /// Row of the equality constraint containing coordinate `i`, if any.
    fn group(&self, i: usize) -> Option<usize> {
        match *self {
            Feasible::NonNegative => None,
            Feasible::RowSimplex { width } => Some(i / width),
        }
    }

    fn n_groups(&self, n: usize) -> usize {
        match *self {
            Feasible::NonNegative => 0,
            Feasible::RowSimplex { width } => n / width,
        }
    }
}

/// Euclidean projection onto `{x ≥ 0, Σx = 1}`.
pub fn project_simplex(v: &mut [f64]) {
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if s - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// Minimizes `gᵀ(y − x) + ½ (y − x)ᵀ H (y − x)` over the feasible set by a
/// primal active-set method started at the feasible point `x`; `H` must be
/// positive definite.
///
/// Every iterate stays feasible and the model value never increases, so an
/// early exit at the iteration cap still yields a usable point.
fn solve_model(feasible: Feasible, x: &[f64], g: &DVector<f64>, h: &DMatrix<f64>) -> Vec<f64> {
    let n = x.len();
    let n_groups = feasible.n_groups(n);
    let mut y = x.to_vec();
    let mut fixed: Vec<bool> = y.iter().map(|&v| v <= 0.0).collect();
    // a group needs a free coordinate to carry its equality constraint
    for r in 0..n_groups {
        let members: Vec<usize> = (0..n).filter(|&i| feasible.group(i) == Some(r)).collect();
        if members.iter().all(|&i| fixed[i]) {
            fixed[members[0]] = false;
        }
    }
    let scale = 1.0 + g.amax() + h.amax() * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(math::abs(*v))));
    for _ in 0..(50 * n + 100) {
        let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
        let groups: Vec<usize> = {
            let mut gs: Vec<usize> = free.iter().filter_map(|&i| feasible.group(i)).collect();
            gs.dedup();
            gs
        };
        let mut grad = g.clone();
        for i in 0..n {
            let d = y[i] - x[i];
            if d != 0.0 {
                for k in 0..n {
                    grad[k] += h[(k, i)] * d;
                }
            }
        }
        // KKT system on the free coordinates: [H_FF Aᵀ; A 0] [p; ν] = [−grad_F; 0]
        let (nf, ng) = (free.len(), groups.len());
        let mut kkt = DMatrix::zeros(nf + ng, nf + ng);
        let mut rhs = DVector::zeros(nf + ng);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                kkt[(a, b)] = h[(i, j)];
            }
            rhs[a] = -grad[i];
            if let Some(r) = feasible.group(i) {
                let row = nf + groups.iter().position(|&q| q == r).unwrap_or(0);
                kkt[(a, row)] = 1.0;
                kkt[(row, a)] = 1.0;
            }
        }
        let sol = if nf + ng == 0 {
            rhs
        } else {
            match kkt.lu().solve(&rhs) {
                Some(sol) => sol,
                None => break,
            }
        };
        let step_norm = (0..nf).fold(0.0f64, |m, a| m.max(math::abs(sol[a])));
        if step_norm <= 1e-14 * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)))) {
            // stationary on the working set: release the most violated bound
            let multiplier = |i: usize| -> f64 {
                let shift = feasible
                    .group(i)
                    .and_then(|r| groups.iter().position(|&q| q == r))
                    .map_or(0.0, |q| sol[nf + q]);
                grad[i] + shift
            };
            let worst = (0..n)
                .filter(|&i| fixed[i])
                .map(|i| (i, multiplier(i)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match worst {
                Some((i, m)) if m < -1e-12 * scale => fixed[i] = false,
                _ => break,
            }
            continue;
        }
        // longest feasible fraction of the step
        let mut alpha = 1.0;
        let mut blocking = None;
        for (a, &i) in free.iter().enumerate() {
            if sol[a] < 0.0 {
                let ratio = -y[i] / sol[a];
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
        }
        for (a, &i) in free.iter().enumerate() {
            y[i] = (y[i] + alpha * sol[a]).max(0.0);
        }
        if let Some(i) = blocking {
            y[i] = 0.0;
            fixed[i] = true;
        }
    }
    if n_groups > 0 {
        // remove rounding drift from the equality constraints
        feasible.project(&mut y);
    }
    y
}

/// Smooth objective on a convex domain; `value` is `+∞` outside it.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;
    /// Value, gradient and Hessian; `None` outside the domain.
    fn derivatives(&self, x: &[f64]) -> Option<(f64, DVector<f64>, DMatrix<f64>)>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iters: usize,
    /// Stop once an iteration improves the objective by less than `tol · (1 + |f|)`.
    pub tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted iteration, starting with the initial point.
    pub trace: Vec<f64>,
}

/// Minimizes `objective` over `feasible` starting from `x0` (projected first).
pub fn projected_newton<O: Objective + ?Sized>(
    objective: &O,
    feasible: Feasible,
    x0: &[f64],
    opts: NewtonOptions,
    stage: &str,
) -> Result<NewtonReport> {
    let mut x = x0.to_vec();
    feasible.project(&mut x);
    let failure = |iterations: usize, reason: &str, trace: &[f64]| Error::SolverFailure {
        stage: String::from(stage),
        iterations,
        reason: String::from(reason),
        trace: trace.to_vec(),
    };
    let Some((mut f, mut g, mut h)) = objective.derivatives(&x) else {
        return Err(failure(0, "objective undefined at the initial point", &[]));
    };
    if !f.is_finite() {
        return Err(failure(0, "non-finite objective at the initial point", &[]));
    }
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        if g.iter().any(|v| !v.is_finite()) || h.iter().any(|v| !v.is_finite()) {
            return Err(failure(iterations, "non-finite derivatives", &trace));
        }
        let (model, _) = clamp_spectrum(&h, 1e-10, 1e-12);
        let y = solve_model(feasible, &x, &g, &model);
        let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let slope: f64 = d.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
        let step_size = d.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
        if step_size == 0.0 || slope >= 0.0 {
            converged = true;
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let ft = objective.value(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, ft)) = accepted else {
            // no decrease representable in floating point along a descent direction
            converged = true;
            break;
        };
        let improvement = f - ft;
        x = trial;
        match objective.derivatives(&x) {
            Some((fv, gv, hv)) => {
                f = fv;
                g = gv;
                h = hv;
            }
            None => return Err(failure(iterations, "objective undefined at accepted point", &trace)),
        }
        trace.push(f);
        if improvement <= opts.tol * (1.0 + math::abs(f)) {
            converged = true;
            break;
        }
    }
    Ok(NewtonReport {
        x,
        value: f,
        iterations,
        converged,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        h: DMatrix<f64>,
        b: DVector<f64>,
    }

    impl Objective for Quadratic {
        fn value(&self, x: &[f64]) -> f64 {
            let x = DVector::from_column_slice(x);
            0.5 * x.dot(&(&self.h * &x)) - self.b.dot(&x)
        }
        fn derivatives(&self, x: &[f64]) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
            let xv = DVector::from_column_slice(x);
            Some((self.value(x), &self.h * &xv - &self.b, self.h.clone()))
        }
    }

    #[test]
    fn simplex_projection() {
        let mut v = [0.5, 0.5, 0.5];
        project_simplex(&mut v);
        assert!(v.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        let mut v = [2.0, 0.0, -1.0];
        project_simplex(&mut v);
        assert_eq!(v, [1.0, 0.0, 0.0]);
        let mut v = [0.2, 0.3, 0.5];
        project_simplex(&mut v);
        assert!((v[0] - 0.2).abs() < 1e-15 && (v[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nonnegative_quadratic_hits_boundary() {
        // unconstrained minimum (1, −1) → constrained (0.5, 0) for this coupling
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let b = &h * DVector::from_vec(vec![1.0, -1.0]);
        let q = Quadratic { h, b };
        let r = projected_newton(&q, Feasible::NonNegative, &[1.0, 1.0], NewtonOptions::default(), "test").unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 0.5).abs() < 1e-10 && r.x[1].abs() < 1e-12, "{:?}", r.x);
    }

    #[test]
    fn simplex_quadratic() {
        // min ½|x − p|² on the simplex with p outside → projection of p
        let h = DMatrix::identity(3, 3);
        let p = DVector::from_vec(vec![0.9, 0.6, -0.3]);
        let q = Quadratic { h, b: p.clone() };
        let r = projected_newton(
            &q,
            Feasible::RowSimplex { width: 3 },
            &[1.0 / 3.0; 3],
            NewtonOptions::default(),
            "test",
        )
        .unwrap();
        let mut expected = [0.9, 0.6, -0.3];
        project_simplex(&mut expected);
        for i in 0..3 {
            assert!((r.x[i] - expected[i]).abs() < 1e-9, "{:?} vs {:?}", r.x, expected);
        }
    }

    #[test]
    fn trace_is_monotone() {
        let h = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let q = Quadratic { h, b };
        let r = projected_newton(&q, Feasible::NonNegative, &[3.0, 3.0, 3.0], NewtonOptions::default(), "t").unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
