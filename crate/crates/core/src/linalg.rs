//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, Schur, SymmetricEigen};

use crate::math;

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() || is_acyclic(m) {
        return 0.0;
    }
    match try_eigenvalues(m) {
        Some(z) => z.iter().map(|z| math::hypot(z.re, z.im)).fold(0.0, f64::max),
        None => gelfand_radius(m),
    }
}

/// Whether the nonzero pattern has no directed cycle, i.e. `m` is nilpotent
/// by structure. QR iterations can stall on such matrices.
fn is_acyclic(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    let mut indegree = alloc::vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if m[(i, j)] != 0.0 {
                indegree[j] += 1;
            }
        }
    }
    let mut ready: alloc::vec::Vec<usize> = (0..n).filter(|&j| indegree[j] == 0).collect();
    let mut removed = 0;
    while let Some(i) = ready.pop() {
        removed += 1;
        for j in 0..n {
            if m[(i, j)] != 0.0 {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(j);
                }
            }
        }
    }
    removed == n
}

const SCHUR_MAX_ITERS: usize = 1_000;

/// Complex eigenvalues of a real square matrix, or `None` if the QR
/// iteration does not converge.
pub fn try_eigenvalues(m: &DMatrix<f64>) -> Option<alloc::vec::Vec<Complex<f64>>> {
    let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITERS)?;
    Some(schur.complex_eigenvalues().iter().copied().collect())
}

/// Complex eigenvalues of a real square matrix; empty if the QR iteration does not converge.
pub fn eigenvalues(m: &DMatrix<f64>) -> alloc::vec::Vec<Complex<f64>> {
    try_eigenvalues(m).unwrap_or_default()
}

/// `lim ‖Aᵏ‖^{1/k}` along `k = 2^j` with renormalized squaring.
fn gelfand_radius(m: &DMatrix<f64>) -> f64 {
    let mut a = m.clone();
    let mut log_scale = 0.0;
    let mut estimate = one_norm(&a);
    for j in 0..60 {
        let norm = one_norm(&a);
        if norm == 0.0 {
            return 0.0;
        }
        a /= norm;
        log_scale += math::ln(norm) / (1u64 << j) as f64;
        a = &a * &a;
        let next = math::exp(log_scale + math::ln(one_norm(&a)) / (1u64 << (j + 1)) as f64);
        // a nilpotent part vanishes once 2^j reaches the dimension
        let past_nilpotent = (1u64 << (j + 1)) >= 2 * m.nrows() as u64;
        if past_nilpotent && math::abs(next - estimate) <= 1e-15 * estimate {
            return next;
        }
        estimate = next;
    }
    estimate
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| math::abs(*x)).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the degree-13 Padé approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return a.clone();
    }
    let norm = one_norm(a);
    let mut squarings = 0i32;
    if norm > THETA13 {
        squarings = math::ceil(libm::log2(norm / THETA13)) as i32;
    }
    let a = a / libm::pow(2.0, squarings as f64);
    let b = &PADE13;
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular after scaling");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// Eigen-decomposes a symmetric matrix and lifts eigenvalues to at least `floor`,
/// returning the modified matrix and its largest eigenvalue.
pub(crate) fn clamp_spectrum(h: &DMatrix<f64>, rel_floor: f64, abs_floor: f64) -> (DMatrix<f64>, f64) {
    let sym = (h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let floor = (rel_floor * max).max(abs_floor);
    let clamped = eig.eigenvalues.map(|l| l.max(floor));
    let top = clamped.iter().copied().fold(floor, f64::max);
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    (rebuilt, top)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(h: &DMatrix<f64>) -> f64 {
    let sym = (h + h.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
