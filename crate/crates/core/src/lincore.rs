//! Dense linear-algebra kernels: eigenvalues, Lyapunov and Riccati solves,
//! and the matrix exponential.
//!
//! Everything here is sized for the small systems of this crate (`n ≤ 8`).
//! The Lyapunov solver vectorizes the equation with Kronecker products and
//! does one dense LU; the Riccati solver is Newton–Kleinman on top of it.

use nalgebra::{Cholesky, DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

use crate::tolerances::{
    CARE_MAX_ITERATIONS, CARE_RESIDUAL_TOL, CARE_STEP_TOL, EIGEN_MAX_ITERATIONS, HURWITZ_MARGIN, LYAPUNOV_RESIDUAL_TOL,
    RANK_TOL,
};

/// Dense real matrix used throughout the crate.
pub type Matrix = DMatrix<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("{op}: dimension mismatch ({detail})")]
    Dimension { op: &'static str, detail: String },
    #[error("{0}: matrix has non-finite entries")]
    NotFinite(&'static str),
    #[error("{what}: eigenvalue iteration did not converge")]
    NoConvergence { what: &'static str },
    #[error("{what}: matrix is not Hurwitz (spectral abscissa {abscissa:e})")]
    NotHurwitz { what: &'static str, abscissa: f64 },
    #[error("{what}: solution residual {residual:e} exceeds tolerance")]
    Inaccurate { what: &'static str, residual: f64 },
    #[error("{0}: matrix is singular")]
    Singular(&'static str),
    #[error("{0}: matrix is not positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("{0}: matrix is not positive semidefinite")]
    NotPositiveSemidefinite(&'static str),
    #[error("pair (a, b) is not stabilizable by the initial-gain construction")]
    NotStabilizable,
    #[error("Riccati iteration did not converge after {iterations} steps (relative residual {residual:e})")]
    CareNotConverged { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

pub(crate) fn ensure_square(op: &'static str, m: &Matrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(LinalgError::Dimension { op, detail: format!("expected square, got {}x{}", m.nrows(), m.ncols()) })
    }
}

pub(crate) fn ensure_finite(what: &'static str, m: &Matrix) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NotFinite(what))
    }
}

pub(crate) fn ensure_shape(op: &'static str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.shape() == (rows, cols) {
        Ok(())
    } else {
        Err(LinalgError::Dimension { op, detail: format!("expected {rows}x{cols}, got {}x{}", m.nrows(), m.ncols()) })
    }
}

/// All eigenvalues of a square matrix, with multiplicity.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    eigenvalues_of("eigenvalues", m)
}

/// Same as [`eigenvalues`], naming the matrix in any error.
pub fn eigenvalues_of(what: &'static str, m: &Matrix) -> Result<Vec<Complex64>> {
    ensure_square(what, m)?;
    ensure_finite(what, m)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur =
        Schur::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITERATIONS).ok_or(LinalgError::NoConvergence { what })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// True when every eigenvalue lies strictly in the open left half-plane.
pub fn is_hurwitz(m: &Matrix) -> Result<bool> {
    let eig = eigenvalues(m)?;
    Ok(hurwitz_from_spectrum(&eig))
}

pub(crate) fn hurwitz_from_spectrum(eig: &[Complex64]) -> bool {
    let radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let margin = HURWITZ_MARGIN * radius.max(1.0);
    eig.iter().all(|z| z.re < -margin)
}

fn require_hurwitz(what: &'static str, m: &Matrix) -> Result<()> {
    let eig = eigenvalues_of(what, m)?;
    if hurwitz_from_spectrum(&eig) {
        Ok(())
    } else {
        let abscissa = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        Err(LinalgError::NotHurwitz { what, abscissa })
    }
}

/// `(m + mᵀ)/2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Solves `aᵀP + Pa + q = 0` for symmetric `P`.
///
/// `a` must be Hurwitz. The controllability form `aX + Xaᵀ + q = 0` is the
/// same call with `aᵀ`.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    ensure_square("solve_lyapunov", a)?;
    let n = a.nrows();
    ensure_shape("solve_lyapunov", q, n, n)?;
    ensure_finite("solve_lyapunov q", q)?;
    require_hurwitz("solve_lyapunov a", a)?;

    let at = a.transpose();
    let eye = Matrix::identity(n, n);
    // Column-major vec: vec(aᵀP) = (I ⊗ aᵀ) vec(P), vec(Pa) = (aᵀ ⊗ I) vec(P).
    let kron = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -Matrix::from_column_slice(n * n, 1, q.as_slice());
    let sol = kron.lu().solve(&rhs).ok_or(LinalgError::Singular("solve_lyapunov Kronecker system"))?;
    let p = symmetrize(&Matrix::from_column_slice(n, n, sol.as_slice()));
    ensure_finite("solve_lyapunov result", &p)?;
    let residual = lyapunov_residual(a, q, &p);
    if residual > LYAPUNOV_RESIDUAL_TOL {
        return Err(LinalgError::Inaccurate { what: "solve_lyapunov", residual });
    }
    Ok(p)
}

/// Relative residual of `aᵀP + Pa + q = 0`, scaled by `‖a‖‖P‖ + ‖q‖`.
pub fn lyapunov_residual(a: &Matrix, q: &Matrix, p: &Matrix) -> f64 {
    let res = a.transpose() * p + p * a + q;
    let scale = a.norm() * p.norm() + q.norm();
    if scale == 0.0 {
        res.norm()
    } else {
        res.norm() / scale
    }
}

/// Stabilizing solution of the continuous algebraic Riccati equation.
#[derive(Debug, Clone)]
pub struct CareSolution {
    /// `P`, symmetric positive semidefinite.
    pub p: Matrix,
    /// Optimal gain `r⁻¹(bᵀP + sᵀ)` for the law `u = −Kx`.
    pub gain: Matrix,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Relative residual of `aᵀP + Pa − (Pb + s) r⁻¹ (bᵀP + sᵀ) + q = 0`.
pub fn care_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, s: &Matrix, p: &Matrix) -> f64 {
    let Some(rinv) = r.clone().try_inverse() else {
        return f64::INFINITY;
    };
    let pbs = p * b + s;
    let quad = &pbs * &rinv * pbs.transpose();
    let atp = a.transpose() * p;
    let res = &atp + atp.transpose() - &quad + q;
    let scale = 2.0 * atp.norm() + quad.norm() + q.norm();
    if scale == 0.0 {
        res.norm()
    } else {
        res.norm() / scale
    }
}

/// Solves `aᵀP + Pa − (Pb + s) r⁻¹ (bᵀP + sᵀ) + q = 0` for the stabilizing `P`.
///
/// The cross term is folded away first (`ā = a − b r⁻¹ sᵀ`,
/// `q̄ = q − s r⁻¹ sᵀ`), then Newton–Kleinman runs from a stabilizing initial
/// gain: zero when `ā` is already Hurwitz, otherwise Bass's shifted-Gramian
/// gain which places every closed-loop pole left of `−β`.
pub fn solve_care(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, s: &Matrix) -> Result<CareSolution> {
    ensure_square("solve_care a", a)?;
    let n = a.nrows();
    let m = b.ncols();
    ensure_shape("solve_care b", b, n, m)?;
    ensure_shape("solve_care q", q, n, n)?;
    ensure_shape("solve_care r", r, m, m)?;
    ensure_shape("solve_care s", s, n, m)?;
    for (what, mat) in
        [("solve_care a", a), ("solve_care b", b), ("solve_care q", q), ("solve_care r", r), ("solve_care s", s)]
    {
        ensure_finite(what, mat)?;
    }

    let r = symmetrize(r);
    let r_chol = Cholesky::new(r.clone()).ok_or(LinalgError::NotPositiveDefinite("solve_care r"))?;
    let rinv = r_chol.inverse();

    let a_bar = a - b * &rinv * s.transpose();
    let q_bar = symmetrize(&(q - s * &rinv * s.transpose()));
    let q_scale = q_bar.norm().max(q.norm());
    if n > 0 {
        let min_eig = SymmetricEigen::new(q_bar.clone()).eigenvalues.min();
        if min_eig < -1e-10 * q_scale.max(f64::MIN_POSITIVE) {
            return Err(LinalgError::NotPositiveSemidefinite("solve_care q - s r^-1 s^T"));
        }
    }

    let mut k_bar = initial_stabilizing_gain(&a_bar, b)?;
    let mut p_prev: Option<Matrix> = None;
    let mut best: Option<(f64, Matrix)> = None;

    for iter in 1..=CARE_MAX_ITERATIONS {
        let a_cl = &a_bar - b * &k_bar;
        let rhs = symmetrize(&(&q_bar + k_bar.transpose() * &r * &k_bar));
        let p = solve_lyapunov(&a_cl, &rhs)?;
        k_bar = &rinv * b.transpose() * &p;

        let residual = care_residual(a, b, q, &r, s, &p);
        let step = match &p_prev {
            Some(prev) => (&p - prev).norm() / p.norm().max(f64::MIN_POSITIVE),
            None => f64::INFINITY,
        };
        if best.as_ref().is_none_or(|(res, _)| residual < *res) {
            best = Some((residual, p.clone()));
        }
        let converged = residual < CARE_RESIDUAL_TOL && (step < 1e-10 || residual < 1e-3 * CARE_RESIDUAL_TOL);
        if converged || step < CARE_STEP_TOL {
            let (residual, p) = best.take().expect("best is set in the first iteration");
            if residual >= CARE_RESIDUAL_TOL {
                return Err(LinalgError::CareNotConverged { iterations: iter, residual });
            }
            return finish_care(p, b, s, &rinv, iter, residual);
        }
        p_prev = Some(p);
    }
    let (residual, p) = best.expect("at least one Newton step ran");
    if residual < CARE_RESIDUAL_TOL {
        finish_care(p, b, s, &rinv, CARE_MAX_ITERATIONS, residual)
    } else {
        Err(LinalgError::CareNotConverged { iterations: CARE_MAX_ITERATIONS, residual })
    }
}

fn finish_care(
    p: Matrix,
    b: &Matrix,
    s: &Matrix,
    rinv: &Matrix,
    iterations: usize,
    residual: f64,
) -> Result<CareSolution> {
    let gain = rinv * (b.transpose() * &p + s.transpose());
    Ok(CareSolution { p, gain, iterations, relative_residual: residual })
}

/// Stabilizing `K` for `a − bK`: zero if `a` is Hurwitz, else Bass's gain
/// `K = bᵀZ⁻¹` with `(a + βI)Z + Z(a + βI)ᵀ = 2bbᵀ`.
fn initial_stabilizing_gain(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let eig = eigenvalues_of("solve_care a - b r^-1 s^T", a)?;
    if hurwitz_from_spectrum(&eig) {
        return Ok(Matrix::zeros(b.ncols(), n));
    }
    let radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let beta = 1.0 + radius;
    let shifted = -(a + Matrix::identity(n, n) * beta);
    let gram = solve_lyapunov(&shifted.transpose(), &(b * b.transpose() * 2.0))?;
    let chol = Cholesky::new(gram).ok_or(LinalgError::NotStabilizable)?;
    let k = b.transpose() * chol.inverse();
    if !is_hurwitz(&(a - b * &k))? {
        return Err(LinalgError::NotStabilizable);
    }
    Ok(k)
}

/// `exp(m·t)` by scaling and squaring with a Padé approximant.
pub fn expm(m: &Matrix, t: f64) -> Result<Matrix> {
    ensure_square("expm", m)?;
    ensure_finite("expm", m)?;
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    Ok((m * t).exp())
}

/// Zero-order-hold discretization: `(e^{A·dt}, ∫₀^dt e^{A·s} ds·B)`.
pub fn zoh_discretize(a: &Matrix, b: &Matrix, dt: f64) -> Result<(Matrix, Matrix)> {
    ensure_square("zoh_discretize", a)?;
    let n = a.nrows();
    let m = b.ncols();
    ensure_shape("zoh_discretize b", b, n, m)?;
    let mut blk = Matrix::zeros(n + m, n + m);
    blk.view_mut((0, 0), (n, n)).copy_from(a);
    blk.view_mut((0, n), (n, m)).copy_from(b);
    let e = expm(&blk, dt)?;
    Ok((e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned()))
}

/// Solves `P = aPaᵀ + q` for a Schur-stable `a` (spectral radius < 1).
pub fn solve_discrete_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    ensure_square("solve_discrete_lyapunov", a)?;
    let n = a.nrows();
    ensure_shape("solve_discrete_lyapunov", q, n, n)?;
    let radius = eigenvalues_of("solve_discrete_lyapunov a", a)?.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if radius >= 1.0 {
        return Err(LinalgError::NotHurwitz {
            what: "solve_discrete_lyapunov a (not Schur stable)",
            abscissa: radius - 1.0,
        });
    }
    let kron = Matrix::identity(n * n, n * n) - a.kronecker(a);
    let rhs = Matrix::from_column_slice(n * n, 1, q.as_slice());
    let sol = kron.lu().solve(&rhs).ok_or(LinalgError::Singular("solve_discrete_lyapunov Kronecker system"))?;
    Ok(symmetrize(&Matrix::from_column_slice(n, n, sol.as_slice())))
}

/// Moore–Penrose pseudo-inverse and numerical rank.
pub fn pinv_with_rank(m: &Matrix) -> (Matrix, usize) {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = RANK_TOL * smax.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let pinv = svd.pseudo_inverse(cutoff).expect("SVD was computed with both factors");
    (pinv, rank)
}

/// Approximate multiset equality of two spectra (greedy nearest matching).
pub fn spectra_match(lhs: &[Complex64], rhs: &[Complex64], tol: f64) -> bool {
    if lhs.len() != rhs.len() {
        return false;
    }
    let mut pool: Vec<Complex64> = rhs.to_vec();
    for z in lhs {
        let Some((idx, dist)) =
            pool.iter().enumerate().map(|(i, w)| (i, (z - w).norm())).min_by(|x, y| x.1.total_cmp(&y.1))
        else {
            return false;
        };
        if dist > tol * z.norm().max(1.0) {
            return false;
        }
        pool.swap_remove(idx);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn sorted_re(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn eig_diagonal() {
        let ev = eigenvalues(&dmatrix![-10.0, 0.0; 0.0, -10.0]).unwrap();
        assert!(ev.iter().all(|z| (z.re + 10.0).abs() < 1e-12 && z.im.abs() < 1e-12));
    }

    #[test]
    fn eig_rotation_generator() {
        let ev = sorted_re(eigenvalues(&dmatrix![0.0, 1.0; -1.0, 0.0]).unwrap());
        assert!(spectra_match(&ev, &[Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)], 1e-12));
    }

    #[test]
    fn eig_rejects_rectangular() {
        let err = eigenvalues(&Matrix::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, LinalgError::Dimension { .. }));
    }

    #[test]
    fn lyapunov_scalar_and_diagonal() {
        let p = solve_lyapunov(&dmatrix![-1.0], &dmatrix![2.0]).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-14);
        let p = solve_lyapunov(&dmatrix![-1.0, 0.0; 0.0, -2.0], &Matrix::identity(2, 2)).unwrap();
        assert!((p - dmatrix![0.5, 0.0; 0.0, 0.25]).norm() < 1e-14);
    }

    #[test]
    fn lyapunov_coupled_against_hand_solution() {
        // aᵀP + Pa + I = 0 with a = [[-10, 0], [1, -1]]. Writing P = [[p, r], [r, s]]
        // gives -20p + 2r + 1 = 0, -11r + s = 0, -2s + 1 = 0, so
        // s = 1/2, r = 1/22, p = (1 + 1/11)/20 = 12/220.
        let a = dmatrix![-10.0, 0.0; 1.0, -1.0];
        let p = solve_lyapunov(&a, &Matrix::identity(2, 2)).unwrap();
        let expected = dmatrix![12.0 / 220.0, 1.0 / 22.0; 1.0 / 22.0, 0.5];
        assert!((&p - expected).norm() < 1e-14);
        assert!(lyapunov_residual(&a, &Matrix::identity(2, 2), &p) < 1e-12);
    }

    #[test]
    fn lyapunov_requires_hurwitz() {
        let err = solve_lyapunov(&dmatrix![0.0, 1.0; 0.0, 0.0], &Matrix::identity(2, 2)).unwrap_err();
        assert!(matches!(err, LinalgError::NotHurwitz { .. }));
    }

    #[test]
    fn care_scalar_cases() {
        let z = dmatrix![0.0];
        let sol = solve_care(&dmatrix![0.0], &dmatrix![1.0], &dmatrix![1.0], &dmatrix![1.0], &z).unwrap();
        assert!((sol.p[(0, 0)] - 1.0).abs() < 1e-12);
        let sol = solve_care(&dmatrix![1.0], &dmatrix![1.0], &dmatrix![0.0], &dmatrix![1.0], &z).unwrap();
        assert!((sol.p[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((sol.gain[(0, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn care_rejects_indefinite_r() {
        let z = dmatrix![0.0];
        let err = solve_care(&dmatrix![0.0], &dmatrix![1.0], &dmatrix![1.0], &dmatrix![-1.0], &z).unwrap_err();
        assert_eq!(err, LinalgError::NotPositiveDefinite("solve_care r"));
    }

    #[test]
    fn care_rejects_uncontrollable_unstable_mode() {
        // Mode at +1 is not reachable from b.
        let a = dmatrix![1.0, 0.0; 0.0, -1.0];
        let b = dmatrix![0.0; 1.0];
        let q = Matrix::identity(2, 2);
        let err = solve_care(&a, &b, &q, &dmatrix![1.0], &Matrix::zeros(2, 1)).unwrap_err();
        assert_eq!(err, LinalgError::NotStabilizable);
    }

    #[test]
    fn expm_examples() {
        assert!((expm(&Matrix::zeros(2, 2), 3.7).unwrap() - Matrix::identity(2, 2)).norm() < 1e-15);
        let e = expm(&dmatrix![-1.0], 1.0).unwrap();
        assert!((e[(0, 0)] - 0.367_879_441_171_442_3).abs() < 1e-15);
        let e = expm(&dmatrix![0.0, 1.0; 0.0, 0.0], 2.0).unwrap();
        assert!((e - dmatrix![1.0, 2.0; 0.0, 1.0]).norm() < 1e-14);
    }

    #[test]
    fn zoh_of_integrator() {
        let (ad, bd) = zoh_discretize(&dmatrix![0.0], &dmatrix![2.0], 0.5).unwrap();
        assert!((ad[(0, 0)] - 1.0).abs() < 1e-15 && (bd[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn discrete_lyapunov_scalar() {
        // p = 0.25p + 3  ⇒  p = 4
        let p = solve_discrete_lyapunov(&dmatrix![0.5], &dmatrix![3.0]).unwrap();
        assert!((p[(0, 0)] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn pinv_rank() {
        let (p, rank) = pinv_with_rank(&dmatrix![1.0, 0.0, 0.0; 0.0, 2.0, 0.0]);
        assert_eq!(rank, 2);
        assert!((p[(1, 1)] - 0.5).abs() < 1e-15);
        let (_, rank) = pinv_with_rank(&dmatrix![1.0, 2.0; 2.0, 4.0]);
        assert_eq!(rank, 1);
    }
}
