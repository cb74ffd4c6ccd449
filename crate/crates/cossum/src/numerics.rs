//! Dense linear-algebra kernels used by the recovery algorithms.
//!
//! Thin layer over nalgebra. Everything here works on `f64` matrices; the
//! eigenvalue routines return complex values because non-symmetric real
//! matrices have complex spectra in general.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;
use twofloat::TwoFloat;

pub type DenseMatrix = DMatrix<f64>;
pub type DenseVector = nalgebra::DVector<f64>;

/// Iteration cap for the QR/Schur eigenvalue loops. Generous: the matrices
/// handled here are small (a few dozen rows).
const MAX_EIG_ITER: usize = 100_000;

/// An eigenvalue of the pencil `(A, B)` counts as infinite when the
/// generalized pair `(alpha, beta)` has `|beta| <= INF_EIG_TOL * (|alpha| + |beta|)`.
const INF_EIG_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("empty matrix")]
    Empty,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("SVD iteration did not converge")]
    SvdFailed,
    #[error("eigenvalue iteration did not converge")]
    EigFailed,
    #[error("pencil is numerically singular for every trial shift")]
    SingularPencil,
}

/// Thin singular value decomposition `A = U diag(sigma) V^T`.
///
/// `U` is `rows x k` and `V` is `cols x k` with `k = min(rows, cols)`; both
/// have orthonormal columns and `sigma` is sorted descending.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

fn check_input(a: &DenseMatrix) -> Result<(), NumericsError> {
    if a.is_empty() {
        return Err(NumericsError::Empty);
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    Ok(())
}

fn assemble_sorted(decomp: nalgebra::linalg::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>) -> Option<SvdResult> {
    let u = decomp.u?;
    let v = decomp.v_t?.transpose();
    let sigma: Vec<f64> = decomp.singular_values.iter().copied().collect();

    // nalgebra sorts descending already; re-sort defensively so the contract
    // never depends on backend behavior.
    let k = sigma.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    if order.iter().enumerate().any(|(pos, &i)| pos != i) {
        let u_sorted = DenseMatrix::from_fn(u.nrows(), k, |r, c| u[(r, order[c])]);
        let v_sorted = DenseMatrix::from_fn(v.nrows(), k, |r, c| v[(r, order[c])]);
        let sigma_sorted = order.iter().map(|&i| sigma[i]).collect();
        return Some(SvdResult {
            u: u_sorted,
            sigma: sigma_sorted,
            v: v_sorted,
        });
    }
    Some(SvdResult { u, sigma, v })
}

/// Certifies `U diag(sigma) V^T = A` on deterministic probe vectors. Costs
/// two matrix passes; catches the rare backend failure where the iteration
/// converges to an inconsistent factorization.
fn factorization_checks_out(a: &DenseMatrix, dec: &SvdResult) -> bool {
    let fro = a.norm();
    let mut state = 0x9e37_79b9_7f4a_7c15_u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    for _ in 0..2 {
        let x = DenseVector::from_fn(a.ncols(), |_, _| next());
        let direct = a * &x;
        let mut scaled = dec.v.transpose() * &x;
        for (i, s) in dec.sigma.iter().enumerate() {
            scaled[i] *= s;
        }
        let via_factors = &dec.u * scaled;
        if (direct - via_factors).norm() > 1e-10 * fro * x.norm() {
            return false;
        }
    }
    true
}

/// Computes the thin SVD of `a` with singular values sorted descending.
pub fn svd(a: &DenseMatrix) -> Result<SvdResult, NumericsError> {
    check_input(a)?;
    // The backend can assemble an inconsistent factorization on exactly
    // rank-deficient inputs (e.g. a constant matrix) at the default
    // deflation threshold; a coarser threshold handles those, so verify
    // and retry rather than trust either unconditionally.
    for eps in [f64::EPSILON, 1e-12] {
        let Some(decomp) = a.clone().try_svd(true, true, eps, 0) else {
            continue;
        };
        let Some(result) = assemble_sorted(decomp) else {
            continue;
        };
        if factorization_checks_out(a, &result) {
            return Ok(result);
        }
    }
    Err(NumericsError::SvdFailed)
}

impl SvdResult {
    /// Relative cutoff below which singular values are treated as zero when
    /// inverting: `max(rows, cols) * eps * sigma_1`.
    fn rank_cutoff(&self) -> f64 {
        let dim = self.u.nrows().max(self.v.nrows()) as f64;
        dim * f64::EPSILON * self.sigma.first().copied().unwrap_or(0.0)
    }

    /// Applies the pseudoinverse: `x = V diag(1/sigma) U^T b`, zeroing
    /// directions with negligible singular values (minimum-norm solution).
    pub fn solve(&self, b: &DenseVector) -> DenseVector {
        let cutoff = self.rank_cutoff();
        let utb = self.u.transpose() * b;
        let mut scaled = utb;
        for (i, s) in self.sigma.iter().enumerate() {
            scaled[i] = if *s > cutoff { scaled[i] / s } else { 0.0 };
        }
        &self.v * scaled
    }

    /// Matrix right-hand-side variant of [`SvdResult::solve`].
    pub fn solve_mat(&self, b: &DenseMatrix) -> DenseMatrix {
        let cutoff = self.rank_cutoff();
        let mut utb = self.u.transpose() * b;
        for (i, s) in self.sigma.iter().enumerate() {
            let scale = if *s > cutoff { 1.0 / s } else { 0.0 };
            utb.row_mut(i).scale_mut(scale);
        }
        &self.v * utb
    }
}

/// Minimum-norm least-squares solution of `A x = b` via SVD.
pub fn least_squares(a: &DenseMatrix, b: &DenseVector) -> Result<DenseVector, NumericsError> {
    if a.nrows() != b.len() {
        return Err(NumericsError::DimensionMismatch(format!(
            "{}x{} matrix vs length-{} right-hand side",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    Ok(svd(a)?.solve(b))
}

/// Least-squares solve with a matrix right-hand side: `X = pinv(A) B`.
pub fn least_squares_mat(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, NumericsError> {
    if a.nrows() != b.nrows() {
        return Err(NumericsError::DimensionMismatch(format!(
            "{}x{} matrix vs {}x{} right-hand side",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    check_input(b)?;
    Ok(svd(a)?.solve_mat(b))
}

/// Householder least squares in double-word arithmetic for systems whose
/// conditioning defeats plain f64 (clustered-frequency Vandermonde and
/// annihilation systems). `a` must have at least as many rows as columns.
/// Returns `None` when the triangular diagonal collapses below `rank_tol`
/// relative to its largest entry; callers pick their own failure policy.
pub(crate) fn dd_qr_solve(
    mut a: Vec<Vec<TwoFloat>>,
    mut b: Vec<TwoFloat>,
    rank_tol: f64,
) -> Option<Vec<TwoFloat>> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    debug_assert!(rows >= cols && b.len() == rows);
    let mut rdiag = vec![0.0f64; cols];
    for k in 0..cols {
        let mut s = TwoFloat::from(0.0);
        for row in a.iter().skip(k) {
            s += row[k] * row[k];
        }
        let norm = s.sqrt();
        if f64::from(norm) == 0.0 {
            return None;
        }
        let sign = if f64::from(a[k][k]) >= 0.0 { 1.0 } else { -1.0 };
        // Reflector v overwrites the pivot column below the diagonal.
        a[k][k] += norm * sign;
        let mut vv = TwoFloat::from(0.0);
        for row in a.iter().skip(k) {
            vv += row[k] * row[k];
        }
        for j in k + 1..cols {
            let mut dot = TwoFloat::from(0.0);
            for row in a.iter().skip(k) {
                dot += row[k] * row[j];
            }
            let f = dot * 2.0 / vv;
            for row in a.iter_mut().skip(k) {
                let t = row[k] * f;
                row[j] -= t;
            }
        }
        let mut dot = TwoFloat::from(0.0);
        for r in k..rows {
            dot += a[r][k] * b[r];
        }
        let f = dot * 2.0 / vv;
        for r in k..rows {
            let t = a[r][k] * f;
            b[r] -= t;
        }
        a[k][k] = norm * (-sign);
        rdiag[k] = f64::from(norm);
    }
    let rmax = rdiag.iter().fold(0.0f64, |mx, &d| mx.max(d));
    if rdiag.iter().any(|&d| d < rank_tol * rmax) {
        return None;
    }
    let mut x = vec![TwoFloat::from(0.0); cols];
    for row in (0..cols).rev() {
        let mut acc = b[row];
        for j in row + 1..cols {
            acc -= a[row][j] * x[j];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Eigenvalues of a square real matrix, complex in general, sorted by
/// `(re, im)` for reproducibility.
pub fn eig_dense(a: &DenseMatrix) -> Result<Vec<Complex64>, NumericsError> {
    check_input(a)?;
    if a.nrows() != a.ncols() {
        return Err(NumericsError::DimensionMismatch(format!(
            "eigenvalues need a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, MAX_EIG_ITER)
        .ok_or(NumericsError::EigFailed)?;
    let mut eig: Vec<Complex64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|c| Complex64::new(c.re, c.im))
        .collect();
    eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(eig)
}

/// Finite eigenvalues of the generalized problem `A v = lambda B v`.
///
/// `B` may be singular; infinite eigenvalues are filtered out. Solved by
/// shift-and-invert: for a shift `s` with `A - sB` invertible, the standard
/// eigenvalues `mu` of `(A - sB)^{-1} B` map to `lambda = s + 1/mu`, and
/// `mu ~ 0` marks an infinite eigenvalue of the pencil.
pub fn eig_pencil(a: &DenseMatrix, b: &DenseMatrix) -> Result<Vec<Complex64>, NumericsError> {
    check_input(a)?;
    check_input(b)?;
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(NumericsError::DimensionMismatch(format!(
            "pencil needs equal square matrices, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }

    // Shift scale in eigenvalue units; the candidates spread around it with
    // irrational offsets so exact characteristic roots are unlikely shifts.
    let scale = {
        let na = a.norm();
        let nb = b.norm();
        if nb > 0.0 {
            (na / nb).max(1.0)
        } else {
            1.0
        }
    };
    let candidates = [
        0.0,
        1.0,
        -1.0,
        std::f64::consts::FRAC_1_SQRT_2,
        -std::f64::consts::FRAC_1_SQRT_2,
        std::f64::consts::E,
        -std::f64::consts::E,
        4.330_127,
    ];

    let mut chosen: Option<(f64, f64, SvdResult)> = None; // (cond, shift, factorization)
    for &c in &candidates {
        let shift = c * scale;
        let shifted = a - b.scale(shift);
        let dec = svd(&shifted)?;
        let smax = dec.sigma.first().copied().unwrap_or(0.0);
        let smin = dec.sigma.last().copied().unwrap_or(0.0);
        let cond = if smax > 0.0 { smin / smax } else { 0.0 };
        if chosen.as_ref().is_none_or(|(q, _, _)| cond > *q) {
            chosen = Some((cond, shift, dec));
        }
        if cond > 1e-8 {
            break;
        }
    }
    let (chosen_cond, chosen_shift, dec) = chosen.ok_or(NumericsError::SingularPencil)?;
    if chosen_cond < 1e-13 {
        return Err(NumericsError::SingularPencil);
    }

    let x = dec.solve_mat(b);
    let mu = eig_dense(&x)?;
    let mut finite: Vec<Complex64> = Vec::new();
    for m in mu {
        let beta = m;
        let alpha = m * chosen_shift + 1.0;
        if beta.norm() <= INF_EIG_TOL * (alpha.norm() + beta.norm()) {
            continue; // infinite eigenvalue
        }
        finite.push(alpha / beta);
    }
    finite.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(finite)
}

/// Numerical rank from a descending singular-value list: the smallest `M`
/// with `sigma[M] < eps * sigma[0]`, or the full length when no singular
/// value falls below the threshold. An all-zero spectrum has rank 0.
pub fn numerical_rank(sigma: &[f64], eps: f64) -> usize {
    match sigma.first() {
        None => 0,
        Some(&s1) if s1 <= 0.0 => 0,
        Some(&s1) => sigma
            .iter()
            .position(|&s| s < eps * s1)
            .unwrap_or(sigma.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn seeded_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        // Small deterministic LCG; plenty for test fixtures.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        DenseMatrix::from_fn(rows, cols, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
    }

    #[test]
    fn svd_of_identity() {
        let a = DenseMatrix::identity(3, 3);
        let dec = svd(&a).unwrap();
        for s in &dec.sigma {
            assert_relative_eq!(*s, 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn svd_of_rank_one_outer_product() {
        let u = DenseVector::from_vec(vec![1.0, -2.0, 0.5]);
        let v = DenseVector::from_vec(vec![3.0, 4.0]);
        let a = &u * v.transpose();
        let dec = svd(&a).unwrap();
        assert_relative_eq!(dec.sigma[0], u.norm() * v.norm(), max_relative = 1e-13);
        assert!(dec.sigma[1] <= 1e-12 * dec.sigma[0]);
    }

    #[test]
    fn svd_reconstructs_random_matrices() {
        for (rows, cols, seed) in [(7, 5, 1u64), (5, 7, 2), (6, 6, 3)] {
            let a = seeded_matrix(rows, cols, seed);
            let dec = svd(&a).unwrap();
            let k = rows.min(cols);
            let mut recon = DenseMatrix::zeros(rows, cols);
            for i in 0..k {
                recon += dec.u.column(i) * dec.v.column(i).transpose() * dec.sigma[i];
            }
            assert!((a.clone() - recon).norm() <= 1e-12 * dec.sigma[0].max(1.0));
            let utu = dec.u.transpose() * &dec.u;
            let vtv = dec.v.transpose() * &dec.v;
            assert!((utu - DenseMatrix::identity(k, k)).norm() < 1e-12);
            assert!((vtv - DenseMatrix::identity(k, k)).norm() < 1e-12);
            assert!(dec.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn least_squares_identity_returns_rhs() {
        let a = DenseMatrix::identity(4, 4);
        let b = DenseVector::from_vec(vec![1.0, -2.0, 3.0, 0.25]);
        let x = least_squares(&a, &b).unwrap();
        assert!((x - b).norm() < 1e-14);
    }

    #[test]
    fn least_squares_recovers_consistent_overdetermined_solution() {
        let a = seeded_matrix(10, 4, 7);
        let x0 = DenseVector::from_vec(vec![1.0, 2.0, -1.5, 0.3]);
        let b = &a * &x0;
        let x = least_squares(&a, &b).unwrap();
        assert!((x - x0).norm() < 1e-10);
    }

    #[test]
    fn least_squares_picks_minimum_norm_solution() {
        // Rank-deficient: solutions are (2-t, t); minimum norm is (1, 1).
        let a = DenseMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DenseVector::from_vec(vec![2.0, 2.0]);
        let x = least_squares(&a, &b).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eig_dense_diagonal_and_rotation() {
        let d = DenseMatrix::from_diagonal(&DenseVector::from_vec(vec![3.0, 1.0, 2.0]));
        let eig = eig_dense(&d).unwrap();
        let re: Vec<f64> = eig.iter().map(|c| c.re).collect();
        assert_relative_eq!(re[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(re[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(re[2], 3.0, epsilon = 1e-12);
        assert!(eig.iter().all(|c| c.im.abs() < 1e-14));

        let rot = DenseMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let eig = eig_dense(&rot).unwrap();
        assert_relative_eq!(eig[0].im, -1.0, epsilon = 1e-12);
        assert_relative_eq!(eig[1].im, 1.0, epsilon = 1e-12);
        assert!(eig.iter().all(|c| c.re.abs() < 1e-12));
    }

    #[test]
    fn eig_pencil_with_identity_b_is_standard_eigenproblem() {
        let a = DenseMatrix::from_diagonal(&DenseVector::from_vec(vec![2.0, 3.0]));
        let b = DenseMatrix::identity(2, 2);
        let eig = eig_pencil(&a, &b).unwrap();
        assert_eq!(eig.len(), 2);
        assert_relative_eq!(eig[0].re, 2.0, epsilon = 1e-10);
        assert_relative_eq!(eig[1].re, 3.0, epsilon = 1e-10);
    }

    #[test]
    fn eig_pencil_filters_infinite_eigenvalues() {
        let a = DenseMatrix::from_diagonal(&DenseVector::from_vec(vec![5.0, 1.0]));
        let b = DenseMatrix::from_diagonal(&DenseVector::from_vec(vec![1.0, 0.0]));
        let eig = eig_pencil(&a, &b).unwrap();
        assert_eq!(eig.len(), 1);
        assert_relative_eq!(eig[0].re, 5.0, epsilon = 1e-10);
        assert!(eig[0].im.abs() < 1e-12);
    }

    #[test]
    fn numerical_rank_thresholds() {
        assert_eq!(numerical_rank(&[1.0, 1e-3, 1e-12], 1e-10), 2);
        assert_eq!(numerical_rank(&[1.0, 0.5], 1e-10), 2);
        assert_eq!(numerical_rank(&[], 1e-10), 0);
        assert_eq!(numerical_rank(&[0.0, 0.0], 1e-10), 0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = DenseMatrix::identity(3, 2);
        let b = DenseVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(
            least_squares(&a, &b),
            Err(NumericsError::DimensionMismatch(_))
        ));
        assert!(matches!(eig_dense(&a), Err(NumericsError::DimensionMismatch(_))));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut a = DenseMatrix::identity(2, 2);
        a[(0, 0)] = f64::NAN;
        assert!(matches!(svd(&a), Err(NumericsError::NonFinite)));
    }

    proptest! {
        #[test]
        fn svd_reconstructs_with_orthonormal_factors(
            rows in 1usize..10,
            cols in 1usize..10,
            seed in 0u64..500,
        ) {
            let a = seeded_matrix(rows, cols, seed);
            let dec = svd(&a).unwrap();
            let r = rows.min(cols);
            prop_assert_eq!(dec.sigma.len(), r);
            prop_assert!(dec.sigma.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(dec.sigma.iter().all(|s| *s >= 0.0));
            let s = DenseMatrix::from_fn(r, r, |i, j| if i == j { dec.sigma[i] } else { 0.0 });
            let rebuilt = &dec.u * s * dec.v.transpose();
            let scale = 1.0 + dec.sigma.first().copied().unwrap_or(0.0);
            prop_assert!((&a - rebuilt).norm() <= 1e-12 * scale);
            let eye = DenseMatrix::identity(r, r);
            prop_assert!((dec.u.transpose() * &dec.u - &eye).norm() <= 1e-12);
            prop_assert!((dec.v.transpose() * &dec.v - &eye).norm() <= 1e-12);
        }
    }
}
