//! Direct Prony-type reference solver.
//!
//! For exact samples of an M-term cosine sum, the polynomial
//! `p(z) = prod_j (z - cos(phi_j h))` expanded in the Chebyshev basis
//! `p = sum_l p_l T_l` (leading coefficient `p_M = 2^{1-M}`) annihilates the
//! symmetrized samples at every admissible shift:
//!
//! ```text
//! sum_{l=0}^{M} p_l (f_{m+l} + f_{m-l}) = 0,   m = 0..N-M-1.
//! ```
//!
//! The first M shifts already determine `p_0..p_{M-1}` (a square
//! Toeplitz+Hankel system), but that system inherits the full
//! ill-conditioning of clustered frequencies, so the solver stacks all
//! admissible shifts and solves the least-squares problem in compensated
//! double-word arithmetic. Roots come off the colleague matrix and are
//! Newton-polished against the double-word coefficients; a final damped
//! Gauss-Newton pass fits `(gamma, phi)` to the complete sample record.
//! Exact-data use only; it is not noise-robust.

use crate::model::{CosineSum, ModelError, SampleVector};
use crate::numerics::{self, DenseMatrix, DenseVector, NumericsError};
use thiserror::Error;
use twofloat::TwoFloat;

/// Maximum imaginary part tolerated in a colleague-matrix root.
const ROOT_IMAG_TOL: f64 = 1e-8;
/// Roots may poke out of [-1, 1] by at most this much before being an error.
const ROOT_DOMAIN_TOL: f64 = 1e-8;
/// Relative drop in the triangular-factor diagonal that declares the
/// annihilation system rank deficient. Rank collapse (zero signal, an
/// overstated term count, coinciding cosines) shows up at the sample
/// roundoff floor near 1e-16; legitimately clustered frequencies stay
/// well above (the reference signal sits at 1.1e-8).
const RANK_COLLAPSE_TOL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("need at least 2M samples and M >= 1 (got N = {n}, M = {m})")]
    InvalidInput { n: usize, m: usize },
    #[error("the Prony system is numerically singular; is M too large?")]
    SingularSystem,
    #[error("polynomial must have a nonzero leading coefficient and degree >= 1")]
    DegeneratePolynomial,
    #[error("characteristic root {0} lies outside the cosine domain")]
    RootOutsideDomain(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Polynomial in the Chebyshev basis: `coeffs[l]` multiplies `T_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevPoly {
    coeffs: Vec<f64>,
}

impl ChebyshevPoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a polynomial needs coefficients");
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Monic polynomial `prod (z - r_j)` in the Chebyshev basis, built with
    /// the product rule `T_a T_b = (T_{a+b} + T_{|a-b|}) / 2`. The leading
    /// coefficient is `2^{1-M}` by construction.
    pub fn from_roots(roots: &[f64]) -> Self {
        let mut p = vec![1.0];
        for &r in roots {
            // Multiply by z in the T-basis, then subtract r * p.
            let mut q = vec![0.0; p.len() + 1];
            q[1] += p[0];
            for (l, &c) in p.iter().enumerate().skip(1) {
                q[l + 1] += c / 2.0;
                q[l - 1] += c / 2.0;
            }
            for (l, &c) in p.iter().enumerate() {
                q[l] -= r * c;
            }
            p = q;
        }
        Self { coeffs: p }
    }
}

/// Evaluates a Chebyshev-basis polynomial by the Clenshaw recurrence.
pub fn chebyshev_eval(p: &ChebyshevPoly, z: f64) -> f64 {
    let c = &p.coeffs;
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b = ck + 2.0 * z * b1 - b2;
        b2 = b1;
        b1 = b;
    }
    c[0] + z * b1 - b2
}

/// Colleague matrix of a degree-M Chebyshev-basis polynomial: the M x M
/// matrix whose eigenvalues are the roots of `p`. Concretely
/// `det(zI - C) = p(z) / (2^{M-1} p_M)`, the monic rescaling of `p`.
pub fn chebyshev_companion(p: &ChebyshevPoly) -> Result<DenseMatrix, OracleError> {
    let m = p.degree();
    let lead = *p.coeffs.last().unwrap();
    if m == 0 || lead == 0.0 || !p.coeffs.iter().all(|c| c.is_finite()) {
        return Err(OracleError::DegeneratePolynomial);
    }
    let mut c = DenseMatrix::zeros(m, m);
    for l in 0..m {
        // z*T_l = w*T_{l+1} + (l>=1) 0.5*T_{l-1}, with w = 1 for l = 0.
        let w = if l == 0 { 1.0 } else { 0.5 };
        if l >= 1 {
            c[(l - 1, l)] += 0.5;
        }
        if l + 1 < m {
            c[(l + 1, l)] += w;
        } else {
            // T_M spills past the basis: reduce modulo p.
            for r in 0..m {
                c[(r, l)] -= w * p.coeffs[r] / lead;
            }
        }
    }
    Ok(c)
}

/// Clenshaw value and derivative of a double-word Chebyshev-basis polynomial.
fn dd_clenshaw(coeffs: &[TwoFloat], z: TwoFloat) -> (TwoFloat, TwoFloat) {
    let two_z = z * 2.0;
    let (mut b1, mut b2) = (TwoFloat::from(0.0), TwoFloat::from(0.0));
    let (mut d1, mut d2) = (TwoFloat::from(0.0), TwoFloat::from(0.0));
    for &c in coeffs.iter().rev() {
        let b0 = two_z * b1 - b2 + c;
        let d0 = two_z * d1 - d2 + b1 * 2.0;
        b2 = b1;
        b1 = b0;
        d2 = d1;
        d1 = d0;
    }
    (b1 - z * b2, d1 - z * d2 - b2)
}

/// Sum-of-squares misfit of a candidate `(gamma, phi)` against the samples.
fn sample_misfit(gamma: &[f64], phi: &[f64], samples: &SampleVector) -> f64 {
    let grid = samples.grid();
    samples
        .values()
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            let model: f64 = gamma
                .iter()
                .zip(phi)
                .map(|(g, p)| g * (p * grid.node(k)).cos())
                .sum();
            (model - f).powi(2)
        })
        .sum()
}

/// Damped Gauss-Newton refinement of `(gamma, phi)` on the full sample
/// record. Steps that fail to reduce the misfit are halved, then abandoned;
/// the global solvers already land close, so this only sharpens the last
/// digits lost to their intermediate parametrizations.
pub(crate) fn polish_on_samples(gamma: &mut Vec<f64>, phi: &mut Vec<f64>, samples: &SampleVector) {
    let n = samples.len();
    let m = gamma.len();
    let grid = samples.grid();
    let mut misfit = sample_misfit(gamma, phi, samples);
    for _ in 0..8 {
        let jac = DenseMatrix::from_fn(n, 2 * m, |k, col| {
            let t = grid.node(k);
            if col < m {
                (phi[col] * t).cos()
            } else {
                -gamma[col - m] * t * (phi[col - m] * t).sin()
            }
        });
        let resid = DenseVector::from_fn(n, |k, _| {
            let t = grid.node(k);
            let model: f64 = gamma.iter().zip(phi.iter()).map(|(g, p)| g * (p * t).cos()).sum();
            samples.values()[k] - model
        });
        let Ok(step) = numerics::least_squares(&jac, &resid) else {
            break;
        };
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..5 {
            let cand_g: Vec<f64> = (0..m).map(|j| gamma[j] + scale * step[j]).collect();
            let cand_p: Vec<f64> = (0..m).map(|j| (phi[j] + scale * step[m + j]).max(0.0)).collect();
            let cand_misfit = sample_misfit(&cand_g, &cand_p, samples);
            if cand_misfit.is_finite() && cand_misfit < misfit {
                *gamma = cand_g;
                *phi = cand_p;
                misfit = cand_misfit;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }
}

/// Recovers an M-term cosine sum from exact samples by the direct
/// Prony-type method.
pub fn prony_solve(samples: &SampleVector, m: usize) -> Result<CosineSum, OracleError> {
    let n = samples.len();
    if m == 0 || n < 2 * m {
        return Err(OracleError::InvalidInput { n, m });
    }

    // Annihilation equations for every admissible shift, assembled exactly:
    // a sum of two f64 samples is representable as a double-word value.
    let rows = n - m;
    let lead = (2.0f64).powi(1 - m as i32);
    let a: Vec<Vec<TwoFloat>> = (0..rows)
        .map(|r| {
            (0..m)
                .map(|l| {
                    TwoFloat::new_add(
                        samples.value_even(r as i64 + l as i64),
                        samples.value_even(r as i64 - l as i64),
                    )
                })
                .collect()
        })
        .collect();
    let rhs: Vec<TwoFloat> = (0..rows)
        .map(|r| {
            TwoFloat::new_add(
                samples.value_even(r as i64 + m as i64),
                samples.value_even(r as i64 - m as i64),
            ) * (-lead)
        })
        .collect();
    let mut coeffs =
        numerics::dd_qr_solve(a, rhs, RANK_COLLAPSE_TOL).ok_or(OracleError::SingularSystem)?;
    coeffs.push(TwoFloat::from(lead));

    // Colleague eigenvalues of the rounded polynomial seed a Newton polish
    // against the double-word coefficients; rounding alone smears clustered
    // roots past the target accuracy.
    let p = ChebyshevPoly::new(coeffs.iter().map(|c| f64::from(*c)).collect());
    let companion = chebyshev_companion(&p)?;
    let eigs = numerics::eig_dense(&companion)?;
    let h = samples.grid().h();
    let mut phi = Vec::with_capacity(m);
    for eig in eigs {
        if eig.im.abs() > ROOT_IMAG_TOL {
            return Err(OracleError::RootOutsideDomain(eig.to_string()));
        }
        let mut z = TwoFloat::from(eig.re);
        for _ in 0..8 {
            let (value, slope) = dd_clenshaw(&coeffs, z);
            if f64::from(slope.abs()) == 0.0 {
                break;
            }
            let next = z - value / slope;
            if !f64::from(next).is_finite() {
                break;
            }
            z = next;
        }
        let root = f64::from(z);
        if root.abs() > 1.0 + ROOT_DOMAIN_TOL {
            return Err(OracleError::RootOutsideDomain(root.to_string()));
        }
        phi.push(root.clamp(-1.0, 1.0).acos() / h);
    }
    phi.sort_by(f64::total_cmp);

    // Coefficients from the first 2M samples (the closing linear system),
    // solved in double-word arithmetic for the same clustering reasons.
    let grid = samples.grid();
    let v: Vec<Vec<TwoFloat>> = (0..2 * m)
        .map(|k| {
            (0..m)
                .map(|j| (TwoFloat::from(phi[j]) * TwoFloat::from(grid.node(k))).cos())
                .collect()
        })
        .collect();
    let b: Vec<TwoFloat> = (0..2 * m)
        .map(|k| TwoFloat::from(samples.values()[k]))
        .collect();
    let mut gamma: Vec<f64> = numerics::dd_qr_solve(v, b, RANK_COLLAPSE_TOL)
        .ok_or(OracleError::SingularSystem)?
        .iter()
        .map(|g| f64::from(*g))
        .collect();

    polish_on_samples(&mut gamma, &mut phi, samples);
    Ok(CosineSum::new(gamma, phi)?)
}
