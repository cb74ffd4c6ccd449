//! Recovery through the rational structure of the transformed samples.
//!
//! The weighted spectrum g of a cosine sum is a rational function of type
//! (M-1, M) at the nodes z_k = cos(pi k/N): its poles are cos(phi_j h) and
//! its residues carry the coefficients. Route I interpolates g with the
//! greedy barycentric scheme and reads the poles off an arrowhead
//! eigenproblem; route II uses the same greedy pass only to partition the
//! nodes and extracts the poles from a Loewner matrix pencil. Frequencies
//! lying exactly on the transform grid leave no pole: they surface as
//! spikes of the spectrum over its rational part. Route I reads them off
//! in a post-processing scan, route II picks them up as ordinary pencil
//! eigenvalues.

use crate::aaa::{aaa_interpolate, loewner, AaaError, AaaResult, GreedyState};
use crate::model::{CosineSum, ModelError, SampleVector, SamplingGrid};
use crate::numerics::{self, DenseMatrix, DenseVector, NumericsError};
use crate::transforms::{dct2, g_vector, DctVector, TransformedData};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Support weights below this level mark nodes the interpolant zeroed out
/// of its denominator: the data there is not rational (grid-frequency
/// impulses), so those nodes take no part in the pole or residue systems.
const WEIGHT_DROP_TOL: f64 = 1e-8;
/// Pole eigenvalues are accepted as real when the imaginary part stays
/// below this; larger ones are noise artifacts.
const POLE_IMAG_TOL: f64 = 1e-6;
/// Poles are cosines of the sought frequencies and may overshoot [-1, 1]
/// by at most this much; values inside the band are clamped.
const POLE_DOMAIN_TOL: f64 = 1e-8;
/// Frequencies closer than this fraction of the band are duplicates.
const DUPLICATE_PHI_TOL: f64 = 1e-8;
/// Default grid-frequency detection threshold, as a fraction of the
/// largest spectrum entry.
const GRID_DETECT_FACTOR: f64 = 1e-6;
/// The closed-form residue-to-coefficient division runs only when every
/// denominator `sin(phi h/2) sin(phi h N)` clears this bound; otherwise
/// all coefficients come from one joint least-squares fit on the samples.
const RESIDUE_DEN_TOL: f64 = 1e-8;
/// Data rows this close to a pole are left out of the residue fit; the
/// entry would be an impulse sample, not rational data.
const NEAR_POLE_ROW_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EspiraError {
    #[error("{n} samples cannot resolve {m} cosine terms")]
    InsufficientSamples { n: usize, m: usize },
    #[error("sample data is identically zero; no frequencies to recover")]
    ZeroData,
    #[error("the interpolant is constant ({0} support point(s)); no poles to extract")]
    DegenerateInterpolant(usize),
    #[error("interpolation did not settle within {passes} passes on exact data")]
    NonConvergent { passes: usize },
    #[error("pole pencil produced {found} finite eigenvalues where {expected} poles were expected")]
    PoleCount { found: usize, expected: usize },
    #[error("pole {0} is not a cosine value; data is not an exact cosine sum")]
    SpuriousPole(String),
    #[error("no usable poles survived filtering; data may be pure noise")]
    NoPoles,
    #[error("node partition lists overlap at index {0}")]
    OverlappingPartition(usize),
    #[error("partition index {0} is out of range for {1} data points")]
    IndexOutOfRange(usize, usize),
    #[error(transparent)]
    Interpolation(#[from] AaaError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The rational part of the transformed data, written over its poles:
/// `sum_j residues[j] / (z - poles[j])`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialFraction {
    /// Residues a_j, aligned with `poles`.
    pub residues: Vec<f64>,
    /// Poles b_j = cos(phi_j h), pairwise distinct on pipeline data.
    pub poles: Vec<f64>,
}

impl PartialFraction {
    /// Number of pole terms.
    pub fn terms(&self) -> usize {
        self.poles.len()
    }

    /// Evaluates the partial-fraction sum at `z`.
    pub fn evaluate(&self, z: f64) -> f64 {
        self.residues
            .iter()
            .zip(&self.poles)
            .map(|(a, b)| a / (z - b))
            .sum()
    }
}

/// One frequency sitting exactly on the transform grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridFrequencyEntry {
    /// Spectrum index k in 0..N.
    pub index: usize,
    /// The frequency k pi / (h N).
    pub phi: f64,
    /// Coefficient read off the spike height.
    pub gamma: f64,
}

/// Outcome of the grid-frequency scan: the spikes found and the residual
/// spectrum they were read from.
#[derive(Debug, Clone, Default)]
pub struct GridFrequencyReport {
    pub entries: Vec<GridFrequencyEntry>,
    /// Spectrum minus the rational part's spectrum, full length N.
    pub residual: Vec<f64>,
}

/// Rational-interpolation recovery output plus diagnostics.
#[derive(Debug, Clone)]
pub struct Espira1Recovery {
    pub sum: CosineSum,
    /// Grid-frequency terms found in post-processing (exact mode only;
    /// they are already merged into `sum`).
    pub grid_report: GridFrequencyReport,
    /// Term count after filtering, merging, and the grid scan.
    pub detected_terms: usize,
    /// Dropped poles, merged duplicates, and near-zero weights, for logs.
    pub warnings: Vec<String>,
}

/// Loewner-pencil recovery output plus diagnostics.
#[derive(Debug, Clone)]
pub struct Espira2Recovery {
    pub sum: CosineSum,
    pub detected_terms: usize,
    pub warnings: Vec<String>,
}

/// Splits the interpolant's support by weight into retained (node, weight)
/// pairs and the dropped data indices.
fn split_support(aaa: &AaaResult, z: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut dropped = Vec::new();
    for (&k, &w) in aaa.support.iter().zip(&aaa.weights) {
        if w.abs() < WEIGHT_DROP_TOL {
            dropped.push(k);
        } else {
            nodes.push(z[k]);
            weights.push(w);
        }
    }
    (nodes, weights, dropped)
}

/// Poles of a barycentric rational: finite eigenvalues of the arrowhead
/// pencil `([0 w^T; 1 diag(z)], diag(0, 1, .., 1))`. The pencil carries
/// exactly two infinite eigenvalues; anything but `len - 1` finite ones
/// violates that contract.
fn arrowhead_poles(nodes: &[f64], weights: &[f64]) -> Result<Vec<Complex64>, EspiraError> {
    let m = nodes.len() - 1;
    let size = m + 2;
    let mut e = DenseMatrix::zeros(size, size);
    let mut b = DenseMatrix::zeros(size, size);
    for (i, (&z, &w)) in nodes.iter().zip(weights).enumerate() {
        e[(0, i + 1)] = w;
        e[(i + 1, 0)] = 1.0;
        e[(i + 1, i + 1)] = z;
        b[(i + 1, i + 1)] = 1.0;
    }
    let eigs = numerics::eig_pencil(&e, &b)?;
    if eigs.len() != m {
        return Err(EspiraError::PoleCount {
            found: eigs.len(),
            expected: m,
        });
    }
    Ok(eigs)
}

/// Realizes pencil eigenvalues as cosine-valued poles. Exact mode treats
/// complex or out-of-range eigenvalues as errors; lenient mode drops them
/// with a warning.
fn filter_poles(
    eigs: &[Complex64],
    lenient: bool,
    warnings: &mut Vec<String>,
) -> Result<Vec<f64>, EspiraError> {
    let mut poles = Vec::with_capacity(eigs.len());
    for e in eigs {
        let real_enough = e.im.abs() <= POLE_IMAG_TOL;
        let in_domain = e.re.abs() <= 1.0 + POLE_DOMAIN_TOL;
        if real_enough && in_domain {
            poles.push(e.re.clamp(-1.0, 1.0));
        } else if lenient {
            warnings.push(format!("dropped pole {e} outside the cosine range"));
        } else {
            return Err(EspiraError::SpuriousPole(e.to_string()));
        }
    }
    Ok(poles)
}

/// Least-squares residues of the Cauchy system `sum_j a_j/(z_k - b_j) =
/// g_k` over all data rows except `excluded` and rows sitting on a pole.
/// Columns are equilibrated so a pole close to a node cannot drown out the
/// rest of the fit.
fn cauchy_residues(
    data: &TransformedData,
    poles: &[f64],
    excluded: &[usize],
) -> Result<Vec<f64>, EspiraError> {
    if poles.is_empty() {
        return Ok(Vec::new());
    }
    let z = data.z();
    let g = data.g();
    let rows: Vec<usize> = (0..data.len())
        .filter(|k| !excluded.contains(k))
        .filter(|&k| poles.iter().all(|b| (z[k] - b).abs() > NEAR_POLE_ROW_TOL))
        .collect();
    if rows.len() < poles.len() {
        return Err(EspiraError::InsufficientSamples {
            n: rows.len(),
            m: poles.len(),
        });
    }
    let mut c = DenseMatrix::from_fn(rows.len(), poles.len(), |r, j| 1.0 / (z[rows[r]] - poles[j]));
    let scales: Vec<f64> = (0..poles.len())
        .map(|j| {
            let norm = c.column(j).norm();
            if norm > 0.0 {
                norm
            } else {
                1.0
            }
        })
        .collect();
    for (j, s) in scales.iter().enumerate() {
        c.column_mut(j).scale_mut(1.0 / s);
    }
    let rhs = DenseVector::from_fn(rows.len(), |r, _| g[rows[r]]);
    let solution = numerics::least_squares(&c, &rhs)?;
    Ok(solution.iter().zip(&scales).map(|(x, s)| x / s).collect())
}

/// Sorts (frequency, residue) pairs ascending and merges pairs closer than
/// the duplicate tolerance, summing their residues.
fn merge_close_frequencies(
    pairs: &mut Vec<(f64, f64)>,
    freq_bound: f64,
    warnings: &mut Vec<String>,
) {
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let before = pairs.len();
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(before);
    for (phi, a) in pairs.drain(..) {
        match merged.last_mut() {
            Some(last) if (phi - last.0).abs() < DUPLICATE_PHI_TOL * freq_bound => last.1 += a,
            _ => merged.push((phi, a)),
        }
    }
    if merged.len() < before {
        warnings.push(format!("merged {} duplicate frequencies", before - merged.len()));
    }
    *pairs = merged;
}

/// Extracts the partial-fraction form of a converged interpolant: poles
/// from the arrowhead pencil over the retained support, residues from the
/// Cauchy least-squares system over the data.
///
/// Support nodes whose weight the kernel zeroed out carry unachievable
/// (non-rational) values; they contribute no pole and their rows are left
/// out of the residue fit. If fewer than two support points remain, the
/// rational part is empty.
pub fn partial_fractions(
    aaa: &AaaResult,
    data: &TransformedData,
) -> Result<PartialFraction, EspiraError> {
    if aaa.degree < 1 {
        return Err(EspiraError::DegenerateInterpolant(aaa.support.len()));
    }
    let (nodes, weights, dropped) = split_support(aaa, data.z());
    if nodes.len() < 2 {
        return Ok(PartialFraction::default());
    }
    let eigs = arrowhead_poles(&nodes, &weights)?;
    let mut poles = Vec::with_capacity(eigs.len());
    for e in &eigs {
        if e.im.abs() > POLE_IMAG_TOL {
            return Err(EspiraError::SpuriousPole(e.to_string()));
        }
        poles.push(e.re);
    }
    let residues = cauchy_residues(data, &poles, &dropped)?;
    Ok(PartialFraction { residues, poles })
}

/// Scans the spectrum for grid-frequency spikes: subtracts the rational
/// part's spectrum (the partial fraction carried back through the sign and
/// cosine factors of the transform) and reports every index whose residual
/// exceeds `threshold * N`, with the coefficient read off the spike height
/// (`gamma = 2 r_k / N`, or `r_0 / N` for the constant).
pub fn detect_grid_frequencies(
    dct: &DctVector,
    recovered: &PartialFraction,
    grid: &SamplingGrid,
    threshold: f64,
) -> GridFrequencyReport {
    let n = dct.len();
    let nf = n as f64;
    let mut residual = Vec::with_capacity(n);
    for (k, &fk) in dct.values().iter().enumerate() {
        let zk = (PI * k as f64 / nf).cos();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let rational = sign * (PI * k as f64 / (2.0 * nf)).cos() * recovered.evaluate(zk);
        residual.push(fk - rational);
    }
    let entries = residual
        .iter()
        .enumerate()
        .filter(|(_, r)| r.abs() > threshold * nf)
        .map(|(k, &r)| GridFrequencyEntry {
            index: k,
            phi: k as f64 * PI / (grid.h() * nf),
            gamma: if k == 0 { r / nf } else { 2.0 * r / nf },
        })
        .collect();
    GridFrequencyReport { entries, residual }
}

/// Builds the Loewner pair over a node partition: `L0 = ((g_l - g_k) /
/// (z_l - z_k))` and `L1 = ((g_l z_l - g_k z_k) / (z_l - z_k))`, rows over
/// `free`, columns over `support`. The eigenvalues of the pencil
/// `(L0, L1)` are the poles of the data's rational part.
pub fn build_loewner_pair(
    data: &TransformedData,
    support: &[usize],
    free: &[usize],
) -> Result<(DenseMatrix, DenseMatrix), EspiraError> {
    let count = data.len();
    for &i in support.iter().chain(free) {
        if i >= count {
            return Err(EspiraError::IndexOutOfRange(i, count));
        }
    }
    if let Some(&dup) = support.iter().find(|i| free.contains(i)) {
        return Err(EspiraError::OverlappingPartition(dup));
    }
    let z = data.z();
    let g = data.g();
    let l0 = loewner(z, g, free, support);
    let l1 = DenseMatrix::from_fn(free.len(), support.len(), |r, c| {
        let (l, k) = (free[r], support[c]);
        (g[l] * z[l] - g[k] * z[k]) / (z[l] - z[k])
    });
    Ok((l0, l1))
}

/// Coefficients from residues by the closed form `gamma_j = a_j /
/// (sin(phi_j h/2) sin(phi_j h N))`. When any denominator is too small to
/// divide by (grid frequencies make it vanish), all coefficients come from
/// [`gamma_from_samples`] instead; the two routes agree on exact data.
pub fn gamma_from_residues(
    residues: &[f64],
    phi: &[f64],
    grid: &SamplingGrid,
    samples: &SampleVector,
) -> Result<Vec<f64>, EspiraError> {
    assert_eq!(residues.len(), phi.len(), "one residue per frequency");
    let h = grid.h();
    let length = samples.len() as f64;
    let dens: Vec<f64> = phi
        .iter()
        .map(|p| (p * h / 2.0).sin() * (p * h * length).sin())
        .collect();
    if dens.iter().all(|d| d.abs() > RESIDUE_DEN_TOL) {
        return Ok(residues.iter().zip(&dens).map(|(a, d)| a / d).collect());
    }
    gamma_from_samples(phi, grid, samples)
}

/// Coefficients for known frequencies by least squares over the
/// full-length system `sum_j gamma_j cos(phi_j t_k) = f_k`.
pub fn gamma_from_samples(
    phi: &[f64],
    grid: &SamplingGrid,
    samples: &SampleVector,
) -> Result<Vec<f64>, EspiraError> {
    if phi.is_empty() {
        return Ok(Vec::new());
    }
    let n = samples.len();
    let v = DenseMatrix::from_fn(n, phi.len(), |k, j| (phi[j] * grid.node(k)).cos());
    let b = DenseVector::from_fn(n, |k, _| samples.values()[k]);
    Ok(numerics::least_squares(&v, &b)?.iter().copied().collect())
}

/// Recovers a cosine sum by rational interpolation of the transformed
/// samples. Exact mode (no `fixed_m`) interpolates to `tol` (scaled by the
/// data's magnitude), errors on non-convergence or non-cosine poles, and
/// finishes with the grid-frequency scan; noisy mode trusts `fixed_m`,
/// works on the lower half of the spectrum where the transform does not
/// amplify the noise, runs the interpolation budget to the end, and drops
/// artifacts with a warning.
pub fn espira1_recover(
    samples: &SampleVector,
    tol: f64,
    fixed_m: Option<usize>,
) -> Result<Espira1Recovery, EspiraError> {
    let n = samples.len();
    let noisy = fixed_m.is_some();
    let dct = dct2(samples);
    let data = g_vector(&dct, noisy);
    let count = data.len();
    let jmax = match fixed_m {
        Some(m) => {
            if m < 1 || 2 * (m + 1) >= count {
                return Err(EspiraError::InsufficientSamples { n, m: m.max(1) });
            }
            m + 1
        }
        None => {
            if count < 6 {
                return Err(EspiraError::InsufficientSamples { n, m: 1 });
            }
            count / 2 - 1
        }
    };
    let scale = data.g().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return Err(EspiraError::ZeroData);
    }

    // Noisy runs use the whole budget: a zero tolerance never converges, so
    // the support grows to exactly fixed_m + 1 points.
    let abs_tol = if noisy { 0.0 } else { tol * scale };
    let aaa = aaa_interpolate(&data, abs_tol, jmax)?;
    if !noisy && !aaa.converged {
        return Err(EspiraError::NonConvergent {
            passes: aaa.history.len(),
        });
    }

    let mut warnings = Vec::new();
    let (nodes, weights, dropped) = split_support(&aaa, data.z());
    if !dropped.is_empty() && aaa.converged {
        warnings.push(format!(
            "{} support weight(s) below {WEIGHT_DROP_TOL:e}; the data likely contains frequencies on the transform grid",
            dropped.len()
        ));
    }

    let grid = samples.grid();
    let pf = if noisy {
        if nodes.len() < 2 {
            return Err(EspiraError::NoPoles);
        }
        let eigs = arrowhead_poles(&nodes, &weights)?;
        let poles = filter_poles(&eigs, true, &mut warnings)?;
        if poles.is_empty() {
            return Err(EspiraError::NoPoles);
        }
        let residues = cauchy_residues(&data, &poles, &dropped)?;
        PartialFraction { residues, poles }
    } else {
        let raw = partial_fractions(&aaa, &data)?;
        let eigs: Vec<Complex64> = raw.poles.iter().map(|&b| Complex64::new(b, 0.0)).collect();
        let poles = filter_poles(&eigs, false, &mut warnings)?;
        PartialFraction {
            residues: raw.residues,
            poles,
        }
    };

    let mut pairs: Vec<(f64, f64)> = pf
        .poles
        .iter()
        .zip(&pf.residues)
        .map(|(&b, &a)| (b.acos() / grid.h(), a))
        .collect();
    merge_close_frequencies(&mut pairs, grid.freq_bound(), &mut warnings);
    let (mut phi, residues): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let mut gamma = gamma_from_residues(&residues, &phi, grid, samples)?;

    let grid_report = if noisy {
        GridFrequencyReport::default()
    } else {
        let fhat_max = dct.values().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let report = detect_grid_frequencies(&dct, &pf, grid, GRID_DETECT_FACTOR * fhat_max);
        for entry in &report.entries {
            let near = phi
                .iter()
                .position(|p| (p - entry.phi).abs() < DUPLICATE_PHI_TOL * grid.freq_bound());
            match near {
                Some(i) => {
                    warnings.push(format!(
                        "grid frequency at index {} overrides a coinciding rational term",
                        entry.index
                    ));
                    phi[i] = entry.phi;
                    gamma[i] = entry.gamma;
                }
                None => {
                    phi.push(entry.phi);
                    gamma.push(entry.gamma);
                }
            }
        }
        report
    };

    let mut terms: Vec<(f64, f64)> = phi.into_iter().zip(gamma).collect();
    terms.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (phi, gamma): (Vec<f64>, Vec<f64>) = terms.into_iter().unzip();
    let detected_terms = phi.len();
    let sum = CosineSum::new(gamma, phi)?;
    Ok(Espira1Recovery {
        sum,
        grid_report,
        detected_terms,
        warnings,
    })
}

/// Recovers a cosine sum through the Loewner matrix pencil. The greedy
/// interpolation pass serves only as a preconditioner that picks the
/// column nodes: exact mode grows the support until the current Loewner
/// matrix becomes rank-deficient (`sigma_j < tol * sigma_1`), noisy mode
/// runs `fixed_m + 1` passes; either way the last pick returns to the row
/// side. The poles then come from the SVD of the joined `[L0 L1]` matrix,
/// and grid frequencies need no special handling: they are ordinary pencil
/// eigenvalues here.
pub fn espira2_recover(
    samples: &SampleVector,
    tol: f64,
    fixed_m: Option<usize>,
) -> Result<Espira2Recovery, EspiraError> {
    let n = samples.len();
    let noisy = fixed_m.is_some();
    let dct = dct2(samples);
    let data = g_vector(&dct, noisy);
    let count = data.len();
    let scale = data.g().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return Err(EspiraError::ZeroData);
    }

    let mut warnings = Vec::new();
    let mut state = GreedyState::new(&data);
    let m = match fixed_m {
        Some(m) => {
            if m < 1 || 2 * (m + 1) >= count {
                return Err(EspiraError::InsufficientSamples { n, m: m.max(1) });
            }
            for _ in 0..=m {
                state.step()?;
            }
            m
        }
        None => {
            if count < 6 {
                return Err(EspiraError::InsufficientSamples { n, m: 1 });
            }
            let jmax = count / 2 - 1;
            let mut detected = None;
            for j in 1..=jmax {
                let record = state.step()?;
                let sigma = &record.singular_values;
                if sigma[sigma.len() - 1] < tol * sigma[0] {
                    detected = Some(j - 1);
                    break;
                }
            }
            match detected {
                Some(0) => return Err(EspiraError::ZeroData),
                Some(m) => m,
                None => return Err(EspiraError::NonConvergent { passes: jmax }),
            }
        }
    };

    let support = state.support()[..m].to_vec();
    let free: Vec<usize> = (0..count).filter(|k| !support.contains(k)).collect();
    let (l0, l1) = build_loewner_pair(&data, &support, &free)?;
    let joined = DenseMatrix::from_fn(free.len(), 2 * m, |r, c| {
        if c < m {
            l0[(r, c)]
        } else {
            l1[(r, c - m)]
        }
    });

    // The pencil z L0 - L1 collapses onto the leading right singular block
    // of the joined matrix: with V = [T; B] over the L0 and L1 column
    // halves, the poles are the eigenvalues of pinv(T) B.
    let dec = numerics::svd(&joined)?;
    let leading = dec.v.columns(0, m).into_owned();
    let top = leading.rows(0, m).into_owned();
    let bottom = leading.rows(m, m).into_owned();
    let pencil = numerics::least_squares_mat(&top, &bottom)?;
    let eigs = numerics::eig_dense(&pencil)?;
    let poles = filter_poles(&eigs, noisy, &mut warnings)?;
    if poles.is_empty() {
        return Err(EspiraError::NoPoles);
    }

    let grid = samples.grid();
    let residues = cauchy_residues(&data, &poles, &[])?;
    let mut pairs: Vec<(f64, f64)> = poles
        .iter()
        .zip(&residues)
        .map(|(&b, &a)| (b.acos() / grid.h(), a))
        .collect();
    merge_close_frequencies(&mut pairs, grid.freq_bound(), &mut warnings);
    let (phi, residues): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let gamma = gamma_from_residues(&residues, &phi, grid, samples)?;
    let detected_terms = phi.len();
    let sum = CosineSum::new(gamma, phi)?;
    Ok(Espira2Recovery {
        sum,
        detected_terms,
        warnings,
    })
}
