//! Signal model: sparse cosine sums, equidistant sampling, noise, and error
//! metrics.
//!
//! A signal is `f(t) = sum_j gamma_j * cos(phi_j * t)` with nonzero
//! coefficients and pairwise distinct nonnegative frequencies. Samples are
//! taken at the half-shifted nodes `t_k = h*(2k+1)/2`, `h = pi/K`, for
//! `k = 0..N-1`. Since every `f` is even, samples extend to negative indices
//! by mirroring: `f_{-k-1} = f_k`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use thiserror::Error;

/// Step size of the evaluation grid used by [`relative_errors`].
const ERROR_GRID_STEP: f64 = 0.001;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("gamma and phi must have equal lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("coefficient gamma[{0}] must be nonzero and finite")]
    InvalidGamma(usize),
    #[error("frequency phi[{0}] must be finite and nonnegative")]
    InvalidPhi(usize),
    #[error("frequencies must be pairwise distinct (phi[{0}] == phi[{1}])")]
    DuplicatePhi(usize, usize),
    #[error("sampling grid needs n >= 1 and a positive frequency bound")]
    InvalidGrid,
    #[error("sample count {0} does not match grid size {1}")]
    SampleCountMismatch(usize, usize),
    #[error("noise amplitude must be nonnegative and finite")]
    NegativeAmplitude,
    #[error("clean and noisy vectors must share the same grid")]
    GridMismatch,
    #[error("noise power is zero; SNR is undefined")]
    ZeroNoisePower,
}

/// A sparse sum of cosines `sum_j gamma_j * cos(phi_j * t)`.
///
/// The empty sum is allowed and represents the zero signal.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineSum {
    gamma: Vec<f64>,
    phi: Vec<f64>,
}

impl CosineSum {
    pub fn new(gamma: Vec<f64>, phi: Vec<f64>) -> Result<Self, ModelError> {
        if gamma.len() != phi.len() {
            return Err(ModelError::LengthMismatch(gamma.len(), phi.len()));
        }
        for (j, g) in gamma.iter().enumerate() {
            if !g.is_finite() || *g == 0.0 {
                return Err(ModelError::InvalidGamma(j));
            }
        }
        for (j, p) in phi.iter().enumerate() {
            if !p.is_finite() || *p < 0.0 {
                return Err(ModelError::InvalidPhi(j));
            }
        }
        for i in 0..phi.len() {
            for j in i + 1..phi.len() {
                if phi[i] == phi[j] {
                    return Err(ModelError::DuplicatePhi(i, j));
                }
            }
        }
        Ok(Self { gamma, phi })
    }

    /// Number of terms `M`.
    pub fn terms(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        self.gamma
            .iter()
            .zip(&self.phi)
            .map(|(g, p)| g * (p * t).cos())
            .sum()
    }

    /// The same sum with terms reordered by ascending frequency.
    pub fn sorted_by_phi(&self) -> CosineSum {
        let mut idx: Vec<usize> = (0..self.terms()).collect();
        idx.sort_by(|&a, &b| self.phi[a].total_cmp(&self.phi[b]));
        CosineSum {
            gamma: idx.iter().map(|&i| self.gamma[i]).collect(),
            phi: idx.iter().map(|&i| self.phi[i]).collect(),
        }
    }
}

/// Equidistant sampling grid `t_k = h*(2k+1)/2` with `h = pi / freq_bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingGrid {
    n: usize,
    freq_bound: f64,
}

impl SamplingGrid {
    /// `n` samples for frequencies in `[0, freq_bound)`.
    pub fn new(n: usize, freq_bound: f64) -> Result<Self, ModelError> {
        if n == 0 || !freq_bound.is_finite() || freq_bound <= 0.0 {
            return Err(ModelError::InvalidGrid);
        }
        Ok(Self { n, freq_bound })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Upper frequency bound `K`.
    pub fn freq_bound(&self) -> f64 {
        self.freq_bound
    }

    /// Step size `h = pi / K`.
    pub fn h(&self) -> f64 {
        PI / self.freq_bound
    }

    /// Sampling node `t_k = h*(2k+1)/2`.
    pub fn node(&self, k: usize) -> f64 {
        self.h() * (2 * k + 1) as f64 / 2.0
    }
}

/// Samples of a signal on a [`SamplingGrid`], with the even extension
/// `f_{-k-1} = f_k` available through [`SampleVector::value_even`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleVector {
    grid: SamplingGrid,
    values: Vec<f64>,
}

impl SampleVector {
    pub fn new(grid: SamplingGrid, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != grid.n() {
            return Err(ModelError::SampleCountMismatch(values.len(), grid.n()));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sample value at a possibly negative index via the even extension:
    /// `f_{-k-1} = f_k`. The caller must stay within `[-n, n-1]`.
    pub fn value_even(&self, index: i64) -> f64 {
        let mapped = if index >= 0 { index } else { -index - 1 } as usize;
        self.values[mapped]
    }
}

/// Evaluates `sum` at every node of `grid`.
pub fn sample(sum: &CosineSum, grid: &SamplingGrid) -> SampleVector {
    let values = (0..grid.n()).map(|k| sum.evaluate(grid.node(k))).collect();
    SampleVector {
        grid: *grid,
        values,
    }
}

/// Adds i.i.d. uniform noise from `[-amplitude, amplitude]`; reproducible for
/// a fixed seed.
pub fn add_noise(
    samples: &SampleVector,
    amplitude: f64,
    seed: u64,
) -> Result<SampleVector, ModelError> {
    if !amplitude.is_finite() || amplitude < 0.0 {
        return Err(ModelError::NegativeAmplitude);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = samples
        .values
        .iter()
        .map(|v| {
            let eps: f64 = rng.random_range(-1.0..=1.0) * amplitude;
            v + eps
        })
        .collect();
    Ok(SampleVector {
        grid: samples.grid,
        values,
    })
}

/// Signal-to-noise ratios in dB:
/// `SNR = 10*log10(sum f^2 / sum eps^2)` and
/// `PSNR = 10*log10(n * max f^2 / sum eps^2)`, with `eps = noisy - clean`.
pub fn snr_psnr(clean: &SampleVector, noisy: &SampleVector) -> Result<(f64, f64), ModelError> {
    if clean.grid != noisy.grid {
        return Err(ModelError::GridMismatch);
    }
    let signal: f64 = clean.values.iter().map(|v| v * v).sum();
    let peak = clean.values.iter().fold(0.0f64, |m, v| m.max(v * v));
    let noise: f64 = clean
        .values
        .iter()
        .zip(&noisy.values)
        .map(|(c, n)| (n - c) * (n - c))
        .sum();
    if noise == 0.0 {
        return Err(ModelError::ZeroNoisePower);
    }
    let snr = 10.0 * (signal / noise).log10();
    let psnr = 10.0 * (clean.len() as f64 * peak / noise).log10();
    Ok((snr, psnr))
}

/// Relative reconstruction errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// `max |f - f~| / max |f|` over `[0, interval_end]` with step 0.001.
    pub e_f: f64,
    /// `max_j |phi_j - phi~_j| / max_j |phi_j|` after sorting both frequency
    /// sets ascending; only defined when both sums have the same `M`.
    pub e_phi: Option<f64>,
    /// Coefficient analogue of `e_phi`, paired by the same frequency sort.
    pub e_gamma: Option<f64>,
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Compares an estimate against the ground truth on `[0, interval_end]`.
pub fn relative_errors(truth: &CosineSum, estimate: &CosineSum, interval_end: f64) -> ErrorReport {
    let steps = (interval_end / ERROR_GRID_STEP).floor() as usize;
    let mut max_dev = 0.0f64;
    let mut max_f = 0.0f64;
    for i in 0..=steps {
        let t = i as f64 * ERROR_GRID_STEP;
        let ft = truth.evaluate(t);
        max_dev = max_dev.max((ft - estimate.evaluate(t)).abs());
        max_f = max_f.max(ft.abs());
    }
    let e_f = ratio_or_zero(max_dev, max_f);

    if truth.terms() != estimate.terms() {
        return ErrorReport {
            e_f,
            e_phi: None,
            e_gamma: None,
        };
    }
    let a = truth.sorted_by_phi();
    let b = estimate.sorted_by_phi();
    let phi_scale = a.phi.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let gamma_scale = a.gamma.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let phi_dev = a
        .phi
        .iter()
        .zip(&b.phi)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let gamma_dev = a
        .gamma
        .iter()
        .zip(&b.gamma)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    ErrorReport {
        e_f,
        e_phi: Some(ratio_or_zero(phi_dev, phi_scale)),
        e_gamma: Some(ratio_or_zero(gamma_dev, gamma_scale)),
    }
}

/// The seven-term reference signal used across the test suite:
/// `gamma_j = j`, `phi = (sqrt(20), sqrt(0.2), sqrt(5), sqrt(15), sqrt(3),
/// sqrt(15.1), sqrt(7))`.
pub fn reference_signal() -> CosineSum {
    let phi: Vec<f64> = [20.0, 0.2, 5.0, 15.0, 3.0, 15.1, 7.0]
        .iter()
        .map(|x: &f64| x.sqrt())
        .collect();
    let gamma: Vec<f64> = (1..=7).map(|j| j as f64).collect();
    CosineSum::new(gamma, phi).expect("reference signal parameters are valid")
}
