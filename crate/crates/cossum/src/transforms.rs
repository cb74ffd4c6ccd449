//! DCT-II of the samples and the node/value pairs driving the rational
//! interpolation stage.
//!
//! Forward transform of `f = (f_0..f_{N-1})`:
//!
//! ```text
//! fhat_k = sum_{l=0}^{N-1} f_l cos(pi k (2l+1) / (2N))
//! ```
//!
//! For a cosine sum sampled on the half-shifted grid, the weighted values
//!
//! ```text
//! g_k = (-1)^k fhat_k / cos(pi k / (2N)),   z_k = cos(pi k / N)
//! ```
//!
//! satisfy `g_k = sum_j a_j / (z_k - b_j)` with `a_j = gamma_j
//! sin(phi_j h/2) sin(phi_j h N)` and `b_j = cos(phi_j h)`: rational data
//! with poles that encode the frequencies.

use crate::model::SampleVector;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// DCT-II coefficients of a sample vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DctVector {
    values: Vec<f64>,
}

impl DctVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Fast DCT-II: reorder the input (even indices ascending, then odd indices
/// descending), take one length-N complex FFT, and rotate each bin by
/// `exp(-i pi k / (2N))`. Valid for every N, including primes.
pub fn dct2(samples: &SampleVector) -> DctVector {
    DctVector {
        values: dct2_of(samples.values()),
    }
}

fn dct2_of(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for m in 0..n.div_ceil(2) {
        buf[m] = Complex::new(f[2 * m], 0.0);
    }
    for m in 0..n / 2 {
        buf[n - 1 - m] = Complex::new(f[2 * m + 1], 0.0);
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    (0..n)
        .map(|k| {
            let rot = Complex::from_polar(1.0, -PI * k as f64 / (2.0 * n as f64));
            (rot * buf[k]).re
        })
        .collect()
}

/// Reference DCT-II by direct summation, O(N^2). Kept as an independent
/// check of the FFT path.
pub fn dct2_direct(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|k| {
            f.iter()
                .enumerate()
                .map(|(l, fl)| fl * (PI * k as f64 * (2 * l + 1) as f64 / (2.0 * n as f64)).cos())
                .sum()
        })
        .collect()
}

/// Transformed data `(z_k, g_k)`: the support nodes and weighted DCT values
/// on which the rational approximation operates.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedData {
    g: Vec<f64>,
    z: Vec<f64>,
}

impl TransformedData {
    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// Builds transformed data from explicit nodes and values. The recovery
    /// pipeline goes through [`g_vector`]; this constructor exists for tests
    /// and synthetic rational data.
    pub fn from_parts(z: Vec<f64>, g: Vec<f64>) -> Self {
        assert_eq!(z.len(), g.len(), "node/value length mismatch");
        Self { g, z }
    }
}

/// Derives `(z_k, g_k)` from DCT-II output. With `half` set, only the first
/// `N/2` entries are kept (used when the data is noisy, where the
/// `1/cos(pi k/(2N))` weight would amplify noise in the upper half); the
/// nodes still use the full length `N` in their formula.
pub fn g_vector(dct: &DctVector, half: bool) -> TransformedData {
    let n = dct.len();
    let count = if half { n / 2 } else { n };
    let g = (0..count)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * dct.values[k] / (PI * k as f64 / (2.0 * n as f64)).cos()
        })
        .collect();
    let z = (0..count).map(|k| (PI * k as f64 / n as f64).cos()).collect();
    TransformedData { g, z }
}
