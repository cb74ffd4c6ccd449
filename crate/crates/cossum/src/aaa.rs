//! Greedy barycentric rational interpolation of node/value data.
//!
//! Starting from the single node of largest |g|, each pass moves the worst
//! approximated node from the free set into the support set, recomputes the
//! barycentric weights as the right singular vector belonging to the
//! smallest singular value of the Loewner matrix over (free, support), and
//! stops once every free node is matched within tolerance. On data that is
//! exactly rational of type (M-1, M) the loop reaches that point after M+1
//! passes: the Loewner matrix then has rank M and its kernel vector turns
//! the approximation into an interpolation.

use crate::numerics::{self, DenseMatrix, NumericsError};
use crate::transforms::TransformedData;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AaaError {
    #[error("rational interpolation needs at least two data points, got {0}")]
    TooFewPoints(usize),
    #[error("support budget {jmax} must lie in 1..count/2 for {count} data points")]
    BudgetOutOfRange { jmax: usize, count: usize },
    #[error("linear algebra failed: {0}")]
    Numerics(#[from] NumericsError),
}

/// Diagnostics of one greedy pass: the residual bound that drove the next
/// selection and the full singular spectrum (descending) of the Loewner
/// matrix whose kernel direction supplied the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub max_residual: f64,
    pub singular_values: Vec<f64>,
}

/// Output of [`aaa_interpolate`]: a degree-`degree` barycentric rational
/// interpolant described by support indices into the input data, the values
/// there, and a unit-norm weight vector, plus per-pass diagnostics.
///
/// `support` keeps selection order; `values` and `weights` align with it.
#[derive(Debug, Clone, PartialEq)]
pub struct AaaResult {
    pub support: Vec<usize>,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
}

impl AaaResult {
    /// The interpolant as an evaluable barycentric form, resolving support
    /// indices to their nodes in `data`.
    pub fn rational(&self, data: &TransformedData) -> BarycentricRational {
        BarycentricRational::new(
            self.support.iter().map(|&k| data.z()[k]).collect(),
            self.values.clone(),
            self.weights.clone(),
        )
    }
}

/// A rational function in barycentric form: `r(z) = p(z)/q(z)` with
/// `p(z) = sum w_k g_k / (z - z_k)` and `q(z) = sum w_k / (z - z_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricRational {
    nodes: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl BarycentricRational {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>, weights: Vec<f64>) -> Self {
        assert!(
            !nodes.is_empty() && nodes.len() == values.len() && nodes.len() == weights.len(),
            "barycentric form needs equal-length, nonempty node/value/weight lists"
        );
        Self {
            nodes,
            values,
            weights,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Evaluates the barycentric form. A support node is answered by lookup
/// (the interpolation value is the limit there; the raw quotient would be
/// 0/0).
pub fn barycentric_eval(r: &BarycentricRational, z: f64) -> f64 {
    if let Some(i) = r.nodes.iter().position(|&node| node == z) {
        return r.values[i];
    }
    let mut p = 0.0;
    let mut q = 0.0;
    for ((&node, &value), &weight) in r.nodes.iter().zip(&r.values).zip(&r.weights) {
        let c = weight / (z - node);
        p += c * value;
        q += c;
    }
    p / q
}

/// Loewner matrix `(g_l - g_k) / (z_l - z_k)` with rows indexed by `rows`
/// and columns by `cols` (index lists into `z`/`g`).
pub(crate) fn loewner(z: &[f64], g: &[f64], rows: &[usize], cols: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        let (l, k) = (rows[r], cols[c]);
        (g[l] - g[k]) / (z[l] - z[k])
    })
}

/// Greedy partition driver shared by the interpolation loop here and the
/// support-selection preconditioner of the Loewner pencil solver. Each
/// [`step`](Self::step) moves the free index of largest residual into the
/// support set and refreshes weights and residuals.
pub(crate) struct GreedyState {
    z: Vec<f64>,
    g: Vec<f64>,
    support: Vec<usize>,
    free: Vec<usize>,
    // Aligned with `free`. Seeded with |g| so the first step selects the
    // node of largest data value (the residual against the zero function).
    residuals: Vec<f64>,
    weights: Vec<f64>,
    max_residual: f64,
}

impl GreedyState {
    pub(crate) fn new(data: &TransformedData) -> Self {
        Self {
            z: data.z().to_vec(),
            g: data.g().to_vec(),
            support: Vec::new(),
            free: (0..data.len()).collect(),
            residuals: data.g().iter().map(|v| v.abs()).collect(),
            weights: Vec::new(),
            max_residual: f64::INFINITY,
        }
    }

    /// Largest-residual free position; ties resolve to the smallest index
    /// because `free` stays ascending and the comparison is strict.
    fn pick(&self) -> usize {
        let mut best = 0;
        for (i, r) in self.residuals.iter().enumerate() {
            if *r > self.residuals[best] {
                best = i;
            }
        }
        best
    }

    pub(crate) fn step(&mut self) -> Result<IterationRecord, AaaError> {
        let pick = self.pick();
        self.support.push(self.free.remove(pick));
        self.residuals.remove(pick);

        let l = loewner(&self.z, &self.g, &self.free, &self.support);
        let dec = numerics::svd(&l)?;
        let small = dec.sigma.len() - 1;
        self.weights = dec.v.column(small).iter().copied().collect();
        let norm = self.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        for w in &mut self.weights {
            *w /= norm;
        }

        self.max_residual = 0.0;
        for (i, &l_idx) in self.free.iter().enumerate() {
            let mut p = 0.0;
            let mut q = 0.0;
            for (&k_idx, &w) in self.support.iter().zip(&self.weights) {
                let c = w / (self.z[l_idx] - self.z[k_idx]);
                p += c * self.g[k_idx];
                q += c;
            }
            let mut r = (p / q - self.g[l_idx]).abs();
            if !r.is_finite() {
                r = f64::INFINITY;
            }
            self.residuals[i] = r;
            self.max_residual = self.max_residual.max(r);
        }
        Ok(IterationRecord {
            max_residual: self.max_residual,
            singular_values: dec.sigma,
        })
    }

    pub(crate) fn max_residual(&self) -> f64 {
        self.max_residual
    }

    pub(crate) fn support(&self) -> &[usize] {
        &self.support
    }

    pub(crate) fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Builds a rational interpolant of the data by greedy support selection.
///
/// `tol` bounds the absolute sup-norm residual on the free nodes; callers
/// scale it to their data. `jmax` caps the number of passes (and so the
/// support size) and must stay below `count/2` so the Loewner matrices
/// remain taller than wide. If the budget runs out the best state reached
/// is returned with `converged == false`; callers that size `jmax` to a
/// known degree use exactly that state.
pub fn aaa_interpolate(
    data: &TransformedData,
    tol: f64,
    jmax: usize,
) -> Result<AaaResult, AaaError> {
    let count = data.len();
    if count < 2 {
        return Err(AaaError::TooFewPoints(count));
    }
    if jmax == 0 || 2 * jmax >= count {
        return Err(AaaError::BudgetOutOfRange { jmax, count });
    }

    let mut state = GreedyState::new(data);
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..jmax {
        history.push(state.step()?);
        if state.max_residual() < tol {
            converged = true;
            break;
        }
    }

    let support = state.support().to_vec();
    Ok(AaaResult {
        values: support.iter().map(|&k| data.g()[k]).collect(),
        weights: state.weights().to_vec(),
        degree: support.len() - 1,
        support,
        converged,
        history,
    })
}
