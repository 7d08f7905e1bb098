//! Univariate orthonormal polynomials and Gaussian quadrature.
//!
//! A family of polynomials orthonormal with respect to a normalized weight is
//! described by its three-term recurrence
//!
//! ```text
//! sqrt(beta[i+1]) p[i+1](t) = (t - alpha[i]) p[i](t) - sqrt(beta[i]) p[i-1](t)
//! ```
//!
//! with `p[-1] = 0`, `p[0] = 1`. The Gauss rule for the weight is read off the
//! eigendecomposition of the Jacobi matrix built from the same coefficients.

mod eigen;
mod stieltjes;

pub use eigen::{symtridiag_eig, TridiagonalEigen};
pub(crate) use stieltjes::discrete_stieltjes;

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

/// Tolerance on `sum(weights) - 1` for normalized rules and measures.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Lower bound accepted for individual weights of a rule. Transformed rules may
/// carry ghost nodes whose weight underflows to slightly negative rounding noise.
pub const WEIGHT_FLOOR: f64 = -1e-14;

/// Three-term recurrence data `(alpha, beta)` of an orthonormal family.
///
/// `beta[0]` is the total mass of the weight, which is 1 for every normalized
/// weight used in this crate. It does not enter the Jacobi matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceCoefficients {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl RecurrenceCoefficients {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(invalid("recurrence needs at least one coefficient"));
        }
        if alpha.len() != beta.len() {
            return Err(invalid(format!(
                "alpha has {} entries but beta has {}",
                alpha.len(),
                beta.len()
            )));
        }
        if alpha.iter().chain(&beta).any(|v| !v.is_finite()) {
            return Err(invalid("recurrence coefficients must be finite"));
        }
        if let Some(i) = beta.iter().position(|&b| b <= 0.0) {
            return Err(invalid(format!("beta[{i}] = {} is not positive", beta[i])));
        }
        Ok(Self { alpha, beta })
    }

    /// Recurrence for the normalized uniform weight `1/2` on `[-1, 1]`.
    pub fn legendre(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("legendre recurrence needs n >= 1"));
        }
        let alpha = vec![0.0; n];
        let beta = (0..n)
            .map(|i| {
                if i == 0 {
                    1.0
                } else {
                    let i2 = (i * i) as f64;
                    i2 / (4.0 * i2 - 1.0)
                }
            })
            .collect();
        Ok(Self { alpha, beta })
    }

    /// Runs the discrete Stieltjes procedure on the measure
    /// `sum_j weights[j] * delta(t - nodes[j])` for the first `n` polynomials.
    ///
    /// Fails with [`Error::Breakdown`] when the measure has fewer than `n`
    /// points of support.
    pub fn from_discrete_measure(nodes: &[f64], weights: &[f64], n: usize) -> Result<Self> {
        discrete_stieltjes(nodes, weights, n).map(|(rc, _)| rc)
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn jacobi_matrix(&self) -> SymmetricTridiagonal {
        SymmetricTridiagonal {
            diag: self.alpha.clone(),
            offdiag: self.beta[1..].iter().map(|b| b.sqrt()).collect(),
        }
    }

    /// Values `[p_0(t), ..., p_{n-1}(t)]` of the orthonormal family.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let n = self.len();
        let mut out = Vec::with_capacity(n);
        let mut prev = 0.0;
        let mut cur = 1.0;
        out.push(cur);
        for i in 0..n - 1 {
            // beta[0] only ever multiplies p_{-1} = 0
            let next =
                ((t - self.alpha[i]) * cur - self.beta[i].sqrt() * prev) / self.beta[i + 1].sqrt();
            prev = cur;
            cur = next;
            out.push(cur);
        }
        out
    }

    pub fn gauss_rule(&self) -> Result<QuadratureRule> {
        golub_welsch(self).map(|(rule, _)| rule)
    }
}

/// Symmetric tridiagonal matrix stored as its diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTridiagonal {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl SymmetricTridiagonal {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(invalid("tridiagonal matrix must be at least 1x1"));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(invalid(format!(
                "{} diagonal entries need {} off-diagonal entries, got {}",
                diag.len(),
                diag.len() - 1,
                offdiag.len()
            )));
        }
        if diag.iter().chain(&offdiag).any(|v| !v.is_finite()) {
            return Err(invalid("tridiagonal entries must be finite"));
        }
        Ok(Self { diag, offdiag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    /// Leading `k x k` block.
    pub fn leading(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.dim() {
            return Err(invalid(format!(
                "leading block {k} out of range 1..={}",
                self.dim()
            )));
        }
        Ok(Self {
            diag: self.diag[..k].to_vec(),
            offdiag: self.offdiag[..k - 1].to_vec(),
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for (i, &e) in self.offdiag.iter().enumerate() {
            m[(i, i + 1)] = e;
            m[(i + 1, i)] = e;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        let d: f64 = self.diag.iter().map(|v| v * v).sum();
        let e: f64 = self.offdiag.iter().map(|v| v * v).sum();
        (d + 2.0 * e).sqrt()
    }

    pub fn eigen(&self) -> Result<TridiagonalEigen> {
        symtridiag_eig(self)
    }

    /// Reads the matrix back as recurrence coefficients (`beta[0] = 1`).
    pub fn to_recurrence(&self) -> Result<RecurrenceCoefficients> {
        let mut beta = Vec::with_capacity(self.dim());
        beta.push(1.0);
        beta.extend(self.offdiag.iter().map(|e| e * e));
        RecurrenceCoefficients::new(self.diag.clone(), beta)
    }
}

/// Nodes and normalized weights of a quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Validates ascending nodes, weights `>= -1e-14` and unit total mass.
    ///
    /// Equal neighbouring nodes are accepted: ghost Ritz values can coincide to
    /// machine precision and are kept as separate nodes.
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(invalid("quadrature rule needs at least one node"));
        }
        if nodes.len() != weights.len() {
            return Err(invalid(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(invalid("quadrature nodes and weights must be finite"));
        }
        if nodes.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("quadrature nodes must be ascending"));
        }
        if let Some(w) = weights.iter().find(|&&w| w < WEIGHT_FLOOR) {
            return Err(invalid(format!("negative quadrature weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(invalid(format!(
                "quadrature weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum_j samples[j] * weights[j]`.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.len() {
            return Err(invalid(format!(
                "{} samples for a {}-point rule",
                samples.len(),
                self.len()
            )));
        }
        Ok(samples.iter().zip(&self.weights).map(|(s, w)| s * w).sum())
    }

    /// Integrates `f` sampled at the nodes.
    pub fn integrate_fn(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, w)| f(t) * w)
            .sum()
    }
}

/// Gauss rule together with the eigenvector matrix `Q` of the Jacobi matrix.
///
/// Column `j` of `Q` equals `p(t_j) / |p(t_j)|`, so `Q(0, j) = sqrt(w_j)`.
pub(crate) fn golub_welsch(rc: &RecurrenceCoefficients) -> Result<(QuadratureRule, DMatrix<f64>)> {
    let eig = symtridiag_eig(&rc.jacobi_matrix())?;
    let weights = eig.vectors.row(0).iter().map(|q| q * q).collect();
    let rule = QuadratureRule::new(eig.values, weights)?;
    Ok((rule, eig.vectors))
}

pub fn legendre_recurrence(n: usize) -> Result<RecurrenceCoefficients> {
    RecurrenceCoefficients::legendre(n)
}

pub fn recurrence_from_discrete_measure(
    nodes: &[f64],
    weights: &[f64],
    n: usize,
) -> Result<RecurrenceCoefficients> {
    RecurrenceCoefficients::from_discrete_measure(nodes, weights, n)
}

pub fn jacobi_matrix(rc: &RecurrenceCoefficients) -> SymmetricTridiagonal {
    rc.jacobi_matrix()
}

pub fn gauss_rule(rc: &RecurrenceCoefficients) -> Result<QuadratureRule> {
    rc.gauss_rule()
}

pub fn eval_orthonormal(rc: &RecurrenceCoefficients, t: f64) -> Vec<f64> {
    rc.eval(t)
}

pub fn integrate(rule: &QuadratureRule, samples: &[f64]) -> Result<f64> {
    rule.integrate(samples)
}
