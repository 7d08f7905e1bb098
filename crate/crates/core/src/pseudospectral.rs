//! Tensor-product Gauss grids and the orthonormal-polynomial transform.
//!
//! Grid nodes are linearized with the last dimension varying fastest, which is
//! the ordering of the Kronecker product `Q_1 ⊗ ... ⊗ Q_d`. Transforms are
//! applied one mode at a time and never form the `m x m` Kronecker matrix.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::orthopoly::{golub_welsch, QuadratureRule, RecurrenceCoefficients};

/// Default cap on the number of grid nodes.
pub const DEFAULT_NODE_CAP: usize = 100_000_000;

/// A closed interval `[lower, upper]` with `lower < upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const REFERENCE: Interval = Interval {
        lower: -1.0,
        upper: 1.0,
    };

    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(invalid(format!("degenerate interval [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }

    fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }

    /// Maps a reference coordinate in `[-1, 1]` into the interval.
    pub fn from_reference(&self, t: f64) -> f64 {
        self.midpoint() + self.half_width() * t
    }

    /// Maps a coordinate in the interval back to `[-1, 1]`.
    pub fn to_reference(&self, x: f64) -> f64 {
        (x - self.midpoint()) / self.half_width()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// One dimension of a tensor grid.
#[derive(Debug, Clone)]
pub struct GridFactor {
    recurrence: RecurrenceCoefficients,
    /// Gauss rule on the reference interval.
    rule: QuadratureRule,
    /// `Q(i, j) = p_i(t_j) sqrt(w_j)`.
    transform: DMatrix<f64>,
    interval: Interval,
}

impl GridFactor {
    pub fn recurrence(&self) -> &RecurrenceCoefficients {
        &self.recurrence
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn transform(&self) -> &DMatrix<f64> {
        &self.transform
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn order(&self) -> usize {
        self.rule.len()
    }
}

/// Tensor product of univariate Gauss rules.
#[derive(Debug, Clone)]
pub struct TensorGrid {
    factors: Vec<GridFactor>,
    strides: Vec<usize>,
    node_count: usize,
}

impl TensorGrid {
    /// Gauss-Legendre grid with `orders[r]` points on `intervals[r]`.
    pub fn gauss_legendre(orders: &[usize], intervals: &[Interval]) -> Result<Self> {
        Self::gauss_legendre_capped(orders, intervals, DEFAULT_NODE_CAP)
    }

    pub fn gauss_legendre_capped(
        orders: &[usize],
        intervals: &[Interval],
        node_cap: usize,
    ) -> Result<Self> {
        if orders.is_empty() {
            return Err(invalid("grid needs at least one dimension"));
        }
        if orders.len() != intervals.len() {
            return Err(invalid(format!(
                "{} orders but {} intervals",
                orders.len(),
                intervals.len()
            )));
        }
        check_node_count(orders, node_cap)?;
        let recurrences = orders
            .iter()
            .map(|&n| RecurrenceCoefficients::legendre(n))
            .collect::<Result<Vec<_>>>()?;
        Self::from_recurrences_capped(recurrences, intervals, node_cap)
    }

    /// Grid from arbitrary recurrences, one per dimension, each describing a
    /// normalized weight on the reference interval `[-1, 1]`.
    pub fn from_recurrences(
        recurrences: Vec<RecurrenceCoefficients>,
        intervals: &[Interval],
    ) -> Result<Self> {
        Self::from_recurrences_capped(recurrences, intervals, DEFAULT_NODE_CAP)
    }

    fn from_recurrences_capped(
        recurrences: Vec<RecurrenceCoefficients>,
        intervals: &[Interval],
        node_cap: usize,
    ) -> Result<Self> {
        if recurrences.is_empty() {
            return Err(invalid("grid needs at least one dimension"));
        }
        if recurrences.len() != intervals.len() {
            return Err(invalid(format!(
                "{} recurrences but {} intervals",
                recurrences.len(),
                intervals.len()
            )));
        }
        let orders: Vec<usize> = recurrences.iter().map(|rc| rc.len()).collect();
        let node_count = check_node_count(&orders, node_cap)?;
        let mut factors = Vec::with_capacity(recurrences.len());
        for (recurrence, &interval) in recurrences.into_iter().zip(intervals) {
            Interval::new(interval.lower, interval.upper)?;
            let (rule, transform) = golub_welsch(&recurrence)?;
            factors.push(GridFactor {
                recurrence,
                rule,
                transform,
                interval,
            });
        }
        let mut strides = vec![1; orders.len()];
        for r in (0..orders.len() - 1).rev() {
            strides[r] = strides[r + 1] * orders[r + 1];
        }
        Ok(Self {
            factors,
            strides,
            node_count,
        })
    }

    pub fn dims(&self) -> usize {
        self.factors.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn orders(&self) -> Vec<usize> {
        self.factors.iter().map(GridFactor::order).collect()
    }

    pub fn factors(&self) -> &[GridFactor] {
        &self.factors
    }

    pub fn multi_index(&self, linear: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.factors)
            .map(|(s, f)| (linear / s) % f.order())
            .collect()
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Coordinates of node `linear` in the physical domain.
    pub fn node(&self, linear: usize) -> Vec<f64> {
        self.multi_index(linear)
            .into_iter()
            .zip(&self.factors)
            .map(|(i, f)| f.interval.from_reference(f.rule.nodes()[i]))
            .collect()
    }

    pub fn weight(&self, linear: usize) -> f64 {
        self.multi_index(linear)
            .into_iter()
            .zip(&self.factors)
            .map(|(i, f)| f.rule.weights()[i])
            .product()
    }

    pub fn flat_nodes(&self) -> Vec<Vec<f64>> {
        (0..self.node_count).map(|i| self.node(i)).collect()
    }

    /// Kronecker product of the univariate weight vectors.
    pub fn flat_weights(&self) -> Vec<f64> {
        let mut out = vec![1.0];
        for f in &self.factors {
            out = out
                .iter()
                .flat_map(|a| f.rule.weights().iter().map(move |w| a * w))
                .collect();
        }
        out
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims()
            && x.iter()
                .zip(&self.factors)
                .all(|(&v, f)| f.interval.contains(v))
    }

    /// Applies `Q W` to node samples.
    pub fn forward(&self, samples: &[f64]) -> Result<Vec<f64>> {
        self.check_len(samples.len(), "samples")?;
        let mut data: Vec<f64> = samples
            .iter()
            .zip(self.flat_weights())
            .map(|(s, w)| s * w.sqrt())
            .collect();
        for (axis, f) in self.factors.iter().enumerate() {
            self.apply_along_axis(&mut data, axis, &f.transform, false);
        }
        Ok(data)
    }

    /// Applies `W^{-1} Q^T` to a coefficient vector.
    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs.len(), "coefficients")?;
        let mut data = coeffs.to_vec();
        for (axis, f) in self.factors.iter().enumerate() {
            self.apply_along_axis(&mut data, axis, &f.transform, true);
        }
        Ok(data
            .iter()
            .zip(self.flat_weights())
            .map(|(c, w)| c / w.sqrt())
            .collect())
    }

    /// Values of the tensor orthonormal basis contracted against `coeffs` at `x`.
    fn contract(&self, coeffs: &[f64], x: &[f64]) -> Result<f64> {
        if x.len() != self.dims() {
            return Err(invalid(format!(
                "point has {} coordinates, grid has {} dimensions",
                x.len(),
                self.dims()
            )));
        }
        let mut data = coeffs.to_vec();
        for (f, &xr) in self.factors.iter().zip(x).rev() {
            let basis = f.recurrence.eval(f.interval.to_reference(xr));
            data = data
                .chunks_exact(basis.len())
                .map(|fiber| fiber.iter().zip(&basis).map(|(c, b)| c * b).sum())
                .collect();
        }
        Ok(data[0])
    }

    fn apply_along_axis(&self, data: &mut [f64], axis: usize, mat: &DMatrix<f64>, transpose: bool) {
        let n = self.factors[axis].order();
        let inner = self.strides[axis];
        let outer = self.node_count / (n * inner);
        let mut fiber = vec![0.0; n];
        for o in 0..outer {
            let base = o * n * inner;
            for i in 0..inner {
                for (j, v) in fiber.iter_mut().enumerate() {
                    *v = data[base + j * inner + i];
                }
                for p in 0..n {
                    let mut acc = 0.0;
                    for (j, v) in fiber.iter().enumerate() {
                        let q = if transpose { mat[(j, p)] } else { mat[(p, j)] };
                        acc += q * v;
                    }
                    data[base + p * inner + i] = acc;
                }
            }
        }
    }

    fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.node_count {
            return Err(invalid(format!(
                "{len} {what} for a grid with {} nodes",
                self.node_count
            )));
        }
        Ok(())
    }
}

fn check_node_count(orders: &[usize], cap: usize) -> Result<usize> {
    if orders.contains(&0) {
        return Err(invalid("every dimension needs at least one node"));
    }
    orders
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .filter(|&m| m <= cap)
        .ok_or_else(|| {
            invalid(format!(
                "grid with orders {orders:?} exceeds the node cap {cap}"
            ))
        })
}

/// Coefficients of a tensor orthonormal-polynomial expansion on a grid.
#[derive(Debug, Clone)]
pub struct SpectralCoefficients {
    coeffs: Vec<f64>,
    grid: Arc<TensorGrid>,
}

/// A surrogate value together with whether the point lay outside the grid box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub value: f64,
    pub extrapolated: bool,
}

impl SpectralCoefficients {
    pub fn new(grid: Arc<TensorGrid>, coeffs: Vec<f64>) -> Result<Self> {
        grid.check_len(coeffs.len(), "coefficients")?;
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("spectral coefficients must be finite"));
        }
        Ok(Self { coeffs, grid })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn grid(&self) -> &Arc<TensorGrid> {
        &self.grid
    }

    /// Evaluates the expansion at `x`. Points outside the grid box are
    /// evaluated anyway; use [`Self::eval_flagged`] to detect them.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.grid.contract(&self.coeffs, x)
    }

    pub fn eval_flagged(&self, x: &[f64]) -> Result<PointValue> {
        Ok(PointValue {
            value: self.eval(x)?,
            extrapolated: !self.grid.contains(x),
        })
    }

    /// Node values of the expansion.
    pub fn to_samples(&self) -> Vec<f64> {
        self.grid
            .inverse(&self.coeffs)
            .expect("coefficient length checked at construction")
    }
}

pub fn build_grid(orders: &[usize], intervals: &[Interval]) -> Result<TensorGrid> {
    TensorGrid::gauss_legendre(orders, intervals)
}

pub fn flat_nodes(grid: &TensorGrid) -> Vec<Vec<f64>> {
    grid.flat_nodes()
}

pub fn flat_weights(grid: &TensorGrid) -> Vec<f64> {
    grid.flat_weights()
}

/// `coeffs = (Q_1 ⊗ ... ⊗ Q_d)(W_1 ⊗ ... ⊗ W_d) samples`.
pub fn dft_forward(grid: &Arc<TensorGrid>, samples: &[f64]) -> Result<SpectralCoefficients> {
    let coeffs = grid.forward(samples)?;
    SpectralCoefficients::new(Arc::clone(grid), coeffs)
}

pub fn dft_inverse(grid: &TensorGrid, coeffs: &[f64]) -> Result<Vec<f64>> {
    grid.inverse(coeffs)
}

pub fn surrogate_eval(coeffs: &SpectralCoefficients, x: &[f64]) -> Result<f64> {
    coeffs.eval(x)
}
