//! Lanczos iteration on the diagonal matrix of inner-function samples.
//!
//! Starting from `v0 = sqrt(w)` (square roots of the grid weights), plain
//! Lanczos on `A = diag(f_0, ..., f_{m-1})` is the discrete Stieltjes procedure
//! for the measure `sum_j w_j delta(t - f_j)`. Its Jacobi matrix `T` gives a
//! Gauss rule on the range of `f`, and `V = W U` holds the orthonormal
//! polynomials of that measure evaluated at the samples.
//!
//! No reorthogonalization is done on the main path: the drift of `V^T V` away
//! from the identity is the stopping signal.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::orthopoly::{
    discrete_stieltjes, symtridiag_eig, QuadratureRule, RecurrenceCoefficients,
    SymmetricTridiagonal,
};
use crate::pseudospectral::TensorGrid;

/// Default stopping tolerance on `log10 |I - V^T V|_F`.
pub const DEFAULT_TOL: f64 = -14.0;

/// Floor applied to the Frobenius norm before taking the logarithm.
pub const TAU_NORM_FLOOR: f64 = 1e-300;

/// Relative size of `eta` (against `max |f_i|`) treated as exact breakdown.
pub const BREAKDOWN_REL: f64 = 1e-14;

const UNIT_NORM_TOL: f64 = 1e-12;

/// `A = diag(values)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOperator {
    values: Vec<f64>,
}

impl DiagonalOperator {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("diagonal operator needs at least one entry"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "diagonal entry {i} is not finite: {}",
                values[i]
            )));
        }
        Ok(Self { values })
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

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Smallest and largest entry.
    pub fn hull(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// `[sqrt(w_0), ..., sqrt(w_{m-1})]` in the grid's flat ordering.
pub fn starting_vector(grid: &TensorGrid) -> Vec<f64> {
    grid.flat_weights().iter().map(|w| w.sqrt()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// `tau` exceeded the tolerance.
    TolReached,
    /// The next Lanczos vector vanished: the Krylov space is exhausted.
    Breakdown,
    MaxIterations,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::TolReached => "tol_reached",
            StopReason::Breakdown => "breakdown",
            StopReason::MaxIterations => "max_iterations",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Stop once `tau > tol`.
    pub tol: f64,
    /// Iteration cap; `None` means `m`.
    pub k_max: Option<usize>,
    /// Full reorthogonalization (two Gram-Schmidt passes). Only meant for
    /// reference computations; it suppresses the stopping signal.
    pub reorthogonalize: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            k_max: None,
            reorthogonalize: false,
        }
    }
}

/// Running `|I - G|_F^2` for the Gram matrix `G` of a growing set of columns.
#[derive(Debug, Default, Clone)]
struct GramTracker {
    columns: Vec<Vec<f64>>,
    sum_sq: f64,
}

impl GramTracker {
    fn push(&mut self, v: Vec<f64>) -> f64 {
        let diag = dot(&v, &v);
        let mut off = 0.0;
        for c in &self.columns {
            let g = dot(c, &v);
            off += g * g;
        }
        self.sum_sq += (1.0 - diag).powi(2) + 2.0 * off;
        self.columns.push(v);
        self.tau()
    }

    fn tau(&self) -> f64 {
        self.sum_sq.sqrt().max(TAU_NORM_FLOOR).log10()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `tau = log10 |I - V^T V|_F`, with the norm floored at `1e-300`.
pub fn orthogonality_tau(v: &DMatrix<f64>) -> f64 {
    let mut tracker = GramTracker::default();
    let mut tau = TAU_NORM_FLOOR.log10();
    for col in v.column_iter() {
        tau = tracker.push(col.iter().copied().collect());
    }
    tau
}

/// Result of a Lanczos run: `A V = V T + r e_k^T`.
#[derive(Debug, Clone)]
pub struct LanczosState {
    vectors: DMatrix<f64>,
    tridiagonal: SymmetricTridiagonal,
    tau_history: Vec<f64>,
    stop_reason: StopReason,
    /// `r = eta_k v_k`, the unnormalized next Lanczos vector.
    remainder: Vec<f64>,
}

impl LanczosState {
    /// Number of iterations `k`.
    pub fn k(&self) -> usize {
        self.tau_history.len()
    }

    /// The `m x k` matrix `V` of Lanczos vectors.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn tridiagonal(&self) -> &SymmetricTridiagonal {
        &self.tridiagonal
    }

    /// `tau` after each iteration; entry `i` covers columns `0..=i`.
    pub fn tau_history(&self) -> &[f64] {
        &self.tau_history
    }

    pub fn tau(&self) -> f64 {
        *self.tau_history.last().expect("at least one iteration")
    }

    pub fn stop_reason(&self) -> StopReason {
        self.stop_reason
    }

    pub fn remainder(&self) -> &[f64] {
        &self.remainder
    }

    /// First iteration count at which `tau > tol`, if any.
    pub fn first_crossing(&self, tol: f64) -> Option<usize> {
        self.tau_history
            .iter()
            .position(|&t| t > tol)
            .map(|i| i + 1)
    }

    /// `|A V - V T - r e_k^T|_F`.
    pub fn recurrence_residual(&self, a: &DiagonalOperator) -> f64 {
        let k = self.k();
        let av = DMatrix::from_fn(self.vectors.nrows(), k, |j, i| {
            a.values[j] * self.vectors[(j, i)]
        });
        let mut res = av - &self.vectors * self.tridiagonal.to_dense();
        for (j, r) in self.remainder.iter().enumerate() {
            res[(j, k - 1)] -= r;
        }
        res.norm()
    }

    /// The state after the first `k` iterations of the same run.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        let total = self.k();
        if k == 0 || k > total {
            return Err(invalid(format!(
                "cannot truncate {total} iterations to {k}"
            )));
        }
        if k == total {
            return Ok(self.clone());
        }
        let eta = self.tridiagonal.offdiag()[k - 1];
        Ok(Self {
            vectors: self.vectors.columns(0, k).into_owned(),
            tridiagonal: self.tridiagonal.leading(k)?,
            tau_history: self.tau_history[..k].to_vec(),
            stop_reason: StopReason::MaxIterations,
            remainder: self.vectors.column(k).iter().map(|v| eta * v).collect(),
        })
    }
}

/// Lanczos iteration on `A` from the unit vector `v0`.
///
/// After appending each vector the loss of orthogonality `tau` is recorded.
/// The run stops on breakdown (`eta <= 1e-14 max|f_i|`), on the first
/// `tau > tol`, or after `k_max` iterations, whichever comes first. The vector
/// that pushed `tau` over the tolerance is kept, so `k` counts it.
pub fn lanczos_run(
    a: &DiagonalOperator,
    v0: &[f64],
    options: LanczosOptions,
) -> Result<LanczosState> {
    let m = a.len();
    if v0.len() != m {
        return Err(invalid(format!(
            "starting vector has {} entries, operator has {m}",
            v0.len()
        )));
    }
    if v0.iter().any(|v| !v.is_finite()) {
        return Err(invalid("starting vector must be finite"));
    }
    let norm = dot(v0, v0).sqrt();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(invalid(format!(
            "starting vector has norm {norm}, expected 1"
        )));
    }
    let k_max = options.k_max.unwrap_or(m);
    if k_max == 0 || k_max > m {
        return Err(invalid(format!("k_max = {k_max} outside 1..={m}")));
    }
    let threshold = BREAKDOWN_REL * a.max_abs();

    let mut gram = GramTracker::default();
    let mut tau_history = Vec::new();
    let mut alpha = Vec::new();
    let mut eta = Vec::new();
    let mut v = v0.to_vec();
    let mut v_prev = vec![0.0; m];
    let mut eta_prev = 0.0;

    loop {
        tau_history.push(gram.push(v.clone()));

        let mut w: Vec<f64> = a
            .values
            .iter()
            .zip(&v)
            .zip(&v_prev)
            .map(|((f, x), p)| f * x - eta_prev * p)
            .collect();
        let a_i = dot(&w, &v);
        for (wj, vj) in w.iter_mut().zip(&v) {
            *wj -= a_i * vj;
        }
        if options.reorthogonalize {
            for _ in 0..2 {
                for c in &gram.columns {
                    let proj = dot(c, &w);
                    for (wj, cj) in w.iter_mut().zip(c) {
                        *wj -= proj * cj;
                    }
                }
            }
        }
        alpha.push(a_i);
        let eta_next = dot(&w, &w).sqrt();
        let k = alpha.len();

        let stop = if eta_next <= threshold {
            Some(StopReason::Breakdown)
        } else if *tau_history.last().unwrap() > options.tol {
            Some(StopReason::TolReached)
        } else if k == k_max {
            Some(StopReason::MaxIterations)
        } else {
            None
        };
        if let Some(stop_reason) = stop {
            let vectors = DMatrix::from_fn(m, k, |j, i| gram.columns[i][j]);
            return Ok(LanczosState {
                vectors,
                tridiagonal: SymmetricTridiagonal::new(alpha, eta)?,
                tau_history,
                stop_reason,
                remainder: w,
            });
        }

        eta.push(eta_next);
        v_prev = v;
        v = w.iter().map(|x| x / eta_next).collect();
        eta_prev = eta_next;
    }
}

/// Gauss rule of the transformed measure together with the transform `Q_f W_f`.
#[derive(Debug, Clone)]
pub struct TransformedRule {
    rule: QuadratureRule,
    qf: DMatrix<f64>,
    wf: Vec<f64>,
}

impl TransformedRule {
    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Ritz values `theta_j`, ascending.
    pub fn nodes(&self) -> &[f64] {
        self.rule.nodes()
    }

    /// Weights `mu_j = Q_f(0, j)^2`.
    pub fn weights(&self) -> &[f64] {
        self.rule.weights()
    }

    /// Eigenvectors of `T`, one column per Ritz value. After pruning only the
    /// kept columns remain.
    pub fn qf(&self) -> &DMatrix<f64> {
        &self.qf
    }

    /// `sqrt(mu_j)` of the unpruned rule.
    pub fn wf(&self) -> &[f64] {
        &self.wf
    }

    pub fn len(&self) -> usize {
        self.rule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.is_empty()
    }

    /// Pseudospectral coefficients `Q_f (W_f g)` from outer-function values at
    /// the Ritz values.
    pub fn coefficients(&self, g_values: &[f64]) -> Result<Vec<f64>> {
        if g_values.len() != self.len() {
            return Err(invalid(format!(
                "{} values for a {}-point transformed rule",
                g_values.len(),
                self.len()
            )));
        }
        let scaled: Vec<f64> = g_values.iter().zip(&self.wf).map(|(g, w)| g * w).collect();
        Ok((0..self.qf.nrows())
            .map(|i| (0..self.len()).map(|j| self.qf[(i, j)] * scaled[j]).sum())
            .collect())
    }

    /// Drops nodes with weight below `ghost_tol`. Returns `None` when nothing
    /// is dropped.
    ///
    /// The reported rule is renormalized over the kept nodes, while `Q_f` and
    /// `W_f` keep their original entries for those nodes. The coefficients
    /// from the pruned rule therefore differ from the full ones only by the
    /// dropped terms, each scaled by `sqrt(mu_j) < sqrt(ghost_tol)`.
    pub fn prune(&self, ghost_tol: f64) -> Result<Option<PrunedRule>> {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&j| self.weights()[j] >= ghost_tol)
            .collect();
        if keep.len() == self.len() {
            return Ok(None);
        }
        if keep.is_empty() {
            return Err(invalid(format!(
                "ghost tolerance {ghost_tol} drops every node"
            )));
        }
        let dropped = (0..self.len())
            .filter(|j| !keep.contains(j))
            .map(|j| (self.nodes()[j], self.weights()[j]))
            .collect();
        let mass: f64 = keep.iter().map(|&j| self.weights()[j]).sum();
        let rule = QuadratureRule::new(
            keep.iter().map(|&j| self.nodes()[j]).collect(),
            keep.iter().map(|&j| self.weights()[j] / mass).collect(),
        )?;
        Ok(Some(PrunedRule {
            transform: TransformedRule {
                rule,
                qf: self.qf.select_columns(&keep),
                wf: keep.iter().map(|&j| self.wf[j]).collect(),
            },
            dropped,
        }))
    }
}

/// A transformed rule with ghost nodes removed.
#[derive(Debug, Clone)]
pub struct PrunedRule {
    pub transform: TransformedRule,
    /// `(theta, mu)` of every removed node.
    pub dropped: Vec<(f64, f64)>,
}

/// Eigendecomposition `T = Q_f diag(theta) Q_f^T` read as a Gauss rule.
pub fn transformed_rule(t: &SymmetricTridiagonal) -> Result<TransformedRule> {
    let eig = symtridiag_eig(t)?;
    let wf: Vec<f64> = eig.vectors.row(0).iter().map(|q| q.abs()).collect();
    let weights = eig.vectors.row(0).iter().map(|q| q * q).collect();
    Ok(TransformedRule {
        rule: QuadratureRule::new(eig.values, weights)?,
        qf: eig.vectors,
        wf,
    })
}

/// `U = W^{-1} V`, so `U[(j, i)] = phi_i(f_j)`.
pub fn poly_matrix(state: &LanczosState, grid: &TensorGrid) -> Result<DMatrix<f64>> {
    let v = state.vectors();
    if v.nrows() != grid.node_count() {
        return Err(invalid(format!(
            "Lanczos vectors have {} rows, grid has {} nodes",
            v.nrows(),
            grid.node_count()
        )));
    }
    let sqrt_w = starting_vector(grid);
    if sqrt_w.contains(&0.0) {
        return Err(Error::NumericalFailure("grid has a zero weight".into()));
    }
    Ok(DMatrix::from_fn(v.nrows(), v.ncols(), |j, i| {
        v[(j, i)] / sqrt_w[j]
    }))
}

/// Direct discrete Stieltjes procedure on the samples `f_values` with
/// `weights`, returning the recurrence and `U[(j, i)] = phi_i(f_j)`.
///
/// This is the reference the Lanczos path is checked against.
pub fn stieltjes_oracle(
    f_values: &[f64],
    weights: &[f64],
    k: usize,
) -> Result<(RecurrenceCoefficients, DMatrix<f64>)> {
    discrete_stieltjes(f_values, weights, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudospectral::{build_grid, Interval};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(orders: &[usize]) -> TensorGrid {
        build_grid(orders, &vec![Interval::REFERENCE; orders.len()]).unwrap()
    }

    fn run(values: Vec<f64>, v0: &[f64], options: LanczosOptions) -> LanczosState {
        lanczos_run(&DiagonalOperator::new(values).unwrap(), v0, options).unwrap()
    }

    #[test]
    fn starting_vector_examples() {
        assert_eq!(starting_vector(&grid(&[1])), vec![1.0]);
        for v in starting_vector(&grid(&[2, 2])) {
            assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);
        }
        let v = starting_vector(&grid(&[5, 3, 2]));
        assert_abs_diff_eq!(dot(&v, &v), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn operator_validation() {
        assert!(DiagonalOperator::new(vec![]).is_err());
        assert!(DiagonalOperator::new(vec![1.0, f64::INFINITY]).is_err());
        let a = DiagonalOperator::new(vec![3.0, -4.0]).unwrap();
        assert_eq!(a.max_abs(), 4.0);
        assert_eq!(a.hull(), (-4.0, 3.0));
    }

    #[test]
    fn constant_operator_breaks_down_immediately() {
        let g = grid(&[3, 3]);
        let state = run(
            vec![2.5; 9],
            &starting_vector(&g),
            LanczosOptions::default(),
        );
        assert_eq!(state.k(), 1);
        assert_eq!(state.stop_reason(), StopReason::Breakdown);
        assert_abs_diff_eq!(state.tridiagonal().diag()[0], 2.5, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = DiagonalOperator::new(vec![1.0, 2.0]).unwrap();
        let opts = LanczosOptions::default();
        assert!(matches!(
            lanczos_run(&a, &[1.0, 1.0], opts),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            lanczos_run(&a, &[1.0], opts),
            Err(Error::InvalidArgument(_))
        ));
        let too_many = LanczosOptions {
            k_max: Some(3),
            ..opts
        };
        assert!(matches!(
            lanczos_run(&a, &[1.0, 0.0], too_many),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn full_krylov_space_recovers_spectrum() {
        let values = vec![-2.0, 0.5, 1.0, 3.0, 4.5, 7.0];
        let v0 = vec![1.0 / 6.0_f64.sqrt(); 6];
        let state = run(
            values.clone(),
            &v0,
            LanczosOptions {
                tol: f64::INFINITY,
                k_max: None,
                reorthogonalize: true,
            },
        );
        assert_eq!(state.k(), 6);
        let eig = state.tridiagonal().eigen().unwrap();
        for (a, b) in eig.values.iter().zip(&values) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
        }
    }

    #[test]
    fn tau_examples() {
        let single = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert!(orthogonality_tau(&single) <= -150.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let pair = DMatrix::from_column_slice(2, 2, &[h, h, h, -h]);
        assert!(orthogonality_tau(&pair) <= -15.0);
        let twins = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(
            orthogonality_tau(&twins),
            2.0_f64.sqrt().log10(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            orthogonality_tau(&twins),
            0.150_514_997_831_990_6,
            epsilon = 1e-15
        );
    }

    #[test]
    fn state_tau_matches_direct_formula() {
        let g = grid(&[7, 7]);
        let f: Vec<f64> = g
            .flat_nodes()
            .iter()
            .map(|x| (x[0] + 2.0 * x[1]).exp())
            .collect();
        let state = run(
            f,
            &starting_vector(&g),
            LanczosOptions {
                tol: f64::INFINITY,
                ..Default::default()
            },
        );
        for k in 1..=state.k() {
            let direct = orthogonality_tau(&state.vectors().columns(0, k).into_owned());
            assert_eq!(direct, state.tau_history()[k - 1]);
        }
    }

    #[test]
    fn two_point_transformed_rule() {
        let (a, b) = (-1.5, 4.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let state = run(vec![a, b], &[h, h], LanczosOptions::default());
        let rule = transformed_rule(state.tridiagonal()).unwrap();
        assert_abs_diff_eq!(rule.nodes()[0], a, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.nodes()[1], b, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights()[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights()[1], 0.5, epsilon = 1e-14);

        let t = SymmetricTridiagonal::new(vec![3.25], vec![]).unwrap();
        let one = transformed_rule(&t).unwrap();
        assert_eq!(one.nodes(), &[3.25]);
        assert_eq!(one.weights(), &[1.0]);
    }

    #[test]
    fn lanczos_matches_stieltjes_and_poly_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = grid(&[9, 9]);
        let coeffs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f: Vec<f64> = g
            .flat_nodes()
            .iter()
            .map(|x| {
                coeffs[0]
                    + coeffs[1] * x[0]
                    + coeffs[2] * x[1] * x[1]
                    + coeffs[3] * (x[0] * x[1]).sin()
            })
            .collect();
        let state = run(f.clone(), &starting_vector(&g), LanczosOptions::default());
        assert_eq!(state.stop_reason(), StopReason::TolReached);
        let k = state.k() - 1;
        let (rc, u_ref) = stieltjes_oracle(&f, &g.flat_weights(), k).unwrap();
        let t = state.tridiagonal();
        for i in 0..k {
            assert_abs_diff_eq!(t.diag()[i], rc.alpha()[i], epsilon = 1e-10);
        }
        for i in 0..k - 1 {
            assert_abs_diff_eq!(t.offdiag()[i], rc.beta()[i + 1].sqrt(), epsilon = 1e-10);
        }
        let u = poly_matrix(&state, &g).unwrap();
        for j in 0..f.len() {
            assert_abs_diff_eq!(u[(j, 0)], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(
                u[(j, 1)],
                (f[j] - t.diag()[0]) / t.offdiag()[0],
                epsilon = 1e-10
            );
            for i in 0..k {
                assert_abs_diff_eq!(u[(j, i)], u_ref[(j, i)], epsilon = 1e-8);
            }
        }
        // discrete orthonormality of phi_i under the grid measure
        let w = g.flat_weights();
        let uk = u.columns(0, k);
        let gram = DMatrix::from_fn(k, k, |a, b| {
            (0..f.len()).map(|j| uk[(j, a)] * uk[(j, b)] * w[j]).sum()
        });
        assert!((gram - DMatrix::<f64>::identity(k, k)).norm() <= 1e-10);
    }

    #[test]
    fn recurrence_residual_and_unit_columns() {
        let g = grid(&[9, 9]);
        let a = DiagonalOperator::new(
            g.flat_nodes()
                .iter()
                .map(|x| 1.0 / ((x[0] - 1.3) * (x[1] - 1.3)))
                .collect(),
        )
        .unwrap();
        for tol in [DEFAULT_TOL, f64::INFINITY] {
            let state = lanczos_run(
                &a,
                &starting_vector(&g),
                LanczosOptions {
                    tol,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(state.recurrence_residual(&a) <= 1e-10 * a.frobenius_norm());
            for col in state.vectors().column_iter() {
                assert_abs_diff_eq!(col.norm(), 1.0, epsilon = 1e-12);
            }
            let k = state.k();
            let half = state.truncated(k / 2).unwrap();
            assert!(half.recurrence_residual(&a) <= 1e-10 * a.frobenius_norm());
            assert_eq!(half.k(), k / 2);
        }
    }

    #[test]
    fn linear_f_gives_scaled_legendre() {
        let n = 7;
        let g = grid(&[n, n]);
        let (shift, scale) = (0.8, -2.5);
        let f: Vec<f64> = g
            .flat_nodes()
            .iter()
            .map(|x| shift + scale * x[1])
            .collect();
        let (rc, _) = stieltjes_oracle(&f, &g.flat_weights(), n).unwrap();
        let legendre = RecurrenceCoefficients::legendre(n).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(rc.alpha()[i], shift, epsilon = 1e-13);
            assert_abs_diff_eq!(
                rc.beta()[i],
                if i == 0 {
                    1.0
                } else {
                    scale * scale * legendre.beta()[i]
                },
                epsilon = 1e-12
            );
        }
        // n distinct values: the oracle cannot go further
        assert!(matches!(
            stieltjes_oracle(&f, &g.flat_weights(), n + 1),
            Err(Error::Breakdown { achieved, .. }) if achieved == n
        ));
        let (rc, _) = stieltjes_oracle(&[4.0; 9], &g_weights(3), 1).unwrap();
        assert_abs_diff_eq!(rc.alpha()[0], 4.0, epsilon = 1e-14);
    }

    fn g_weights(n: usize) -> Vec<f64> {
        grid(&[n, n]).flat_weights()
    }

    #[test]
    fn few_distinct_values_break_down_early() {
        let g = grid(&[6, 6]);
        // three distinct values
        let f: Vec<f64> = g
            .flat_nodes()
            .iter()
            .map(|x| (x[0] * 3.0).round().clamp(-1.0, 1.0))
            .collect();
        let state = run(
            f,
            &starting_vector(&g),
            LanczosOptions {
                tol: f64::INFINITY,
                ..Default::default()
            },
        );
        assert_eq!(state.stop_reason(), StopReason::Breakdown);
        assert!(state.k() <= 3);
    }

    #[test]
    fn coefficients_and_pruning() {
        let g = grid(&[9, 9]);
        let f: Vec<f64> = g
            .flat_nodes()
            .iter()
            .map(|x| 1.0 / ((x[0] - 1.3) * (x[1] - 1.3)))
            .collect();
        let state = run(
            f,
            &starting_vector(&g),
            LanczosOptions {
                tol: f64::INFINITY,
                ..Default::default()
            },
        );
        let rule = transformed_rule(state.tridiagonal()).unwrap();
        assert!(rule.prune(0.0).unwrap().is_none());
        assert!(rule.coefficients(&[1.0]).is_err());
        let ones = vec![1.0; rule.len()];
        let c = rule.coefficients(&ones).unwrap();
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-12);

        let largest = rule.weights().iter().cloned().fold(0.0, f64::max);
        let pruned = rule.prune(1e-6 * largest).unwrap().unwrap();
        assert!(!pruned.dropped.is_empty());
        assert!(pruned.dropped.iter().all(|&(_, mu)| mu < 1e-6 * largest));
        assert_eq!(pruned.transform.len(), rule.len() - pruned.dropped.len());
        assert_abs_diff_eq!(
            pruned.transform.weights().iter().sum::<f64>(),
            1.0,
            epsilon = 1e-12
        );
        let g: Vec<f64> = rule.nodes().iter().map(|t| t.exp()).collect();
        let kept: Vec<f64> = pruned.transform.nodes().iter().map(|t| t.exp()).collect();
        let full = rule.coefficients(&g).unwrap();
        let reduced = pruned.transform.coefficients(&kept).unwrap();
        assert_eq!(full.len(), reduced.len());
        let norm = full.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = full
            .iter()
            .zip(&reduced)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let bound = pruned
            .dropped
            .iter()
            .map(|&(t, mu)| mu * t.exp().powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(diff <= bound + 1e-12 * norm, "{diff} > {bound}");
        assert!(rule.prune(2.0).is_err());
    }
}
