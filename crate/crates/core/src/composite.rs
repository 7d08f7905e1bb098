//! Surrogates of `h(x) = g(f(x))` from `m` evaluations of `f` and `k` of `g`.
//!
//! The pipeline:
//!
//! 1. tensor Gauss grid on the input box,
//! 2. `f_i = f(x_i)` at every node, `A = diag(f)`,
//! 3. Lanczos on `A` from `sqrt(w)` until the loss of orthogonality passes the
//!    tolerance, giving `T` and `U = W^{-1} V`,
//! 4. `T = Q_f diag(theta) Q_f^T`,
//! 5. `g_j = g(theta_j)`,
//! 6. coefficients `Q_x W_x U Q_f W_f g`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, BoxError, Error, Result};
use crate::measure::{
    lanczos_run, poly_matrix, starting_vector, transformed_rule, DiagonalOperator, LanczosOptions,
    LanczosState, TransformedRule, DEFAULT_TOL,
};
use crate::pseudospectral::{dft_forward, PointValue, SpectralCoefficients, TensorGrid};

/// `g` must be defined on the hull of the `f` samples widened by this
/// fraction of its width on each side; Ritz values may leave the exact hull
/// by rounding.
pub const G_HULL_INFLATION: f64 = 1e-10;

/// Failure of a batch evaluation.
#[derive(Debug)]
pub struct BatchFailure {
    /// Index of the offending point, if the failure is tied to one.
    pub index: Option<usize>,
    pub source: BoxError,
}

impl BatchFailure {
    pub fn new(index: Option<usize>, source: impl Into<BoxError>) -> Self {
        Self {
            index,
            source: source.into(),
        }
    }
}

/// Something that maps points to scalars. The outer function `g` receives
/// one-element points.
pub trait Evaluate {
    fn evaluate_batch(
        &mut self,
        points: &[Vec<f64>],
    ) -> std::result::Result<Vec<f64>, BatchFailure>;
}

/// Adapts an infallible closure.
pub struct FnEvaluator<F>(pub F);

impl<F: FnMut(&[f64]) -> f64> Evaluate for FnEvaluator<F> {
    fn evaluate_batch(
        &mut self,
        points: &[Vec<f64>],
    ) -> std::result::Result<Vec<f64>, BatchFailure> {
        Ok(points.iter().map(|p| (self.0)(p)).collect())
    }
}

/// A named evaluator that counts every point it is asked for.
pub struct Evaluator<'a> {
    name: String,
    inner: Box<dyn Evaluate + 'a>,
    evaluations: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(name: impl Into<String>, inner: impl Evaluate + 'a) -> Self {
        Self {
            name: name.into(),
            inner: Box::new(inner),
            evaluations: 0,
        }
    }

    pub fn from_fn(name: impl Into<String>, f: impl FnMut(&[f64]) -> f64 + 'a) -> Self {
        Self::new(name, FnEvaluator(f))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of points evaluated so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Evaluates every point once. Non-finite results are errors.
    pub fn evaluate_batch(&mut self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.evaluations += points.len();
        let values = self
            .inner
            .evaluate_batch(points)
            .map_err(|e| Error::Evaluation {
                evaluator: self.name.clone(),
                point: e.index.and_then(|i| points.get(i).cloned()),
                source: e.source,
            })?;
        if values.len() != points.len() {
            return Err(Error::Evaluation {
                evaluator: self.name.clone(),
                point: None,
                source: format!(
                    "{} values returned for {} points",
                    values.len(),
                    points.len()
                )
                .into(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                evaluator: self.name.clone(),
                point: Some(points[i].clone()),
                source: format!("non-finite value {}", values[i]).into(),
            });
        }
        Ok(values)
    }

    pub fn evaluate(&mut self, point: &[f64]) -> Result<f64> {
        Ok(self.evaluate_batch(&[point.to_vec()])?[0])
    }
}

impl std::fmt::Debug for Evaluator<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Evaluator")
            .field("name", &self.name)
            .field("evaluations", &self.evaluations)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateOptions {
    pub tol: f64,
    /// Lanczos iteration cap; `None` means the number of grid nodes.
    pub k_max: Option<usize>,
    /// Transformed-rule nodes with weight below this are dropped. `0` keeps all.
    pub ghost_tol: f64,
}

impl Default for SurrogateOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            k_max: None,
            ghost_tol: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvaluationCounts {
    /// Grid nodes.
    pub m: usize,
    /// Nodes of the transformed rule, i.e. points where `g` is needed.
    pub k: usize,
    /// Lanczos iterations; exceeds `k` only when ghosts were pruned.
    pub iterations: usize,
    pub f_evals: usize,
    pub g_evals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproximationError {
    /// `|h - U g_hat|_2` over the grid nodes.
    pub absolute: f64,
    /// `absolute / |h|_2`.
    pub relative: f64,
}

/// Approximate pseudospectral surrogate of `h = g o f`.
#[derive(Debug, Clone)]
pub struct CompositeSurrogate {
    coeffs: SpectralCoefficients,
    transform: TransformedRule,
    lanczos: LanczosState,
    f_values: Vec<f64>,
    poly_matrix: DMatrix<f64>,
    g_values: Vec<f64>,
    g_hat: Vec<f64>,
    h_under: Vec<f64>,
    pruned: Vec<(f64, f64)>,
    counts: EvaluationCounts,
}

impl CompositeSurrogate {
    pub fn coeffs(&self) -> &SpectralCoefficients {
        &self.coeffs
    }

    pub fn grid(&self) -> &Arc<TensorGrid> {
        self.coeffs.grid()
    }

    pub fn transform(&self) -> &TransformedRule {
        &self.transform
    }

    pub fn lanczos(&self) -> &LanczosState {
        &self.lanczos
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f_values
    }

    /// `U[(j, i)] = phi_i(f_j)`.
    pub fn poly_matrix(&self) -> &DMatrix<f64> {
        &self.poly_matrix
    }

    /// `g` at the transformed nodes.
    pub fn g_values(&self) -> &[f64] {
        &self.g_values
    }

    /// Coefficients of `g` in the basis `phi_i`.
    pub fn g_hat(&self) -> &[f64] {
        &self.g_hat
    }

    /// Approximate node values `U g_hat` of `h`.
    pub fn h_under(&self) -> &[f64] {
        &self.h_under
    }

    /// `(theta, mu)` of nodes removed by ghost pruning.
    pub fn pruned(&self) -> &[(f64, f64)] {
        &self.pruned
    }

    pub fn counts(&self) -> EvaluationCounts {
        self.counts
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.coeffs.eval(x)
    }

    pub fn eval_flagged(&self, x: &[f64]) -> Result<PointValue> {
        self.coeffs.eval_flagged(x)
    }

    pub fn approximation_error(&self, h_true: &[f64]) -> Result<ApproximationError> {
        approximation_error(self, h_true)
    }
}

/// Runs the full pipeline with `m` calls to `f` and `k` calls to `g`.
///
/// `g` sees only Ritz values, which lie in the hull of the `f` samples up to
/// [`G_HULL_INFLATION`].
pub fn build_surrogate(
    f: &mut Evaluator<'_>,
    g: &mut Evaluator<'_>,
    grid: Arc<TensorGrid>,
    options: SurrogateOptions,
) -> Result<CompositeSurrogate> {
    let before = f.evaluations();
    let f_values = f.evaluate_batch(&grid.flat_nodes())?;
    let f_evals = f.evaluations() - before;

    let a = DiagonalOperator::new(f_values.clone())?;
    let state = lanczos_run(
        &a,
        &starting_vector(&grid),
        LanczosOptions {
            tol: options.tol,
            k_max: options.k_max,
            reorthogonalize: false,
        },
    )?;
    let mut surrogate = surrogate_from_lanczos(grid, f_values, state, g, options.ghost_tol)?;
    surrogate.counts.f_evals = f_evals;
    Ok(surrogate)
}

/// Steps 4-6 of the pipeline for a Lanczos run on already computed samples
/// of `f`. Reported `f_evals` is zero.
pub fn surrogate_from_lanczos(
    grid: Arc<TensorGrid>,
    f_values: Vec<f64>,
    lanczos: LanczosState,
    g: &mut Evaluator<'_>,
    ghost_tol: f64,
) -> Result<CompositeSurrogate> {
    if f_values.len() != grid.node_count() {
        return Err(invalid(format!(
            "{} samples of f for a grid with {} nodes",
            f_values.len(),
            grid.node_count()
        )));
    }
    let full = transformed_rule(lanczos.tridiagonal())?;
    let pruned = if ghost_tol > 0.0 {
        full.prune(ghost_tol)?
    } else {
        None
    };
    let (transform, dropped) = match pruned {
        Some(p) => (p.transform, p.dropped),
        None => (full, Vec::new()),
    };
    let u = poly_matrix(&lanczos, &grid)?;

    let before = g.evaluations();
    let thetas: Vec<Vec<f64>> = transform.nodes().iter().map(|&t| vec![t]).collect();
    let g_values = g.evaluate_batch(&thetas)?;
    let g_evals = g.evaluations() - before;

    let g_hat = transform.coefficients(&g_values)?;
    let h_under: Vec<f64> = (&u * DVector::from_column_slice(&g_hat))
        .iter()
        .copied()
        .collect();
    let coeffs = dft_forward(&grid, &h_under)?;

    let counts = EvaluationCounts {
        m: grid.node_count(),
        k: transform.len(),
        iterations: lanczos.k(),
        f_evals: 0,
        g_evals,
    };
    Ok(CompositeSurrogate {
        coeffs,
        transform,
        lanczos,
        f_values,
        poly_matrix: u,
        g_values,
        g_hat,
        h_under,
        pruned: dropped,
        counts,
    })
}

/// `E = |h_true - U g_hat|_2` at the grid nodes.
pub fn approximation_error(
    surrogate: &CompositeSurrogate,
    h_true: &[f64],
) -> Result<ApproximationError> {
    let h_under = surrogate.h_under();
    if h_true.len() != h_under.len() {
        return Err(invalid(format!(
            "{} reference values for {} grid nodes",
            h_true.len(),
            h_under.len()
        )));
    }
    let absolute = h_true
        .iter()
        .zip(h_under)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = h_true.iter().map(|v| v * v).sum::<f64>().sqrt();
    let relative = if norm > 0.0 {
        absolute / norm
    } else {
        absolute
    };
    Ok(ApproximationError { absolute, relative })
}

/// Full-cost reference surrogate from `m` evaluations of `h`.
pub fn direct_surrogate(
    h: &mut Evaluator<'_>,
    grid: &Arc<TensorGrid>,
) -> Result<SpectralCoefficients> {
    let values = h.evaluate_batch(&grid.flat_nodes())?;
    dft_forward(grid, &values)
}

/// Brute-force node values `h_i = g(f_i)`, spending one call of `g` per node.
/// Reference only; the surrogate itself never needs these.
pub fn oracle_h_values(f_values: &[f64], g: &mut Evaluator<'_>) -> Result<Vec<f64>> {
    let points: Vec<Vec<f64>> = f_values.iter().map(|&v| vec![v]).collect();
    g.evaluate_batch(&points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudospectral::{build_grid, Interval};
    use approx::assert_abs_diff_eq;

    fn grid(orders: &[usize]) -> Arc<TensorGrid> {
        Arc::new(build_grid(orders, &vec![Interval::REFERENCE; orders.len()]).unwrap())
    }

    #[test]
    fn ritz_values_stay_in_inflated_hull() {
        let g = grid(&[9, 9]);
        let f: Vec<f64> = g
            .flat_nodes()
            .iter()
            .map(|x| 1.0 / ((x[0] - 1.3) * (x[1] - 1.3)))
            .collect();
        let (lo, hi) = DiagonalOperator::new(f.clone()).unwrap().hull();
        let pad = G_HULL_INFLATION * (hi - lo);
        let state = lanczos_run(
            &DiagonalOperator::new(f.clone()).unwrap(),
            &starting_vector(&g),
            LanczosOptions {
                tol: f64::INFINITY,
                ..Default::default()
            },
        )
        .unwrap();
        for k in [1, 5, 9, 20, state.k()] {
            let rule = transformed_rule(state.truncated(k).unwrap().tridiagonal()).unwrap();
            for &t in rule.nodes() {
                assert!(
                    t >= lo - pad && t <= hi + pad,
                    "k = {k}: {t} outside [{lo}, {hi}]"
                );
            }
        }
    }

    #[test]
    fn evaluator_counts_and_validates() {
        let mut e = Evaluator::from_fn("sq", |x: &[f64]| x[0] * x[0]);
        assert_eq!(e.evaluate(&[3.0]).unwrap(), 9.0);
        e.evaluate_batch(&[vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(e.evaluations(), 3);

        let mut bad = Evaluator::from_fn("log", |x: &[f64]| x[0].ln());
        let err = bad.evaluate_batch(&[vec![1.0], vec![-1.0]]).unwrap_err();
        match err {
            Error::Evaluation {
                evaluator, point, ..
            } => {
                assert_eq!(evaluator, "log");
                assert_eq!(point, Some(vec![-1.0]));
            }
            other => panic!("unexpected {other}"),
        }
    }

    struct Failing;
    impl Evaluate for Failing {
        fn evaluate_batch(
            &mut self,
            _: &[Vec<f64>],
        ) -> std::result::Result<Vec<f64>, BatchFailure> {
            Err(BatchFailure::new(Some(1), "solver diverged"))
        }
    }

    #[test]
    fn evaluator_failure_carries_point() {
        let g = grid(&[2, 2]);
        let mut f = Evaluator::new("failing", Failing);
        let mut gg = Evaluator::from_fn("id", |x: &[f64]| x[0]);
        let err = build_surrogate(&mut f, &mut gg, Arc::clone(&g), SurrogateOptions::default())
            .unwrap_err();
        match err {
            Error::Evaluation { point: Some(p), .. } => assert_eq!(p, g.node(1)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn constant_f_gives_constant_surrogate() {
        let g = grid(&[4, 5]);
        let mut f = Evaluator::from_fn("const", |_: &[f64]| 0.7);
        let mut gg = Evaluator::from_fn("exp", |t: &[f64]| t[0].exp());
        let s = build_surrogate(&mut f, &mut gg, g, SurrogateOptions::default()).unwrap();
        assert_eq!(s.counts().k, 1);
        assert_eq!(s.counts().g_evals, 1);
        assert_eq!(s.counts().f_evals, 20);
        for x in [[0.1, -0.3], [0.9, 0.9], [-1.0, 0.0]] {
            assert_abs_diff_eq!(s.eval(&x).unwrap(), 0.7_f64.exp(), epsilon = 1e-13);
        }
    }

    #[test]
    fn identity_g_reproduces_direct_surrogate_of_f() {
        let g = grid(&[6, 5]);
        let fun = |x: &[f64]| (0.5 * x[0] - x[1]).sin() + 2.0;
        let mut f = Evaluator::from_fn("f", fun);
        let mut id = Evaluator::from_fn("id", |t: &[f64]| t[0]);
        let s =
            build_surrogate(&mut f, &mut id, Arc::clone(&g), SurrogateOptions::default()).unwrap();
        assert!(s.counts().k >= 2);
        let mut f2 = Evaluator::from_fn("f", fun);
        let direct = direct_surrogate(&mut f2, &g).unwrap();
        let diff = s
            .coeffs()
            .coeffs()
            .iter()
            .zip(direct.coeffs())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = direct.coeffs().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(diff <= 1e-10 * norm, "{diff}");
        let h_true: Vec<f64> = g.flat_nodes().iter().map(|x| fun(x)).collect();
        assert!(s.approximation_error(&h_true).unwrap().relative <= 1e-10);
        assert_eq!(approximation_error(&s, s.h_under()).unwrap().absolute, 0.0);
        assert!(approximation_error(&s, &[1.0]).is_err());
    }

    #[test]
    fn surrogate_interpolates_h_under_at_nodes() {
        let g = grid(&[5, 4]);
        let mut f = Evaluator::from_fn("f", |x: &[f64]| x[0] * x[1] + x[0]);
        let mut gg = Evaluator::from_fn("g", |t: &[f64]| (2.0 * t[0]).cos());
        let s =
            build_surrogate(&mut f, &mut gg, Arc::clone(&g), SurrogateOptions::default()).unwrap();
        for (i, x) in g.flat_nodes().iter().enumerate() {
            let v = s.eval(x).unwrap();
            assert!((v - s.h_under()[i]).abs() <= 1e-10 * s.h_under()[i].abs().max(1.0));
        }
    }

    #[test]
    fn coefficient_error_bounded_by_node_error() {
        let g = grid(&[7, 7]);
        let fun = |x: &[f64]| 1.0 / ((x[0] - 1.5) * (x[1] - 1.7));
        let mut f = Evaluator::from_fn("f", fun);
        let mut gg = Evaluator::from_fn("g", |t: &[f64]| (t[0]).sqrt().sin());
        let opts = SurrogateOptions {
            k_max: Some(6),
            tol: f64::INFINITY,
            ..Default::default()
        };
        let s = build_surrogate(&mut f, &mut gg, Arc::clone(&g), opts).unwrap();
        let mut ggg = Evaluator::from_fn("g", |t: &[f64]| (t[0]).sqrt().sin());
        let h_true = oracle_h_values(s.f_values(), &mut ggg).unwrap();
        assert_eq!(ggg.evaluations(), 49);
        let e = s.approximation_error(&h_true).unwrap().absolute;
        let direct = dft_forward(&g, &h_true).unwrap();
        let diff = s
            .coeffs()
            .coeffs()
            .iter()
            .zip(direct.coeffs())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let max_sqrt_w = g
            .flat_weights()
            .iter()
            .fold(0.0_f64, |a, w| a.max(w.sqrt()));
        assert!(
            diff <= max_sqrt_w * e * (1.0 + 1e-10) + 1e-14,
            "{diff} vs {}",
            max_sqrt_w * e
        );
    }

    #[test]
    fn pruning_keeps_budget_and_accuracy() {
        let g = grid(&[9, 9]);
        let fun = |x: &[f64]| 1.0 / ((x[0] - 1.3) * (x[1] - 1.3));
        let mut f = Evaluator::from_fn("f", fun);
        let mut gg = Evaluator::from_fn("exp", |t: &[f64]| t[0].exp());
        let opts = SurrogateOptions {
            tol: f64::INFINITY,
            k_max: Some(60),
            ghost_tol: 1e-12,
        };
        let s = build_surrogate(&mut f, &mut gg, Arc::clone(&g), opts).unwrap();
        assert!(!s.pruned().is_empty());
        assert_eq!(s.counts().g_evals, s.counts().k);
        assert_eq!(s.counts().k + s.pruned().len(), 60);
        let h_true: Vec<f64> = s.f_values().iter().map(|v| v.exp()).collect();
        assert!(s.approximation_error(&h_true).unwrap().relative <= 1e-6);
    }
}
