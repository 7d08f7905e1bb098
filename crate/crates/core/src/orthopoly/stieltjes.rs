use nalgebra::DMatrix;

use super::{RecurrenceCoefficients, WEIGHT_SUM_TOL};
use crate::error::{invalid, Error, Result};

/// Relative size of `|p~_i|` below which the recurrence is declared broken down.
pub(crate) const BREAKDOWN_REL: f64 = 1e-14;

/// Normalized Stieltjes procedure with the inner product
/// `(u, v) = sum_j u(nodes[j]) v(nodes[j]) weights[j]`.
///
/// Returns the recurrence coefficients together with the `m x n` matrix of
/// polynomial values `P[(j, i)] = p_i(nodes[j])`.
pub(crate) fn discrete_stieltjes(
    nodes: &[f64],
    weights: &[f64],
    n: usize,
) -> Result<(RecurrenceCoefficients, DMatrix<f64>)> {
    let m = nodes.len();
    if n == 0 {
        return Err(invalid("need at least one polynomial"));
    }
    if weights.len() != m {
        return Err(invalid(format!("{m} nodes but {} weights", weights.len())));
    }
    if m == 0 {
        return Err(invalid("measure needs at least one node"));
    }
    if nodes.iter().any(|t| !t.is_finite()) {
        return Err(invalid("measure nodes must be finite"));
    }
    if weights
        .iter()
        .any(|&w| w.is_nan() || w <= 0.0 || !w.is_finite())
    {
        return Err(invalid("measure weights must be positive"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(invalid(format!(
            "measure weights sum to {total}, expected 1"
        )));
    }

    let scale = nodes.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
    let threshold = BREAKDOWN_REL * scale;
    let norm = |v: &[f64]| -> f64 {
        v.iter()
            .zip(weights)
            .map(|(p, w)| p * p * w)
            .sum::<f64>()
            .sqrt()
    };

    let mut values = DMatrix::zeros(m, n);
    let mut alpha = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    let mut prev = vec![0.0; m];
    let mut tilde = vec![1.0; m];

    for i in 0..n {
        let eta = norm(&tilde);
        if i > 0 && eta <= threshold {
            return Err(Error::Breakdown {
                achieved: i,
                requested: n,
            });
        }
        let cur: Vec<f64> = tilde.iter().map(|p| p / eta).collect();
        let a: f64 = nodes
            .iter()
            .zip(&cur)
            .zip(weights)
            .map(|((t, p), w)| t * p * p * w)
            .sum();
        alpha.push(a);
        beta.push(eta * eta);
        for (j, &p) in cur.iter().enumerate() {
            values[(j, i)] = p;
        }
        tilde = nodes
            .iter()
            .zip(&cur)
            .zip(&prev)
            .map(|((t, p), q)| (t - a) * p - eta * q)
            .collect();
        prev = cur;
    }

    Ok((RecurrenceCoefficients::new(alpha, beta)?, values))
}
