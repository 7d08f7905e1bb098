//! Implicit-shift QL iteration for symmetric tridiagonal matrices.

use nalgebra::DMatrix;

use super::SymmetricTridiagonal;
use crate::error::{Error, Result};

/// Iteration cap per eigenvalue.
const MAX_SWEEPS: usize = 30;

/// Eigendecomposition `T = Q diag(values) Q^T`.
///
/// `values` are ascending and column `j` of `vectors` belongs to `values[j]`.
/// Every column has its first nonzero entry positive.
#[derive(Debug, Clone)]
pub struct TridiagonalEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Eigenvalues and eigenvectors of a symmetric tridiagonal matrix by the QL
/// algorithm with Wilkinson shifts, accumulating the rotations into `Q`.
pub fn symtridiag_eig(t: &SymmetricTridiagonal) -> Result<TridiagonalEigen> {
    let n = t.dim();
    let mut d = t.diag().to_vec();
    // e[i] couples rows i and i+1; the trailing slot stays zero.
    let mut e = t.offdiag().to_vec();
    e.push(0.0);
    let mut z = DMatrix::<f64>::identity(n, n);

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::NumericalFailure(format!(
                    "tridiagonal QL did not converge for eigenvalue {l} after {MAX_SWEEPS} sweeps"
                )));
            }

            // Wilkinson shift from the leading 2x2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));

            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let zk1 = z[(k, i + 1)];
                    let zk = z[(k, i)];
                    z[(k, i + 1)] = s * zk + c * zk1;
                    z[(k, i)] = c * zk - s * zk1;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&j| d[j]).collect();
    let mut vectors = z.select_columns(&order);
    for mut col in vectors.column_iter_mut() {
        if let Some(&first) = col.iter().find(|v| **v != 0.0) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
    Ok(TridiagonalEigen { values, vectors })
}
