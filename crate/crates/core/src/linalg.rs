//! Small dense symmetric solves for the affine-projection Gram systems.

use crate::error::{Error, Result};

/// Relative pivot threshold below which an unregularized Gram matrix is
/// reported as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-12;

/// Residual bound every successful solve satisfies:
/// `max|(A + delta I) x - b| <= RESIDUAL_TOLERANCE * (1 + max|b|)`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

const MAX_REFINEMENTS: usize = 3;

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    pub fn identity(order: usize) -> Self {
        let mut entries = vec![0.0; order * order];
        for i in 0..order {
            entries[i * order + i] = 1.0;
        }
        Self { order, entries }
    }

    /// Builds a matrix from rows, rejecting anything that is not square and
    /// exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let order = rows.len();
        if order == 0 {
            return Err(Error::invalid("gram", "matrix order must be positive"));
        }
        if rows.iter().any(|r| r.len() != order) {
            return Err(Error::invalid("gram", "matrix must be square"));
        }
        for i in 0..order {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::invalid(
                        "gram",
                        format!("entries ({i},{j}) and ({j},{i}) differ"),
                    ));
                }
            }
        }
        Ok(Self {
            order,
            entries: rows.iter().flatten().copied().collect(),
        })
    }

    /// `X Xᵀ` for the given rows. Only the lower triangle is computed; the
    /// upper one is mirrored so the result is exactly symmetric.
    pub fn gram<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let order = rows.len();
        let mut entries = vec![0.0; order * order];
        for i in 0..order {
            for j in 0..=i {
                let v = dot(rows[i].as_ref(), rows[j].as_ref());
                entries[i * order + j] = v;
                entries[j * order + i] = v;
            }
        }
        Self { order, entries }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.order + j]
    }

    /// `(self + delta I) v`.
    pub fn mul_shifted(&self, delta: f64, v: &[f64]) -> Vec<f64> {
        (0..self.order)
            .map(|i| {
                let row = &self.entries[i * self.order..(i + 1) * self.order];
                dot(row, v) + delta * v[i]
            })
            .collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `b - (row · x + delta x[i])` accumulated with error-free transformations
/// (FMA products, two-sum additions), so the result is close to the exact
/// residual even when the terms cancel heavily.
fn compensated_residual(row: &[f64], delta: f64, i: usize, x: &[f64], b: f64) -> f64 {
    let mut sum = b;
    let mut carry = 0.0;
    let terms = row
        .iter()
        .zip(x)
        .map(|(a, xj)| (*a, *xj))
        .chain(std::iter::once((delta, x[i])));
    for (a, xj) in terms {
        let p = -a * xj;
        let p_err = (-a).mul_add(xj, -p);
        let t = sum + p;
        let z = t - sum;
        let s_err = (sum - (t - z)) + (p - z);
        sum = t;
        carry += s_err + p_err;
    }
    sum + carry
}

/// Lower-triangular Cholesky factor of `gram + delta I`, row-major.
fn cholesky(gram: &SymMatrix, delta: f64) -> Result<Vec<f64>> {
    let n = gram.order;
    let largest_diag = (0..n).map(|i| gram.get(i, i) + delta).fold(0.0, f64::max);
    let threshold = if delta == 0.0 {
        SINGULAR_PIVOT_RATIO * largest_diag
    } else {
        0.0
    };
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut pivot = gram.get(j, j) + delta;
        for k in 0..j {
            pivot -= l[j * n + k] * l[j * n + k];
        }
        if !(pivot > threshold) {
            return Err(Error::Singular {
                row: j,
                pivot,
                threshold,
            });
        }
        let diag = pivot.sqrt();
        l[j * n + j] = diag;
        for i in j + 1..n {
            let mut s = gram.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / diag;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[f64], n: usize, rhs: &[f64]) -> Vec<f64> {
    let mut y = rhs.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    y
}

/// Solves `(gram + delta I) x = rhs` by Cholesky factorization followed by
/// up to three rounds of iterative refinement.
///
/// With `delta == 0` a pivot below [`SINGULAR_PIVOT_RATIO`] times the largest
/// diagonal entry is reported as [`Error::Singular`]; with `delta > 0` only a
/// non-positive pivot is.
pub fn solve_regularized(gram: &SymMatrix, delta: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = gram.order;
    if rhs.len() != n {
        return Err(Error::invalid(
            "rhs",
            format!("length {} does not match matrix order {n}", rhs.len()),
        ));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::invalid(
            "delta",
            format!("must be finite and >= 0, got {delta}"),
        ));
    }
    let l = cholesky(gram, delta)?;
    let mut x = cholesky_solve(&l, n, rhs);

    let bound = RESIDUAL_TOLERANCE * (1.0 + max_abs(rhs));
    let residual_of = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let row = &gram.entries[i * n..(i + 1) * n];
                compensated_residual(row, delta, i, x, rhs[i])
            })
            .collect()
    };
    let mut residual = residual_of(&x);
    for _ in 0..MAX_REFINEMENTS {
        let current = max_abs(&residual);
        if current <= bound * 1e-3 {
            break;
        }
        let correction = cholesky_solve(&l, n, &residual);
        let candidate: Vec<f64> = x.iter().zip(&correction).map(|(a, c)| a + c).collect();
        let candidate_residual = residual_of(&candidate);
        if max_abs(&candidate_residual) >= current {
            break;
        }
        x = candidate;
        residual = candidate_residual;
    }
    Ok(x)
}

/// Maximum-norm residual of a candidate solution.
pub fn residual_max_norm(gram: &SymMatrix, delta: f64, x: &[f64], rhs: &[f64]) -> f64 {
    let ax = gram.mul_shifted(delta, x);
    ax.iter()
        .zip(rhs)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}
