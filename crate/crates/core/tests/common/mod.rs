//! Shared helpers for the oracle test suites: a hand-rolled dense linear
//! solver independent of the Cholesky path used by the library.

use ndarray::{Array1, Array2};

/// Solve `a x = b` by Gauss-Jordan elimination with partial pivoting.
pub fn solve_dense(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.len(), n);
    let mut m = vec![vec![0.0f64; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = a[[i, j]];
        }
        m[i][n] = b[i];
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| m[p][col].abs().partial_cmp(&m[q][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        let diag = m[col][col];
        assert!(diag.abs() > 1e-300, "singular system in oracle solver");
        for j in col..=n {
            m[col][j] /= diag;
        }
        for row in 0..n {
            if row != col {
                let factor = m[row][col];
                for j in col..=n {
                    m[row][j] -= factor * m[col][j];
                }
            }
        }
    }
    Array1::from_iter((0..n).map(|i| m[i][n]))
}

/// Inverse through the same elimination, column by column.
#[allow(dead_code)]
pub fn invert_dense(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut out = Array2::zeros((n, n));
    for j in 0..n {
        let mut e = Array1::zeros(n);
        e[j] = 1.0;
        let col = solve_dense(a, &e);
        for i in 0..n {
            out[[i, j]] = col[i];
        }
    }
    out
}
