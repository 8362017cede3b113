//! Small dense helpers for the pointwise solves: partial-pivot LU on stack
//! matrices up to 4x4, determinants of minors, and SVD-based null spaces.

use crate::complex::MAX_DIM;
use crate::error::{Error, Result};
use nalgebra::DMatrix;

pub type SmallMat = [[f64; MAX_DIM]; MAX_DIM];

pub fn zero_mat() -> SmallMat {
    [[0.0; MAX_DIM]; MAX_DIM]
}

/// Solve `a x = b` for `dim <= 4` with partial pivoting. `a` is consumed.
pub fn small_solve(dim: usize, mut a: SmallMat, mut b: [f64; MAX_DIM]) -> Result<[f64; MAX_DIM]> {
    for col in 0..dim {
        let mut piv = col;
        for r in col + 1..dim {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-14 {
            return Err(Error::LinearSolve(format!(
                "pivot {:.3e} too small in column {col}",
                a[piv][col]
            )));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..dim {
            let f = a[r][col] / a[col][col];
            for c in col..dim {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; MAX_DIM];
    for col in (0..dim).rev() {
        let mut acc = b[col];
        for c in col + 1..dim {
            acc -= a[col][c] * x[c];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}

pub fn small_det(dim: usize, mut a: SmallMat) -> f64 {
    let mut det = 1.0;
    for col in 0..dim {
        let mut piv = col;
        for r in col + 1..dim {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(col, piv);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..dim {
            let f = a[r][col] / a[col][col];
            for c in col..dim {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    det
}

/// Determinant of the minor `mat[rows, cols]`.
pub fn minor_det(mat: &SmallMat, rows: &[u8], cols: &[u8]) -> f64 {
    let k = rows.len();
    debug_assert_eq!(k, cols.len());
    let mut m = zero_mat();
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            m[i][j] = mat[r as usize][c as usize];
        }
    }
    small_det(k, m)
}

/// Orthonormal basis of the null space of `(m - shift I)`, singular values
/// below `tol` counting as zero.
pub fn shifted_null_space(m: &DMatrix<f64>, shift: f64, tol: f64) -> Vec<nalgebra::DVector<f64>> {
    let n = m.nrows();
    let shifted = m - DMatrix::<f64>::identity(n, n) * shift;
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.expect("svd requested v_t");
    let mut out = Vec::new();
    for (i, sv) in svd.singular_values.iter().enumerate() {
        if *sv < tol {
            out.push(vt.row(i).transpose());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solve_matches_nalgebra() {
        let a = [
            [2.0, 1.0, 0.0, 0.0],
            [1.0, 3.0, 1.0, 0.0],
            [0.0, 1.0, 4.0, 2.0],
            [0.5, 0.0, 1.0, 5.0],
        ];
        let b = [1.0, -2.0, 0.5, 3.0];
        let x = small_solve(4, a, b).unwrap();
        let na = DMatrix::from_fn(4, 4, |r, c| a[r][c]);
        let nb = nalgebra::DVector::from_row_slice(&b);
        let nx = na.lu().solve(&nb).unwrap();
        for i in 0..4 {
            assert!((x[i] - nx[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn det_of_singular_matrix_is_zero() {
        let mut a = zero_mat();
        a[0][0] = 1.0;
        a[1][0] = 2.0;
        a[0][1] = 3.0;
        a[1][1] = 6.0;
        assert_eq!(small_det(2, a), 0.0);
    }

    #[test]
    fn null_space_of_projection() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let e0 = shifted_null_space(&m, 0.0, 1e-9);
        let e1 = shifted_null_space(&m, 1.0, 1e-9);
        assert_eq!(e0.len(), 1);
        assert_eq!(e1.len(), 1);
        assert!((e0[0][0].abs() - 1.0).abs() < 1e-14);
        assert!((e1[0][1].abs() - 1.0).abs() < 1e-14);
    }
}
