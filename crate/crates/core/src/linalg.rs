//! Dense linear-algebra helpers on top of nalgebra's partially pivoted LU.

use nalgebra::DMatrix;

pub fn det(m: &DMatrix<f64>) -> f64 {
    m.clone().lu().determinant()
}

/// `ln |det m|`; `-inf` for a singular matrix.
pub fn ln_abs_det(m: DMatrix<f64>) -> f64 {
    let lu = m.lu();
    lu.u().diagonal().iter().map(|v| v.abs().ln()).sum()
}

/// `X' diag(q) X`.
pub fn information_matrix(x: &DMatrix<f64>, q: &[f64]) -> DMatrix<f64> {
    debug_assert_eq!(x.nrows(), q.len());
    let mut scaled = x.clone();
    for (mut row, &qi) in scaled.row_iter_mut().zip(q) {
        row *= qi;
    }
    x.tr_mul(&scaled)
}

/// Square submatrix made of the listed rows.
pub fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    x.select_rows(rows.iter())
}

/// For an `n x (n-1)` matrix, `ln |det X[-j]|` for every deleted row `j`.
pub fn ln_abs_leave_one_out_minors(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows();
    debug_assert_eq!(x.ncols() + 1, n);
    (0..n)
        .map(|j| {
            let rows: Vec<usize> = (0..n).filter(|&i| i != j).collect();
            ln_abs_det(select_rows(x, &rows))
        })
        .collect()
}

/// For an `n x (n-1)` matrix, `det X[-j]` for every deleted row `j`.
pub fn leave_one_out_minors(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows();
    debug_assert_eq!(x.ncols() + 1, n);
    (0..n)
        .map(|j| {
            let rows: Vec<usize> = (0..n).filter(|&i| i != j).collect();
            det(&select_rows(x, &rows))
        })
        .collect()
}

/// Numerical rank: singular values above `tol` times the largest.
pub fn rank(x: &DMatrix<f64>, tol: f64) -> usize {
    let sv = x.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > tol * max).count()
}
