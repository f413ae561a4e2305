/// Solves a symmetric tridiagonal system with the Thomas algorithm.
/// `diag` has length `n`, `off` length `n - 1`. The matrix must be diagonally
/// dominant or otherwise safe without pivoting.
pub(crate) fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64], out: &mut [f64]) {
    let n = diag.len();
    debug_assert!(off.len() + 1 == n && rhs.len() == n && out.len() == n);
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    out[0] = rhs[0] / beta;
    for k in 1..n {
        c[k] = off[k - 1] / beta;
        beta = diag[k] - off[k - 1] * c[k];
        out[k] = (rhs[k] - off[k - 1] * out[k - 1]) / beta;
    }
    for k in (0..n - 1).rev() {
        out[k] -= c[k + 1] * out[k + 1];
    }
}
