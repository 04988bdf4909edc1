//! Small dense linear-algebra helpers shared by the semigroup modules.

use nalgebra::DMatrix;

/// Maximum absolute row sum (the operator norm for row-vector action).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dense matrix exponential by scaling and squaring with a Taylor series.
///
/// Accuracy is near machine precision for the moderate norms this crate
/// produces (generators are shifted before exponentiating when `t` is large).
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "expm needs a square matrix");
    let norm = inf_norm(m);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m / 2f64.powi(s as i32);

    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=40 {
        term = &term * &scaled / k as f64;
        result += &term;
        if inf_norm(&term) < 1e-18 * inf_norm(&result) {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// `x e^{tQ}` for a row vector `x`.
pub fn evolve_row(q: &DMatrix<f64>, t: f64, x: &[f64]) -> Vec<f64> {
    let e = expm(&(q * t));
    let row = nalgebra::RowDVector::from_row_slice(x);
    let out = row * e;
    out.iter().copied().collect()
}
