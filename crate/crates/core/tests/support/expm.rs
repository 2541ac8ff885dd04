//! Matrix exponential by Taylor series and repeated squaring.

use nalgebra::DMatrix;
use num_complex::Complex64;

fn norm1(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// exp(a) by Taylor series on a / 2^s with |a / 2^s|_1 <= 1/2, then s squarings.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let s = (norm1(a) / 0.5).log2().ceil().max(0.0) as i32;
    let x = a * Complex64::new(0.5f64.powi(s), 0.0);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = &term * &x * Complex64::new(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}
