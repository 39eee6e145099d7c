//! Small dense-matrix helpers: matrix exponential, zero-order-hold
//! discretization and spectral radius.

use nalgebra::{DMatrix, DVector};

/// Matrix exponential by scaling and squaring with a degree-6 Padé approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    let norm = a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (libm::ceil(libm::log2(norm / 0.5)) as i32).max(0) as u32;
    }
    let scaled = a / libm::pow(2.0, squarings as f64);

    const C: [f64; 7] = [1.0, 0.5, 5.0 / 44.0, 1.0 / 66.0, 1.0 / 792.0, 1.0 / 15840.0, 1.0 / 665280.0];
    let id = DMatrix::<f64>::identity(n, n);
    let mut num = id.clone() * C[0];
    let mut den = id.clone() * C[0];
    let mut power = id;
    for (k, c) in C.iter().enumerate().skip(1) {
        power = &power * &scaled;
        let term = &power * *c;
        num += &term;
        if k % 2 == 0 {
            den += &term;
        } else {
            den -= &term;
        }
    }
    let mut result = den.lu().solve(&num).expect("Padé denominator is nonsingular for a scaled argument");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Zero-order-hold discretization of `x' = A x + B u` over `period` seconds.
pub fn discretize(a: &DMatrix<f64>, b: &DVector<f64>, period: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = a.nrows();
    let mut aug = DMatrix::<f64>::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * period));
    aug.view_mut((0, n), (n, 1)).copy_from(&(b * period));
    let e = expm(&aug);
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, 1)).column(0).into_owned())
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| libm::hypot(z.re, z.im)).fold(0.0, f64::max)
}
