//! Small dense helpers on top of nalgebra that work without std.

use nalgebra::DMatrix;

/// Matrix exponential by scaling and squaring with a degree-18 Taylor core.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square());
    let n = a.nrows();
    let norm = norm1(a);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let b = a * scale;
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=18 {
        term = (&term * &b) / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Maximum absolute column sum.
pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Smallest and largest eigenvalue of the symmetric part of `a`.
pub fn sym_eig_range(a: &DMatrix<f64>) -> (f64, f64) {
    let s = sym(a);
    let eig = s.symmetric_eigenvalues();
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Inverse together with its 1-norm condition number; `None` if singular.
pub fn inverse_with_condition(a: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    let inv = a.clone().lu().try_inverse()?;
    let cond = norm1(a) * norm1(&inv);
    if cond.is_finite() {
        Some((inv, cond))
    } else {
        None
    }
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_rotation_generator() {
        let t = 2.3;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -t, t, 0.0]);
        let e = expm(&a);
        let expected = DMatrix::from_row_slice(2, 2, &[libm::cos(t), -libm::sin(t), libm::sin(t), libm::cos(t)]);
        assert!(max_abs(&(e - expected)) < 1e-14);
    }

    #[test]
    fn expm_of_nilpotent_is_polynomial() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 4.0, 1.0, 0.0, 0.0, -3.0, 0.0, 0.0, 0.0]);
        let expected = DMatrix::<f64>::identity(3, 3) + &a + (&a * &a) * 0.5;
        assert!(max_abs(&(expm(&a) - expected)) < 1e-12);
    }

    #[test]
    fn expm_inverse_and_diagonal() {
        let a = DMatrix::from_row_slice(3, 3, &[0.3, -1.2, 0.5, 2.0, -0.1, 0.7, -0.4, 0.9, 0.2]);
        let prod = expm(&a) * expm(&(-&a));
        assert!(max_abs(&(prod - DMatrix::identity(3, 3))) < 1e-12);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(alloc::vec![1.5, -2.0]));
        let e = expm(&d);
        assert!((e[(0, 0)] - libm::exp(1.5)).abs() < 1e-12 * libm::exp(1.5));
        assert!((e[(1, 1)] - libm::exp(-2.0)).abs() < 1e-15);
    }

    #[test]
    fn eigen_range_of_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, -3.0, -2.0]);
        let (lo, hi) = sym_eig_range(&a);
        assert!((lo + 2.0).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);
    }
}
