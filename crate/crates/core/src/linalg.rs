//! Small complex-vector helpers shared by the solvers.
//!
//! Reductions here are sequential on purpose: traces and reports must be
//! bit-identical across runs regardless of thread count.

use num_complex::Complex64;

pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sq(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn real_norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// `a + s * b`
pub fn add_scaled(a: &[Complex64], s: Complex64, b: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// `a += s * b`
pub fn axpy(a: &mut [Complex64], s: Complex64, b: &[Complex64]) {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x += s * y;
    }
}

pub fn sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Relative l2 error of `a` against reference `b`; absolute norm when `b = 0`.
pub fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let nb = norm(b);
    let d = norm(&sub(a, b));
    if nb == 0.0 {
        d
    } else {
        d / nb
    }
}

pub fn all_finite(a: &[Complex64]) -> bool {
    a.iter().all(|x| x.re.is_finite() && x.im.is_finite())
}

pub fn mean_sq(a: &[Complex64]) -> f64 {
    if a.is_empty() {
        0.0
    } else {
        norm_sq(a) / a.len() as f64
    }
}

/// Root mean square magnitude.
pub fn rms(a: &[Complex64]) -> f64 {
    mean_sq(a).sqrt()
}
