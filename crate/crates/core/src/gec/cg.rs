//! Conjugate gradients for Hermitian positive definite systems given as
//! matrix-free products.

use num_complex::Complex64;

use crate::linalg;
use crate::{Error, Result};

#[derive(Debug)]
pub struct CgOutcome {
    pub solution: Vec<Complex64>,
    pub iterations: usize,
    /// Final residual norm relative to the right-hand side norm.
    pub relative_residual: f64,
}

/// Solves `A x = b` for Hermitian positive definite `A`, optionally
/// warm-started. Converges when `||b - Ax|| <= tolerance * ||b||`; a zero
/// right-hand side short-circuits to the zero solution.
pub fn solve_hpd<F>(
    apply: F,
    b: &[Complex64],
    warm_start: Option<&[Complex64]>,
    tolerance: f64,
    max_iterations: usize,
) -> Result<CgOutcome>
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let b_norm = linalg::norm(b);
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            solution: vec![Complex64::ZERO; b.len()],
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let mut x = match warm_start {
        Some(x0) => {
            debug_assert_eq!(x0.len(), b.len());
            x0.to_vec()
        }
        None => vec![Complex64::ZERO; b.len()],
    };
    let mut residual = if warm_start.is_some() {
        linalg::sub(b, &apply(&x))
    } else {
        b.to_vec()
    };
    let mut rs = linalg::norm_sq(&residual);
    if rs.sqrt() <= tolerance * b_norm {
        return Ok(CgOutcome {
            solution: x,
            iterations: 0,
            relative_residual: rs.sqrt() / b_norm,
        });
    }

    let mut direction = residual.clone();
    for k in 1..=max_iterations {
        let a_dir = apply(&direction);
        // p^H A p is real for Hermitian A; take the real part to shed
        // rounding in the imaginary component.
        let curvature = linalg::dot(&direction, &a_dir).re;
        if !curvature.is_finite() || curvature <= 0.0 {
            return Err(Error::CgNoConvergence {
                residual: rs.sqrt() / b_norm,
                tolerance,
                iterations: k,
            });
        }
        let alpha = Complex64::new(rs / curvature, 0.0);
        linalg::axpy(&mut x, alpha, &direction);
        linalg::axpy(&mut residual, -alpha, &a_dir);
        let rs_next = linalg::norm_sq(&residual);
        if rs_next.sqrt() <= tolerance * b_norm {
            return Ok(CgOutcome {
                solution: x,
                iterations: k,
                relative_residual: rs_next.sqrt() / b_norm,
            });
        }
        let beta = Complex64::new(rs_next / rs, 0.0);
        for (d, r) in direction.iter_mut().zip(&residual) {
            *d = r + beta * *d;
        }
        rs = rs_next;
    }
    Err(Error::CgNoConvergence {
        residual: rs.sqrt() / b_norm,
        tolerance,
        iterations: max_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::{standard_complex_normal, DenseOp, LinearOperator};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    /// G^H G + I applied through the dense op: Hermitian positive definite
    /// with eigenvalues >= 1.
    fn hpd_apply(op: &DenseOp) -> impl Fn(&[Complex64]) -> Vec<Complex64> + '_ {
        |x: &[Complex64]| {
            let mut out = op.apply_adjoint(&op.apply(x));
            for (o, xi) in out.iter_mut().zip(x) {
                *o += xi;
            }
            out
        }
    }

    fn random_vec(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..n).map(|_| standard_complex_normal(&mut rng)).collect()
    }

    #[test]
    fn recovers_known_solution() {
        let op = DenseOp::gaussian(24, 16, 5);
        let x_true = random_vec(16, 6);
        let b = hpd_apply(&op)(&x_true);
        let out = solve_hpd(hpd_apply(&op), &b, None, 1e-12, 200).unwrap();
        assert!(crate::linalg::rel_err(&out.solution, &x_true) < 1e-10);
        assert!(out.relative_residual <= 1e-12);
    }

    #[test]
    fn zero_rhs_returns_zero_immediately() {
        let op = DenseOp::gaussian(8, 8, 1);
        let b = vec![Complex64::ZERO; 8];
        let out = solve_hpd(hpd_apply(&op), &b, None, 1e-10, 10).unwrap();
        assert!(out.solution.iter().all(|v| v.norm() == 0.0));
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn warm_start_at_solution_converges_without_iterating() {
        let op = DenseOp::gaussian(24, 16, 7);
        let x_true = random_vec(16, 8);
        let b = hpd_apply(&op)(&x_true);
        let exact = solve_hpd(hpd_apply(&op), &b, None, 1e-13, 300).unwrap();
        let warm = solve_hpd(hpd_apply(&op), &b, Some(&exact.solution), 1e-10, 10).unwrap();
        assert_eq!(warm.iterations, 0);
    }

    #[test]
    fn identity_system_converges_in_one_step() {
        let b = random_vec(32, 9);
        let out = solve_hpd(|x| x.to_vec(), &b, None, 1e-14, 5).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(crate::linalg::rel_err(&out.solution, &b) < 1e-14);
    }

    #[test]
    fn iteration_budget_exhaustion_reports_residual() {
        let op = DenseOp::gaussian(64, 48, 11);
        let b = random_vec(48, 12);
        let err = solve_hpd(hpd_apply(&op), &b, None, 1e-14, 2).unwrap_err();
        match err {
            Error::CgNoConvergence {
                residual,
                tolerance,
                iterations,
            } => {
                assert!(residual > tolerance);
                assert_eq!(iterations, 2);
            }
            other => panic!("unexpected error {other}"),
        }
    }
}
