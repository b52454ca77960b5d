//! Damping of message updates: convex combination for the extrapolated
//! vectors, geometric (log-domain) combination for the precisions.

use num_complex::Complex64;

use crate::{Error, Result};

pub fn validate_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "damping factor must be in (0, 1], got {rho}"
        )));
    }
    Ok(())
}

/// `rho * new + (1 - rho) * old`, elementwise.
pub fn damp_vector(new: &[Complex64], old: &[Complex64], rho: f64) -> Vec<Complex64> {
    debug_assert_eq!(new.len(), old.len());
    new.iter()
        .zip(old)
        .map(|(n, o)| n * rho + o * (1.0 - rho))
        .collect()
}

/// `new^rho * old^(1-rho)`, elementwise. Keeps precisions positive and damps
/// their order of magnitude rather than their value.
pub fn damp_precisions(new: &[f64], old: &[f64], rho: f64) -> Vec<f64> {
    debug_assert_eq!(new.len(), old.len());
    new.iter()
        .zip(old)
        .map(|(n, o)| n.powf(rho) * o.powf(1.0 - rho))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_one_returns_the_new_value() {
        let new = [Complex64::new(1.0, 2.0), Complex64::new(-3.0, 0.5)];
        let old = [Complex64::new(9.0, 9.0), Complex64::new(9.0, 9.0)];
        assert_eq!(damp_vector(&new, &old, 1.0), new.to_vec());
        assert_eq!(damp_precisions(&[4.0, 0.25], &[9.0, 9.0], 1.0), vec![4.0, 0.25]);
    }

    #[test]
    fn vanishing_rho_returns_the_old_value() {
        let new = [Complex64::new(100.0, -100.0)];
        let old = [Complex64::new(2.0, 3.0)];
        let damped = damp_vector(&new, &old, 1e-9);
        assert!((damped[0] - old[0]).norm() < 1e-6);
        let gp = damp_precisions(&[100.0], &[2.0], 1e-9);
        assert!((gp[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn log_domain_combination() {
        // 100^0.4 * 1^0.6 = 10^0.8.
        let g = damp_precisions(&[100.0], &[1.0], 0.4);
        assert!((g[0] - 100f64.powf(0.4)).abs() < 1e-12);
        assert!((g[0] - 6.309573444801932).abs() < 1e-12);
    }

    #[test]
    fn damped_vector_stays_between_endpoints() {
        let new = [Complex64::new(10.0, 0.0)];
        let old = [Complex64::new(0.0, 0.0)];
        let damped = damp_vector(&new, &old, 0.4);
        assert!((damped[0].re - 4.0).abs() < 1e-15);
    }

    #[test]
    fn rho_validation() {
        assert!(validate_rho(0.4).is_ok());
        assert!(validate_rho(1.0).is_ok());
        assert!(validate_rho(0.0).is_err());
        assert!(validate_rho(-0.1).is_err());
        assert!(validate_rho(1.1).is_err());
        assert!(validate_rho(f64::NAN).is_err());
    }
}
