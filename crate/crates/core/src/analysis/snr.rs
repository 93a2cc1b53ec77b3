use crate::error::{Error, Result};

/// Bounds `(√((1−η_d)T2′/T2*), (1−η_d)T2′/T2*)` on the SNR gain over plain FID detection.
pub fn snr_bounds(t2_star: f64, t2_prime: f64, eta_d: f64) -> Result<(f64, f64)> {
    if !(t2_star > 0.0) || !t2_star.is_finite() {
        return Err(Error::InvalidInputs(format!("T2* must be positive and finite, got {t2_star}")));
    }
    if !(t2_prime > 0.0) || !t2_prime.is_finite() {
        return Err(Error::InvalidInputs(format!("T2' must be positive and finite, got {t2_prime}")));
    }
    if !(0.0..=1.0).contains(&eta_d) {
        return Err(Error::InvalidInputs(format!("duty cycle must lie in [0, 1], got {eta_d}")));
    }
    let upper = (1.0 - eta_d) * t2_prime / t2_star;
    Ok((upper.sqrt(), upper))
}

/// Acquired signal per unit time, `η_d(1−η_d)`.
pub fn signal_yield(eta_d: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta_d) {
        return Err(Error::InvalidInputs(format!("duty cycle must lie in [0, 1], got {eta_d}")));
    }
    Ok(eta_d * (1.0 - eta_d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(snr_bounds(1.0, 1.0, 0.0).unwrap(), (1.0, 1.0));
        assert_eq!(snr_bounds(1.0, 5.0, 1.0).unwrap(), (0.0, 0.0));
        let (lo, hi) = snr_bounds(517e-6, 2.147, 0.6).unwrap();
        assert!((lo - 40.75).abs() < 0.01 && (hi - 1661.1).abs() < 0.1, "{lo} {hi}");
        assert!(snr_bounds(0.0, 1.0, 0.5).is_err());
        assert!(snr_bounds(1.0, 1.0, 1.5).is_err());
        assert_eq!(signal_yield(0.5).unwrap(), 0.25);
        assert_eq!(signal_yield(0.25).unwrap(), signal_yield(0.75).unwrap());
        assert_eq!(signal_yield(1.0).unwrap(), 0.0);
    }
}
