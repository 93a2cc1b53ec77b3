//! The flip-angle pulse train: timing, named special cases, duty cycle and
//! convergence length.
//!
//! A cycle lasts `τ = t_p + t_acq + t_d`. Pulses are instantaneous rotations placed
//! at `t_1 + (k − 1)τ` after preparation and the state is sampled at `nτ`; `t_p`
//! only counts toward the cycle period.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trig::wrap_halfturns;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceParams {
    /// Flip angle, rad.
    pub theta: f64,
    /// Pulse width, s.
    pub t_p: f64,
    /// Acquisition window, s.
    pub t_acq: f64,
    /// Dead time, s.
    pub t_d: f64,
    /// Delay before the first pulse, s.
    pub t_1: f64,
    pub n_pulses: usize,
    /// Nominal Rabi frequency, Hz. Absent for hand-built trains.
    pub rabi_omega: Option<f64>,
}

/// Builds a train whose pulse width follows from `theta = 2π Ω t_p`.
///
/// `theta = 0` is accepted and gives a zero-width pulse (free evolution).
pub fn make_sequence(theta: f64, t_acq: f64, t_d: f64, t_1: f64, n_pulses: usize, rabi_omega: f64) -> Result<SequenceParams> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::InvalidTiming(format!("theta must be finite and >= 0, got {theta}")));
    }
    if !(rabi_omega > 0.0) || !rabi_omega.is_finite() {
        return Err(Error::InvalidTiming(format!("rabi_omega must be > 0, got {rabi_omega}")));
    }
    let seq = SequenceParams {
        theta,
        t_p: theta / (2.0 * PI * rabi_omega),
        t_acq,
        t_d,
        t_1,
        n_pulses,
        rabi_omega: Some(rabi_omega),
    };
    seq.validate()?;
    Ok(seq)
}

impl SequenceParams {
    /// Cycle period `τ`.
    pub fn tau(&self) -> f64 {
        self.t_p + self.t_acq + self.t_d
    }

    /// Flip angle in units of π.
    pub fn theta_halfturns(&self) -> f64 {
        self.theta / PI
    }

    /// Sampling times `nτ`, `n = 1..=N`.
    pub fn sample_times(&self) -> Vec<f64> {
        let tau = self.tau();
        (1..=self.n_pulses).map(|n| n as f64 * tau).collect()
    }

    pub fn total_time(&self) -> f64 {
        self.n_pulses as f64 * self.tau()
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        match self.rabi_omega {
            Some(omega) => make_sequence(theta, self.t_acq, self.t_d, self.t_1, self.n_pulses, omega),
            None => {
                let s = Self { theta, ..*self };
                s.validate()?;
                Ok(s)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t_p", self.t_p), ("t_acq", self.t_acq), ("t_d", self.t_d), ("t_1", self.t_1)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidTiming(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidTiming("theta must be finite".into()));
        }
        let tau = self.tau();
        if !(tau > 0.0) {
            return Err(Error::InvalidTiming("cycle period must be positive".into()));
        }
        if self.n_pulses < 1 {
            return Err(Error::InvalidTiming("need at least one cycle".into()));
        }
        if self.t_1 > tau {
            return Err(Error::InvalidTiming(format!("t_1 = {} exceeds the cycle period {tau}", self.t_1)));
        }
        if let Some(omega) = self.rabi_omega {
            let expect = 2.0 * PI * omega * self.t_p;
            if (expect - self.theta.abs()).abs() > 1e-9 * self.theta.abs().max(f64::MIN_POSITIVE) && self.theta != 0.0 {
                return Err(Error::InvalidTiming(format!(
                    "theta {} inconsistent with 2π·Ω·t_p = {expect}",
                    self.theta
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialCase {
    Cpmg,
    WaughOstroff,
    SpinLock,
    Fid,
}

impl FromStr for SpecialCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "cpmg" => Ok(Self::Cpmg),
            "waugh_ostroff" | "wahuha" | "wo" => Ok(Self::WaughOstroff),
            "spin_lock" | "spinlock" => Ok(Self::SpinLock),
            "fid" => Ok(Self::Fid),
            _ => Err(Error::UnknownCase(s.to_string())),
        }
    }
}

impl fmt::Display for SpecialCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cpmg => "cpmg",
            Self::WaughOstroff => "waugh_ostroff",
            Self::SpinLock => "spin_lock",
            Self::Fid => "fid",
        })
    }
}

/// Applies a named variant to `base`.
///
/// `fid` keeps `N` as the number of samples and removes the pulses (zero angle and
/// zero width), so the curve is sampled on the same `n(t_acq + t_d)` grid.
pub fn special_case(name: &str, base: &SequenceParams) -> Result<SequenceParams> {
    apply_case(name.parse()?, base)
}

pub fn apply_case(case: SpecialCase, base: &SequenceParams) -> Result<SequenceParams> {
    base.validate()?;
    let seq = match case {
        SpecialCase::Cpmg => {
            let s = base.with_theta(PI)?;
            SequenceParams { t_1: (s.t_acq + s.t_d) / 2.0, ..s }
        }
        SpecialCase::WaughOstroff => SequenceParams { t_1: 0.0, ..base.with_theta(PI / 2.0)? },
        SpecialCase::SpinLock => {
            let s = SequenceParams { t_acq: 0.0, t_d: 0.0, ..*base };
            SequenceParams { t_1: s.t_1.min(s.tau()), ..s }
        }
        SpecialCase::Fid => SequenceParams { theta: 0.0, t_p: 0.0, t_1: 0.0, ..*base },
    };
    seq.validate()?;
    Ok(seq)
}

/// Fraction of the cycle spent pulsing, `t_p / τ`.
pub fn duty_cycle(seq: &SequenceParams) -> f64 {
    seq.t_p / seq.tau()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interaction {
    /// Bilinear couplings: toggling phase advances by `2ϑ` per pulse.
    Dipolar,
    /// On-site fields: toggling phase advances by `ϑ` per pulse.
    Dephasing,
}

/// Pulses needed for the wrapped toggling phase to sweep a full turn,
/// `ceil(2π / |wrap(step)|)`.
pub fn convergence_length(theta: f64, interaction: Interaction) -> Result<u64> {
    let u = theta / PI;
    let step = match interaction {
        Interaction::Dipolar => 2.0 * u,
        Interaction::Dephasing => u,
    };
    let w = wrap_halfturns(step).abs();
    if w < 1e-12 {
        return Err(Error::Recoupled { theta });
    }
    Ok((2.0 / w).ceil() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const US: f64 = 1e-6;

    #[test]
    fn pulse_width_from_rabi() {
        let s = make_sequence(PI, 32.0 * US, 6.0 * US, 0.0, 10, 11.4e3).unwrap();
        assert!((s.t_p - 43.86e-6).abs() < 0.01e-6);
        assert!((s.tau() - 81.86e-6).abs() < 0.01e-6);
        let h = make_sequence(PI / 2.0, 32.0 * US, 6.0 * US, 0.0, 10, 11.4e3).unwrap();
        assert_eq!(h.t_p * 2.0, s.t_p);
        assert!((2.0 * PI * s.t_p * 11.4e3 - PI).abs() < 1e-9 * PI);
    }

    #[test]
    fn rejects_negative_times() {
        assert!(matches!(make_sequence(PI, -1.0, 0.0, 0.0, 1, 1e3), Err(Error::InvalidTiming(_))));
        assert!(matches!(make_sequence(-PI, 1.0, 0.0, 0.0, 1, 1e3), Err(Error::InvalidTiming(_))));
        assert!(matches!(make_sequence(PI, 1.0, 0.0, 0.0, 0, 1e3), Err(Error::InvalidTiming(_))));
    }

    #[test]
    fn named_cases() {
        let base = make_sequence(1.0, 32.0 * US, 8.0 * US, 0.0, 100, 11.4e3).unwrap();
        let c = special_case("cpmg", &base).unwrap();
        assert_eq!(c.theta, PI);
        assert!((c.t_1 - 20.0 * US).abs() < 1e-18);
        let w = special_case("waugh_ostroff", &base).unwrap();
        assert_eq!(w.theta, PI / 2.0);
        assert_eq!(w.t_1, 0.0);
        let l = special_case("spin_lock", &base).unwrap();
        assert_eq!(l.tau(), l.t_p);
        assert_eq!(duty_cycle(&l), 1.0);
        let f = special_case("fid", &base).unwrap();
        assert_eq!(f.theta, 0.0);
        assert_eq!(f.n_pulses, 100);
        assert!(matches!(special_case("hahn", &base), Err(Error::UnknownCase(_))));
    }

    #[test]
    fn duty_cycle_closed_form() {
        let omega = 11.4e3;
        for theta in [0.1, 1.0, PI, 5.0] {
            let s = make_sequence(theta, 32.0 * US, 0.0, 0.0, 1, omega).unwrap();
            let expect = 1.0 / (1.0 + 2.0 * PI * omega * 32.0 * US / theta);
            assert!((duty_cycle(&s) - expect).abs() < 1e-12);
        }
        let tp = PI / (2.0 * PI * omega);
        let half = make_sequence(PI, tp / 2.0, tp / 2.0, 0.0, 1, omega).unwrap();
        assert!((duty_cycle(&half) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn convergence_lengths() {
        assert_eq!(convergence_length(PI / 2.0, Interaction::Dipolar).unwrap(), 2);
        assert_eq!(convergence_length(PI, Interaction::Dephasing).unwrap(), 2);
        let l = convergence_length(PI + 0.01, Interaction::Dipolar).unwrap();
        assert_eq!(l, (2.0 * PI / 0.02_f64).ceil() as u64);
        assert!(matches!(convergence_length(PI, Interaction::Dipolar), Err(Error::Recoupled { .. })));
        assert!(matches!(convergence_length(2.0 * PI, Interaction::Dephasing), Err(Error::Recoupled { .. })));
        for i in 1..50 {
            let t = 0.123 * i as f64;
            if (t / PI).fract().abs() < 1e-6 {
                continue;
            }
            assert_eq!(
                convergence_length(t, Interaction::Dipolar).unwrap(),
                convergence_length(2.0 * PI - t, Interaction::Dipolar).unwrap()
            );
        }
    }
}
