//! Gaussian widths of the T2′ dips at ϑ = π and ϑ = 2π.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions, Model};
use super::sweep::ThetaProfile;
use crate::error::{Error, Result};

/// Half-width of the fitting window, rad.
pub const DIP_HALF_WINDOW: f64 = 0.5;
/// Fewest profile points accepted inside the window.
pub const DIP_MIN_POINTS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipCenter {
    Pi,
    TwoPi,
}

impl DipCenter {
    pub fn angle(self) -> f64 {
        match self {
            DipCenter::Pi => PI,
            DipCenter::TwoPi => 2.0 * PI,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            DipCenter::Pi => "pi",
            DipCenter::TwoPi => "two_pi",
        }
    }
}

impl fmt::Display for DipCenter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Quantity the Gaussian is fitted to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipTarget {
    /// `1/T2′` normalized to its window maximum; a dip in T2′ is a peak in the rate.
    #[default]
    Rate,
    /// `−T2′`.
    Lifetime,
}

/// `b₀ + b₁(ϑ−c) + A exp(−(ϑ−μ)²/2σ²)`, parameters `[b₀, b₁, A, μ, σ]`.
struct PeakOnLine {
    center: f64,
    half_window: f64,
}

impl Model for PeakOnLine {
    fn num_params(&self) -> usize {
        5
    }

    fn eval(&self, p: &[f64], t: f64, g: &mut [f64]) -> f64 {
        let (b0, b1, a, mu, sigma) = (p[0], p[1], p[2], p[3], p[4]);
        let u = (t - mu) / sigma;
        let e = (-0.5 * u * u).exp();
        g[0] = 1.0;
        g[1] = t - self.center;
        g[2] = e;
        g[3] = a * e * u / sigma;
        g[4] = a * e * u * u / sigma;
        b0 + b1 * (t - self.center) + a * e
    }

    fn admissible(&self, p: &[f64]) -> bool {
        p[4] > 0.0 && p[4] <= 2.0 * self.half_window && (p[3] - self.center).abs() <= self.half_window
    }
}

/// Gaussian σ of the dip in `profile` at `center`, fitted to the rate.
pub fn dip_width(profile: &ThetaProfile, center: DipCenter) -> Result<f64> {
    dip_width_with(profile, center, DipTarget::Rate)
}

pub fn dip_width_with(profile: &ThetaProfile, center: DipCenter, target: DipTarget) -> Result<f64> {
    dip_width_points(&profile.thetas, &profile.t2prime_mean, center.angle(), target)
}

/// Fits a Gaussian feature on a linear baseline to the profile points within
/// `±DIP_HALF_WINDOW` of `center`; missing (NaN) points are skipped.
///
/// A dip is detected when the point nearest the centre lies below the straight line
/// joining the window's end values and the fitted feature points the right way.
pub fn dip_width_points(thetas: &[f64], t2prime: &[f64], center: f64, target: DipTarget) -> Result<f64> {
    if thetas.len() != t2prime.len() {
        return Err(Error::DimensionMismatch { left: thetas.len(), right: t2prime.len() });
    }
    let mut pts: Vec<(f64, f64)> = thetas
        .iter()
        .zip(t2prime)
        .filter(|(t, v)| (**t - center).abs() <= DIP_HALF_WINDOW * (1.0 + 1e-12) && !v.is_nan())
        .filter(|(_, v)| target == DipTarget::Rate || v.is_finite())
        .map(|(&t, &v)| (t, v))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.len() < DIP_MIN_POINTS {
        return Err(Error::InvalidInputs(format!(
            "dip window around {center:.4} holds {} usable points, need {DIP_MIN_POINTS}",
            pts.len()
        )));
    }
    let y: Vec<f64> = match target {
        DipTarget::Rate => pts.iter().map(|p| 1.0 / p.1).collect(),
        DipTarget::Lifetime => pts.iter().map(|p| -p.1).collect(),
    };
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::NoDipDetected { center });
    }
    let y: Vec<f64> = y.iter().map(|v| v / scale).collect();
    let t: Vec<f64> = pts.iter().map(|p| p.0).collect();

    let n = t.len();
    let line = |x: f64| y[0] + (y[n - 1] - y[0]) * (x - t[0]) / (t[n - 1] - t[0]);
    let i0 = (0..n).min_by(|&a, &b| (t[a] - center).abs().total_cmp(&(t[b] - center).abs())).unwrap();
    let height = y[i0] - line(t[i0]);
    if !(height > 0.0) {
        return Err(Error::NoDipDetected { center });
    }

    let model = PeakOnLine { center, half_window: DIP_HALF_WINDOW };
    let slope = (y[n - 1] - y[0]) / (t[n - 1] - t[0]);
    let b0 = line(center);
    // half-maximum width around the centre for the first start
    let half = line(t[i0]) + 0.5 * height;
    let mut lo = i0;
    while lo > 0 && y[lo - 1] > half {
        lo -= 1;
    }
    let mut hi = i0;
    while hi + 1 < n && y[hi + 1] > half {
        hi += 1;
    }
    let spacing = t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let fwhm = (t[hi] - t[lo]).max(spacing);
    let starts = [fwhm / 2.3548, 0.01, 0.05, 0.2];
    let mut best: Option<(f64, f64)> = None;
    for &s0 in &starts {
        let p0 = [b0, slope, height, center, s0.clamp(1e-4, DIP_HALF_WINDOW)];
        let Ok(out) = levenberg_marquardt(&model, &t, &y, &p0, &LmOptions::default()) else {
            continue;
        };
        if out.params[2] <= 0.0 {
            continue;
        }
        if best.is_none_or(|(rss, _)| out.rss < rss) {
            best = Some((out.rss, out.params[4]));
        }
    }
    best.map(|b| b.1).ok_or(Error::NoDipDetected { center })
}
