//! Decay-curve fits: stretched exponential, biexponential and FID envelopes.

use log::warn;
use serde::{Deserialize, Serialize};

use super::lm::{covariance, levenberg_marquardt, LmOptions, Model};
use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Fitted stretch exponents at or above this trigger a warning.
const BETA_WARN: f64 = 2.9;
const BETA_MAX: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `A exp(−(t/T)^β)`, parameters `[A, T, β]`.
    StretchedExponential,
    /// `A₁ exp(−t/T₁) + A₂ exp(−t/T₂)`, parameters `[A₁, T₁, A₂, T₂]`.
    Biexponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    /// Fitted signal at `t = 0`.
    pub amplitude: f64,
    /// `T` for the stretched model; the 1/e time for the biexponential.
    pub time_constant: f64,
    /// `β` for the stretched model.
    pub stretch_beta: Option<f64>,
    pub params: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Time at which the fitted curve falls to `amplitude / e`.
    pub t2prime_1e: f64,
    /// Spread of the 1/e crossing over curves at the 95% parameter bounds.
    pub t2prime_ci: (f64, f64),
    pub rss: f64,
    pub iterations: usize,
}

struct Stretched;

impl Model for Stretched {
    fn num_params(&self) -> usize {
        3
    }

    fn eval(&self, p: &[f64], t: f64, g: &mut [f64]) -> f64 {
        let (a, tc, beta) = (p[0], p[1], p[2]);
        if t <= 0.0 {
            g[0] = 1.0;
            g[1] = 0.0;
            g[2] = 0.0;
            return a;
        }
        let ln_r = (t / tc).ln();
        let x = (beta * ln_r).exp();
        let e = (-x).exp();
        g[0] = e;
        g[1] = a * e * x * beta / tc;
        g[2] = -a * e * x * ln_r;
        a * e
    }

    fn admissible(&self, p: &[f64]) -> bool {
        p[0] > 0.0 && p[1] > 0.0 && p[2] > 0.0 && p[2] <= BETA_MAX
    }
}

struct Biexp;

impl Model for Biexp {
    fn num_params(&self) -> usize {
        4
    }

    fn eval(&self, p: &[f64], t: f64, g: &mut [f64]) -> f64 {
        let e1 = (-t / p[1]).exp();
        let e2 = (-t / p[3]).exp();
        g[0] = e1;
        g[1] = p[0] * e1 * t / (p[1] * p[1]);
        g[2] = e2;
        g[3] = p[2] * e2 * t / (p[3] * p[3]);
        p[0] * e1 + p[2] * e2
    }

    fn admissible(&self, p: &[f64]) -> bool {
        p[1] > 0.0 && p[3] > 0.0 && p[0] + p[2] > 0.0
    }
}

fn split(points: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    points.iter().copied().unzip()
}

fn check_points(points: &[(f64, f64)], k: usize) -> Result<()> {
    if points.len() < 5.max(k + 1) {
        return Err(Error::DegenerateData(format!("need at least {} points, got {}", 5.max(k + 1), points.len())));
    }
    if points.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
        return Err(Error::DegenerateData("non-finite sample".into()));
    }
    if points.iter().any(|(t, _)| *t <= 0.0) {
        return Err(Error::DegenerateData("times must be positive".into()));
    }
    let mut ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    if ys.len() < k {
        return Err(Error::DegenerateData(format!("only {} distinct values for {k} parameters", ys.len())));
    }
    if points.first().map(|p| p.1) < points.last().map(|p| p.1) {
        warn!("decay data trend is increasing; fit may be meaningless");
    }
    Ok(())
}

/// Documented start: `A₀` = first sample, `T₀` = first time below `A₀/e` (last time if
/// none), `β₀ = 1`.
fn initial_guess(points: &[(f64, f64)]) -> (f64, f64) {
    let a0 = points[0].1;
    let target = a0 / std::f64::consts::E;
    let t0 = points
        .iter()
        .find(|(_, y)| *y < target)
        .map(|p| p.0)
        .unwrap_or(points[points.len() - 1].0);
    (a0, t0)
}

fn cov_rows(c: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..c.nrows()).map(|i| (0..c.ncols()).map(|j| c[(i, j)]).collect()).collect()
}

/// Least-squares fit of `A exp(−(t/T)^β)`; the 1/e crossing of such a curve is `T`.
pub fn fit_stretched_exp(points: &[(f64, f64)]) -> Result<FitResult> {
    check_points(points, 3)?;
    let (t, y) = split(points);
    let (a0, t0) = initial_guess(points);
    if !(a0 > 0.0) {
        return Err(Error::DegenerateData("first sample must be positive".into()));
    }
    let out = levenberg_marquardt(&Stretched, &t, &y, &[a0, t0, 1.0], &LmOptions::default())?;
    let cov = covariance(&out, t.len());
    let (a, tc, beta) = (out.params[0], out.params[1], out.params[2]);
    if beta >= BETA_WARN {
        warn!("stretch exponent {beta:.3} close to the guard at {BETA_MAX}");
    }
    let target = a / std::f64::consts::E;
    let sd: Vec<f64> = (0..3).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let mut lo = tc;
    let mut hi = tc;
    for corner in 0..8u32 {
        let pick = |i: usize| if corner >> i & 1 == 1 { 1.0 } else { -1.0 };
        let ac = a + pick(0) * Z95 * sd[0];
        let tcc = (tc + pick(1) * Z95 * sd[1]).max(f64::MIN_POSITIVE);
        let bc = (beta + pick(2) * Z95 * sd[2]).clamp(f64::MIN_POSITIVE, BETA_MAX);
        // A' exp(−(t/T')^β') = A/e  ⇒  t = T' (1 + ln(A'/A))^{1/β'}
        let arg = if ac > 0.0 { 1.0 + (ac / a).ln() } else { 0.0 };
        let cross = if arg > 0.0 { tcc * arg.powf(1.0 / bc) } else { 0.0 };
        lo = lo.min(cross);
        hi = hi.max(cross);
    }
    let _ = target;
    Ok(FitResult {
        model: FitModel::StretchedExponential,
        amplitude: a,
        time_constant: tc,
        stretch_beta: Some(beta),
        params: out.params.clone(),
        covariance: cov_rows(&cov),
        t2prime_1e: tc,
        t2prime_ci: (lo, hi),
        rss: out.rss,
        iterations: out.iterations,
    })
}

fn biexp_value(p: &[f64], t: f64) -> f64 {
    p[0] * (-t / p[1]).exp() + p[2] * (-t / p[3]).exp()
}

/// First `t ≥ 0` where `f(t) = target`, by bracketing and bisection; `None` if the
/// curve never falls that low.
pub fn first_crossing(f: impl Fn(f64) -> f64, target: f64, scale: f64) -> Option<f64> {
    if f(0.0) <= target {
        return Some(0.0);
    }
    let mut lo = 0.0;
    let mut hi = scale.max(f64::MIN_POSITIVE);
    let mut found = false;
    for _ in 0..200 {
        if f(hi) <= target {
            found = true;
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    if !found {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Least-squares biexponential fit; T2′ is where the fitted curve reaches `f(0)/e`.
pub fn fit_biexponential(points: &[(f64, f64)]) -> Result<FitResult> {
    check_points(points, 4)?;
    let (t, y) = split(points);
    let (a0, t0) = initial_guess(points);
    if !(a0 > 0.0) {
        return Err(Error::DegenerateData("first sample must be positive".into()));
    }
    let p0 = [0.5 * a0, 0.5 * t0, 0.5 * a0, 2.0 * t0];
    let out = levenberg_marquardt(&Biexp, &t, &y, &p0, &LmOptions::default())?;
    let cov = covariance(&out, t.len());
    let p = out.params.clone();
    let amp = p[0] + p[2];
    let target = amp / std::f64::consts::E;
    let scale = p[1].max(p[3]);
    let t1e = first_crossing(|x| biexp_value(&p, x), target, scale)
        .ok_or_else(|| Error::DegenerateData("fitted curve never reaches 1/e".into()))?;
    let sd: Vec<f64> = (0..4).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let mut lo = t1e;
    let mut hi = t1e;
    for corner in 0..16u32 {
        let mut q = p.clone();
        for (i, qi) in q.iter_mut().enumerate() {
            let s = if corner >> i & 1 == 1 { 1.0 } else { -1.0 };
            *qi += s * Z95 * sd[i];
        }
        q[1] = q[1].max(f64::MIN_POSITIVE);
        q[3] = q[3].max(f64::MIN_POSITIVE);
        match first_crossing(|x| biexp_value(&q, x), target, scale) {
            Some(c) => {
                lo = lo.min(c);
                hi = hi.max(c);
            }
            None => hi = f64::INFINITY,
        }
    }
    Ok(FitResult {
        model: FitModel::Biexponential,
        amplitude: amp,
        time_constant: t1e,
        stretch_beta: None,
        params: p,
        covariance: cov_rows(&cov),
        t2prime_1e: t1e,
        t2prime_ci: (lo, hi),
        rss: out.rss,
        iterations: out.iterations,
    })
}

/// Relative decay over the envelope span below which the envelope counts as flat.
const FLAT_ENVELOPE: f64 = 1e-6;

/// Local maxima of `|s|`, refined by a parabola through each peak and its neighbours.
/// A trace without interior maxima is returned whole.
pub fn envelope_points(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let n = points.len();
    let a: Vec<f64> = points.iter().map(|p| p.1.abs()).collect();
    let mut peaks = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if a[i] >= a[i - 1] && a[i] > a[i + 1] {
            let (t0, t1, t2) = (points[i - 1].0, points[i].0, points[i + 1].0);
            let (y0, y1, y2) = (a[i - 1], a[i], a[i + 1]);
            let h = t1 - t0;
            let uniform = ((t2 - t1) - h).abs() <= 1e-9 * h.abs();
            let denom = y0 - 2.0 * y1 + y2;
            if uniform && denom < 0.0 {
                let d = 0.5 * (y0 - y2) / denom;
                peaks.push((t1 + d * h, y1 - 0.25 * (y0 - y2) * d));
            } else {
                peaks.push((t1, y1));
            }
        }
    }
    if peaks.is_empty() {
        return points.iter().map(|p| (p.0, p.1.abs())).collect();
    }
    if n >= 2 && a[0] > a[1] {
        peaks.insert(0, (points[0].0, a[0]));
    }
    peaks
}

/// T2* from a log-linear fit to the envelope of an oscillating decay; `+∞` when the
/// envelope does not decay.
pub fn fit_fid_envelope(points: &[(f64, f64)]) -> Result<f64> {
    let env: Vec<(f64, f64)> = envelope_points(points).into_iter().filter(|p| p.1 > 0.0).collect();
    if env.len() < 3 {
        return Err(Error::TooFewExtrema { found: env.len() });
    }
    let n = env.len() as f64;
    let mt = env.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = env.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = env.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = env.iter().map(|p| (p.0 - mt) * (p.1.ln() - ml)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateData("envelope points share one time".into()));
    }
    let rate = -sxy / sxx;
    let span = env[env.len() - 1].0 - env[0].0;
    if rate * span <= FLAT_ENVELOPE {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stretched(a: f64, t: f64, b: f64, n: usize, span: f64) -> Vec<(f64, f64)> {
        (1..=n)
            .map(|i| {
                let x = span * i as f64 / n as f64;
                (x, a * (-(x / t).powf(b)).exp())
            })
            .collect()
    }

    #[test]
    fn noiseless_stretched_recovery() {
        for beta in [0.5, 0.8, 1.0, 1.5] {
            let pts = stretched(1.0, 0.5, beta, 100, 2.0);
            let f = fit_stretched_exp(&pts).unwrap();
            assert!((f.time_constant / 0.5 - 1.0).abs() < 1e-3, "beta {beta}: {f:?}");
            assert!((f.stretch_beta.unwrap() / beta - 1.0).abs() < 1e-3);
            assert!(f.t2prime_ci.0 <= f.t2prime_1e && f.t2prime_1e <= f.t2prime_ci.1);
        }
    }

    #[test]
    fn too_few_points() {
        let pts = stretched(1.0, 0.5, 1.0, 4, 2.0);
        assert!(matches!(fit_stretched_exp(&pts), Err(Error::DegenerateData(_))));
        let flat: Vec<(f64, f64)> = (1..10).map(|i| (i as f64, 1.0)).collect();
        assert!(matches!(fit_stretched_exp(&flat), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn crossing_bisection() {
        let c = first_crossing(|t| (-t).exp(), (-1.0f64).exp(), 0.1).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        assert_eq!(first_crossing(|_| 1.0, 0.5, 1.0), None);
    }
}
