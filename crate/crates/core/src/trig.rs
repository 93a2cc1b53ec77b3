//! Sine and cosine in half-turn units, exact at multiples of π/2.
//!
//! Angles such as `kπ` for large `k` lose their zeros when multiplied out in
//! radians; working in units of π and reducing modulo 2 first keeps them.

use std::f64::consts::PI;

/// Reduces `u` into `[0, 2)`.
#[inline]
pub fn reduce_halfturns(u: f64) -> f64 {
    let r = u % 2.0;
    let r = if r < 0.0 { r + 2.0 } else { r };
    if r >= 2.0 {
        0.0
    } else {
        r
    }
}

/// `(sin πu, cos πu)`.
pub fn sin_cos_pi(u: f64) -> (f64, f64) {
    let r = reduce_halfturns(u);
    // quadrant q and offset f in [-1/4, 1/4]
    let q = (r * 2.0).round();
    let f = r - q * 0.5;
    let (s, c) = if f == 0.0 { (0.0, 1.0) } else { (f * PI).sin_cos() };
    match q as i64 {
        0 | 4 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        3 => (-c, s),
        _ => unreachable!("quadrant out of range"),
    }
}

#[inline]
pub fn sin_pi(u: f64) -> f64 {
    sin_cos_pi(u).0
}

#[inline]
pub fn cos_pi(u: f64) -> f64 {
    sin_cos_pi(u).1
}

/// Wraps an angle in half-turns into `(-1, 1]`.
pub fn wrap_halfturns(u: f64) -> f64 {
    let r = reduce_halfturns(u);
    if r > 1.0 {
        r - 2.0
    } else {
        r
    }
}
