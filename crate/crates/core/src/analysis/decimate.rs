use crate::error::{Error, Result};

/// Median of a non-empty slice; even counts average the two middle values.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One point per window `[start, end]`: the window midpoint and the median of the
/// samples falling inside it.
pub fn median_decimate(raw: &[(f64, f64)], windows: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let mut sorted = windows.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in &sorted {
        if !(w.0 <= w.1) {
            return Err(Error::InvalidInputs(format!("window start {} after end {}", w.0, w.1)));
        }
    }
    for pair in sorted.windows(2) {
        if pair[1].0 <= pair[0].1 {
            return Err(Error::InvalidInputs(format!(
                "windows [{}, {}] and [{}, {}] overlap",
                pair[0].0, pair[0].1, pair[1].0, pair[1].1
            )));
        }
    }
    windows
        .iter()
        .map(|&(start, end)| {
            let inside: Vec<f64> = raw.iter().filter(|(t, _)| *t >= start && *t <= end).map(|p| p.1).collect();
            if inside.is_empty() {
                return Err(Error::EmptyWindow { start, end });
            }
            Ok((0.5 * (start + end), median(&inside)))
        })
        .collect()
}

/// Windows of width `width` centred on each point, for re-decimating decimated data.
pub fn windows_around(times: &[f64], width: f64) -> Vec<(f64, f64)> {
    times.iter().map(|&t| (t - width / 2.0, t + width / 2.0)).collect()
}
