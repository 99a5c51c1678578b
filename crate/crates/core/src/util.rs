/// Fixed 17-significant-digit scientific notation: round-trips any f64 and
/// produces byte-identical text for identical values.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Linear-interpolation quantile of an unsorted sample (`q` in [0, 1]).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}
