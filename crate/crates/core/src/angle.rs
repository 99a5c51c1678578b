//! Degree-based trigonometry with exact values on multiples of 90°.

/// `(cos θ, sin θ)` for θ in degrees. Multiples of 90° return exact 0/±1 and
/// θ ± 180° returns exactly the negated pair.
pub fn cos_sin_deg(theta_deg: f64) -> (f64, f64) {
    let t = theta_deg.rem_euclid(360.0);
    let quadrant = (t / 90.0).floor();
    let r = t - 90.0 * quadrant;
    let (c, s) = if r == 0.0 {
        (1.0, 0.0)
    } else {
        let rad = r.to_radians();
        (rad.cos(), rad.sin())
    };
    match quadrant as i32 {
        0 => (c, s),
        1 => (-s, c),
        2 => (-c, -s),
        _ => (s, -c),
    }
}

/// Folds an angle into `[0, period)`.
pub fn fold_deg(angle_deg: f64, period_deg: f64) -> f64 {
    let f = angle_deg.rem_euclid(period_deg);
    // rem_euclid can round up to exactly `period` for tiny negative inputs
    if f >= period_deg {
        0.0
    } else {
        f
    }
}

/// Smallest absolute difference between two angles modulo `period_deg`.
pub fn angular_distance_deg(a: f64, b: f64, period_deg: f64) -> f64 {
    let d = fold_deg(a - b, period_deg);
    d.min(period_deg - d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_at_quarter_turns() {
        assert_eq!(cos_sin_deg(0.0), (1.0, 0.0));
        assert_eq!(cos_sin_deg(90.0), (0.0, 1.0));
        assert_eq!(cos_sin_deg(180.0), (-1.0, 0.0));
        assert_eq!(cos_sin_deg(270.0), (0.0, -1.0));
        assert_eq!(cos_sin_deg(-90.0), (0.0, -1.0));
    }

    #[test]
    fn half_turn_negates_exactly() {
        for k in 0..720 {
            let t = k as f64 * 0.25 - 50.0;
            let (c, s) = cos_sin_deg(t);
            let (c2, s2) = cos_sin_deg(t + 180.0);
            assert_eq!((c, s), (-c2, -s2), "theta {t}");
        }
    }

    #[test]
    fn matches_libm() {
        for k in 0..1000 {
            let t = k as f64 * 0.913 - 300.0;
            let (c, s) = cos_sin_deg(t);
            assert!((c - t.to_radians().cos()).abs() < 1e-13);
            assert!((s - t.to_radians().sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn folding() {
        assert_eq!(fold_deg(-30.0, 180.0), 150.0);
        assert_eq!(fold_deg(200.0, 90.0), 20.0);
        assert!((angular_distance_deg(179.5, 0.2, 180.0) - 0.7).abs() < 1e-12);
        assert!((angular_distance_deg(89.0, 1.0, 90.0) - 2.0).abs() < 1e-12);
    }
}
