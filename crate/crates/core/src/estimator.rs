//! Moment curves of rotated channel projections and their harmonic fits.
//!
//! The 2nd-order curve E[(cos θ·x₁ + sin θ·x₂)²] is fitted as
//! `q1 + q2·cos 2(θ − θ0)` and the 4th-order curve of whitened data as
//! `p1 + p2·cos 2(φ − φ0) + p3·cos 4(φ − φ0)`. Both fits are linear least
//! squares in a harmonic basis; amplitudes and phases are read off afterwards.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::angle::{cos_sin_deg, fold_deg};
use crate::error::{Error, Result};
use crate::sampler::SampleSet;

/// `q2 / q1` below this marks the principal direction as unreliable.
pub const PCA_DEGENERACY_RATIO: f64 = 1e-3;
/// 4th-order harmonic amplitude must exceed this many residual (or sampling) standard errors.
pub const ICA_NOISE_FACTOR: f64 = 5.0;
/// ...and this fraction of the curve mean.
pub const ICA_RELATIVE_FLOOR: f64 = 1e-3;
/// Relative singular-value floor for the harmonic design matrix.
const RANK_TOL: f64 = 1e-10;
/// Angles closer than this (mod 180°) count as one.
const DISTINCT_TOL_DEG: f64 = 1e-9;

/// Projection angles, each in `[0°, 180°)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngleGrid {
    angles_deg: Vec<f64>,
}

impl AngleGrid {
    pub fn new(angles_deg: Vec<f64>) -> Result<Self> {
        if angles_deg.is_empty() {
            return Err(Error::config("angle grid is empty"));
        }
        if let Some(a) = angles_deg
            .iter()
            .find(|a| !(a.is_finite() && (0.0..180.0).contains(*a)))
        {
            return Err(Error::config(format!("angle {a} is outside [0, 180)")));
        }
        Ok(Self { angles_deg })
    }

    /// `n` equally spaced angles starting at 0°.
    pub fn uniform(n: usize) -> Self {
        Self {
            angles_deg: (0..n).map(|k| 180.0 * k as f64 / n as f64).collect(),
        }
    }

    /// {0°, 45°, 90°, 135°}
    pub fn default_theta() -> Self {
        Self::uniform(4)
    }

    /// {0°, 22.5°, …, 157.5°}
    pub fn default_phi() -> Self {
        Self::uniform(8)
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn len(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles_deg.is_empty()
    }

    pub fn distinct_count(&self) -> usize {
        distinct_mod_180(self.angles_deg.iter().copied())
    }
}

fn distinct_mod_180(angles: impl Iterator<Item = f64>) -> usize {
    let mut folded: Vec<f64> = angles.map(|a| fold_deg(a, 180.0)).collect();
    folded.sort_by(f64::total_cmp);
    folded.dedup_by(|b, a| (*b - *a).abs() < DISTINCT_TOL_DEG);
    if folded.len() > 1 && folded[0] + 180.0 - folded[folded.len() - 1] < DISTINCT_TOL_DEG {
        folded.pop();
    }
    folded.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentOrder {
    Second,
    Fourth,
}

impl MomentOrder {
    pub fn power(self) -> i32 {
        match self {
            MomentOrder::Second => 2,
            MomentOrder::Fourth => 4,
        }
    }

    /// Distinct angles (mod 180°) needed to fit the curve model.
    pub fn min_angles(self) -> usize {
        match self {
            MomentOrder::Second => 3,
            MomentOrder::Fourth => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub angle_deg: f64,
    pub moment: f64,
}

/// `cos θ·ch1 + sin θ·ch2`, elementwise.
pub fn project(s: &SampleSet, theta_deg: f64) -> Result<Vec<f64>> {
    let (x1, x2) = s.pair()?;
    let (c, sn) = cos_sin_deg(theta_deg);
    Ok(x1.iter().zip(x2).map(|(a, b)| c * a + sn * b).collect())
}

fn mean_power(x: &[f64], power: i32) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptySampleSet("moment of an empty sequence".into()));
    }
    Ok(x.iter().map(|v| v.powi(power)).sum::<f64>() / x.len() as f64)
}

pub fn second_moment(x: &[f64]) -> Result<f64> {
    mean_power(x, 2)
}

pub fn fourth_moment(x: &[f64]) -> Result<f64> {
    mean_power(x, 4)
}

/// Moment of the projection at one angle (any real angle).
pub fn moment_at(s: &SampleSet, theta_deg: f64, order: MomentOrder) -> Result<f64> {
    mean_power(&project(s, theta_deg)?, order.power())
}

pub fn moment_curve(
    s: &SampleSet,
    grid: &AngleGrid,
    order: MomentOrder,
) -> Result<Vec<CurvePoint>> {
    let distinct = grid.distinct_count();
    if distinct < order.min_angles() {
        return Err(Error::InsufficientAngles {
            required: order.min_angles(),
            got: distinct,
        });
    }
    grid.angles_deg()
        .iter()
        .map(|&a| {
            Ok(CurvePoint {
                angle_deg: a,
                moment: moment_at(s, a, order)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentFit {
    pub q1: f64,
    pub q2: f64,
    pub theta0_deg: f64,
    pub residual_rms: f64,
    /// `q2 < 1e-3·q1`: the principal direction is noise.
    pub degenerate: bool,
}

impl SecondMomentFit {
    pub fn eval(&self, theta_deg: f64) -> f64 {
        self.q1 + self.q2 * cos_sin_deg(2.0 * (theta_deg - self.theta0_deg)).0
    }

    /// Variances along the first and second principal components.
    pub fn principal_variances(&self) -> (f64, f64) {
        (self.q1 + self.q2, self.q1 - self.q2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourthMomentFit {
    pub p1: f64,
    pub p2: f64,
    /// Always ≤ 0: `phi0_deg` is the minimizer of the 4φ harmonic.
    pub p3: f64,
    pub phi0_deg: f64,
    pub residual_rms: f64,
    pub identifiable: bool,
    /// Amplitude `|p3|` had to exceed this for the fit to be identifiable.
    pub threshold: f64,
}

impl FourthMomentFit {
    pub fn eval(&self, phi_deg: f64) -> f64 {
        let d = phi_deg - self.phi0_deg;
        self.p1 + self.p2 * cos_sin_deg(2.0 * d).0 + self.p3 * cos_sin_deg(4.0 * d).0
    }
}

/// Harmonic least squares: returns coefficients of
/// [1, cos 2a, sin 2a, (cos 4a, sin 4a)] and the residual RMS.
fn harmonic_lsq(curve: &[CurvePoint], order: MomentOrder) -> Result<(Vec<f64>, f64)> {
    let required = order.min_angles();
    let distinct = distinct_mod_180(curve.iter().map(|p| p.angle_deg));
    if distinct < required {
        return Err(Error::InsufficientAngles {
            required,
            got: distinct,
        });
    }
    let cols = required;
    let design = DMatrix::from_fn(curve.len(), cols, |r, c| {
        let a = curve[r].angle_deg;
        match c {
            0 => 1.0,
            1 => cos_sin_deg(2.0 * a).0,
            2 => cos_sin_deg(2.0 * a).1,
            3 => cos_sin_deg(4.0 * a).0,
            _ => cos_sin_deg(4.0 * a).1,
        }
    });
    let y = DVector::from_iterator(curve.len(), curve.iter().map(|p| p.moment));
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= RANK_TOL * smax {
        return Err(Error::InsufficientAngles {
            required,
            got: distinct,
        });
    }
    let coef = svd
        .solve(&y, RANK_TOL * smax)
        .map_err(|e| Error::config(format!("least-squares solve failed: {e}")))?;
    let resid = &design * &coef - &y;
    let residual_rms = (resid.norm_squared() / curve.len() as f64).sqrt();
    Ok((coef.iter().copied().collect(), residual_rms))
}

pub fn fit_second_moment(curve: &[CurvePoint]) -> Result<SecondMomentFit> {
    let (a, residual_rms) = harmonic_lsq(curve, MomentOrder::Second)?;
    let q1 = a[0];
    let q2 = a[1].hypot(a[2]);
    let theta0_deg = fold_deg(0.5 * a[2].atan2(a[1]).to_degrees(), 180.0);
    Ok(SecondMomentFit {
        q1,
        q2,
        theta0_deg,
        residual_rms,
        degenerate: !(q2 >= PCA_DEGENERACY_RATIO * q1.abs()) || q1 <= 0.0,
    })
}

/// Fits the 4th-order curve using only the curve's own residual as noise reference.
pub fn fit_fourth_moment(curve: &[CurvePoint]) -> Result<FourthMomentFit> {
    fit_fourth_moment_with_noise(curve, 0.0)
}

/// As [`fit_fourth_moment`], additionally requiring the 4φ amplitude to clear
/// `ICA_NOISE_FACTOR` sampling standard errors (see [`fourth_harmonic_standard_error`]).
///
/// A curve measured from N sample pairs is itself an exact trigonometric
/// polynomial with harmonics 0, 2 and 4 only, so its fit residual is zero up
/// to rounding and cannot reveal sampling noise on its own.
pub fn fit_fourth_moment_with_noise(
    curve: &[CurvePoint],
    harmonic_se: f64,
) -> Result<FourthMomentFit> {
    let (b, residual_rms) = harmonic_lsq(curve, MomentOrder::Fourth)?;
    let p1 = b[0];
    let amplitude = b[3].hypot(b[4]);
    // atan2 gives the maximizer of the 4φ term; its minimizer lies 45° away.
    let phi_max = 0.25 * b[4].atan2(b[3]).to_degrees();
    let phi0_deg = fold_deg(phi_max + 45.0, 90.0);
    let (c2, s2) = cos_sin_deg(2.0 * phi0_deg);
    let p2 = b[1] * c2 + b[2] * s2;
    let threshold = [
        ICA_NOISE_FACTOR * residual_rms / (curve.len() as f64).sqrt(),
        ICA_RELATIVE_FLOOR * p1.abs(),
        ICA_NOISE_FACTOR * harmonic_se,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(FourthMomentFit {
        p1,
        p2,
        p3: -amplitude,
        phi0_deg,
        residual_rms,
        identifiable: amplitude > threshold,
        threshold,
    })
}

/// Standard error of the cos 4φ / sin 4φ coefficients of the 4th-order curve,
/// estimated from the per-sample contributions
/// `(y1⁴ + y2⁴ − 6y1²y2²)/8` and `(y1³y2 − y1y2³)/2`.
pub fn fourth_harmonic_standard_error(s: &SampleSet) -> Result<f64> {
    let (y1, y2) = s.pair()?;
    let n = y1.len();
    if n < 2 {
        return Err(Error::EmptySampleSet(
            "need at least two sample pairs to estimate a standard error".into(),
        ));
    }
    let mut cos_terms = Vec::with_capacity(n);
    let mut sin_terms = Vec::with_capacity(n);
    for (&a, &b) in y1.iter().zip(y2) {
        let (a2, b2) = (a * a, b * b);
        cos_terms.push((a2 * a2 + b2 * b2 - 6.0 * a2 * b2) / 8.0);
        sin_terms.push(a * b * (a2 - b2) / 2.0);
    }
    let var = |x: &[f64]| {
        let m = x.iter().sum::<f64>() / n as f64;
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64
    };
    Ok(((var(&cos_terms) + var(&sin_terms)) / (2.0 * n as f64)).sqrt())
}
