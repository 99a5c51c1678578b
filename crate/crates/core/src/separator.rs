//! 2×2 mixing model and de-mixing transform assembly.
//!
//! The de-mixing matrix is `W = Vᵀ·Σ·Uᵀ`: rotate into the principal-component
//! basis, stretch the minor component to equalize variances, then rotate the
//! minimum-kurtosis axis onto output channel 1.

use serde::{Deserialize, Serialize};

use crate::angle::cos_sin_deg;
use crate::error::{Error, Result};
use crate::estimator::{FourthMomentFit, SecondMomentFit};
use crate::sampler::SampleSet;
use crate::signalgen::Waveform;

/// `|det| < SINGULAR_TOL·‖M‖²_F` is treated as singular.
pub const SINGULAR_TOL: f64 = 1e-12;
/// `q1 − q2 ≤ PCA_RANK_TOL·q1` means the second principal component is empty.
pub const PCA_RANK_TOL: f64 = 1e-9;

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    /// Counter-clockwise rotation by `angle_deg`.
    pub fn rotation(angle_deg: f64) -> Mat2 {
        let (c, s) = cos_sin_deg(angle_deg);
        Mat2([[c, -s], [s, c]])
    }

    pub fn diag(a: f64, b: f64) -> Mat2 {
        Mat2([[a, 0.0], [0.0, b]])
    }

    pub fn transpose(&self) -> Mat2 {
        let m = self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let (a, b) = (self.0, rhs.0);
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn apply(&self, x1: f64, x2: f64) -> (f64, f64) {
        let m = self.0;
        (m[0][0] * x1 + m[0][1] * x2, m[1][0] * x1 + m[1][1] * x2)
    }

    pub fn det(&self) -> f64 {
        let m = self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum()
    }

    pub fn is_singular(&self) -> bool {
        !(self.det().abs() >= SINGULAR_TOL * self.frobenius_sq())
    }

    pub fn inverse(&self) -> Result<Mat2> {
        if self.is_singular() {
            return Err(Error::SingularMatrix { det: self.det() });
        }
        let m = self.0;
        let d = self.det();
        Ok(Mat2([
            [m[1][1] / d, -m[0][1] / d],
            [-m[1][0] / d, m[0][0] / d],
        ]))
    }

    /// Singular values, largest first.
    pub fn singular_values(&self) -> (f64, f64) {
        let f = self.frobenius_sq();
        let d = self.det().abs();
        let disc = (f * f - 4.0 * d * d).max(0.0).sqrt();
        let s1 = ((f + disc) / 2.0).sqrt();
        let s2 = if s1 > 0.0 { d / s1 } else { 0.0 };
        (s1, s2)
    }

    /// 2-norm condition number.
    pub fn condition_number(&self) -> f64 {
        let (s1, s2) = self.singular_values();
        s1 / s2
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row][col]
    }
}

/// The mixing matrix `A` of `X = A·S` (columns: SOI, interference).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct MixingMatrix(Mat2);

impl MixingMatrix {
    pub fn new(rows: [[f64; 2]; 2]) -> Result<Self> {
        let m = Mat2(rows);
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::config("mixing matrix entries must be finite"));
        }
        if m.is_singular() {
            return Err(Error::SingularMatrix { det: m.det() });
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn condition_number(&self) -> f64 {
        self.0.condition_number()
    }
}

impl TryFrom<[[f64; 2]; 2]> for MixingMatrix {
    type Error = Error;

    fn try_from(rows: [[f64; 2]; 2]) -> Result<Self> {
        MixingMatrix::new(rows)
    }
}

impl From<MixingMatrix> for [[f64; 2]; 2] {
    fn from(m: MixingMatrix) -> Self {
        m.0 .0
    }
}

/// Whitening model built from a 2nd-moment fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub theta0_deg: f64,
    /// `sqrt((q1 + q2)/(q1 − q2))`
    pub sigma_ratio: f64,
    pub u: Mat2,
    pub sigma: Mat2,
}

impl PcaModel {
    /// `Σ·Uᵀ`
    pub fn whitening_matrix(&self) -> Mat2 {
        self.sigma.mul(&self.u.transpose())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcaModel {
    pub phi0_deg: f64,
    pub v: Mat2,
}

/// Output channel carrying the signal of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Channel {
    One,
    Two,
}

impl Channel {
    pub fn index(self) -> usize {
        match self {
            Channel::One => 0,
            Channel::Two => 1,
        }
    }
}

impl From<Channel> for u8 {
    fn from(c: Channel) -> u8 {
        c.index() as u8 + 1
    }
}

impl TryFrom<u8> for Channel {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Channel::One),
            2 => Ok(Channel::Two),
            other => Err(format!("channel must be 1 or 2, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemixMatrix {
    pub w: Mat2,
    pub soi_channel: Channel,
    pub pca: PcaModel,
    /// Absent when the ICA rotation could not be identified (W is whitening only).
    pub ica: Option<IcaModel>,
}

impl DemixMatrix {
    /// Re-selects `soi_channel` from the kurtosis of the demixed gated samples.
    pub fn with_soi_from(mut self, gated: &SampleSet) -> Result<DemixMatrix> {
        let demixed = demix_samples(&self.w, gated)?;
        self.soi_channel = resolve_soi(&demixed)?;
        Ok(self)
    }
}

/// `x₁ = a11·s + a12·i`, `x₂ = a21·s + a22·i`.
pub fn mix(
    a: &MixingMatrix,
    soi: &Waveform,
    interference: &Waveform,
) -> Result<(Waveform, Waveform)> {
    if !soi.same_geometry(interference) {
        return Err(Error::config(
            "sources must share sample rate, start time and length",
        ));
    }
    apply_matrix(a.matrix(), soi, interference)
}

fn apply_matrix(m: &Mat2, x1: &Waveform, x2: &Waveform) -> Result<(Waveform, Waveform)> {
    if m.is_singular() {
        return Err(Error::SingularMatrix { det: m.det() });
    }
    let (y1, y2): (Vec<f64>, Vec<f64>) = x1
        .samples()
        .iter()
        .zip(x2.samples())
        .map(|(&a, &b)| m.apply(a, b))
        .unzip();
    Ok((x1.with_samples(y1), x2.with_samples(y2)))
}

pub fn build_pca(fit: &SecondMomentFit) -> Result<PcaModel> {
    let (major, minor) = fit.principal_variances();
    if !(minor > PCA_RANK_TOL * major) || !(fit.q1 > 0.0) {
        return Err(Error::DegenerateCovariance {
            q1: fit.q1,
            q2: fit.q2,
        });
    }
    let sigma_ratio = (major / minor).sqrt();
    Ok(PcaModel {
        theta0_deg: fit.theta0_deg,
        sigma_ratio,
        u: Mat2::rotation(fit.theta0_deg),
        sigma: Mat2::diag(1.0, sigma_ratio),
    })
}

/// `X′ = Σ·Uᵀ·X` per sample pair.
pub fn whiten(s: &SampleSet, m: &PcaModel) -> Result<SampleSet> {
    demix_samples(&m.whitening_matrix(), s)
}

/// Applies any 2×2 matrix to a two-channel sample set.
pub fn demix_samples(w: &Mat2, s: &SampleSet) -> Result<SampleSet> {
    let (x1, x2) = s.pair()?;
    let (y1, y2): (Vec<f64>, Vec<f64>) = x1.iter().zip(x2).map(|(&a, &b)| w.apply(a, b)).unzip();
    Ok(s.with_pair(y1, y2))
}

pub fn build_ica(fit: &FourthMomentFit) -> Result<IcaModel> {
    if !fit.identifiable {
        return Err(Error::IcaUnidentifiable {
            amplitude: -fit.p3,
            threshold: fit.threshold,
        });
    }
    Ok(IcaModel {
        phi0_deg: fit.phi0_deg,
        v: Mat2::rotation(fit.phi0_deg),
    })
}

/// `W = Vᵀ·Σ·Uᵀ`, with the SOI provisionally on channel 1.
pub fn compose_demix(ica: &IcaModel, pca: &PcaModel) -> DemixMatrix {
    DemixMatrix {
        w: ica.v.transpose().mul(&pca.whitening_matrix()),
        soi_channel: Channel::One,
        pca: *pca,
        ica: Some(*ica),
    }
}

/// Whitening-only transform used when the ICA rotation is unidentifiable.
pub fn whitening_demix(pca: &PcaModel) -> DemixMatrix {
    DemixMatrix {
        w: pca.whitening_matrix(),
        soi_channel: Channel::One,
        pca: *pca,
        ica: None,
    }
}

/// Excess-free sample kurtosis `m4/m2²` after mean removal; `None` for constant input.
pub fn sample_kurtosis(x: &[f64]) -> Option<f64> {
    if x.is_empty() {
        return None;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (m2, m4) = x.iter().fold((0.0, 0.0), |(m2, m4), v| {
        let d = (v - mean) * (v - mean);
        (m2 + d, m4 + d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    (m2 > 0.0).then(|| m4 / (m2 * m2))
}

/// The channel whose kurtosis is farther from the Gaussian value 3; ties go to channel 1.
pub fn resolve_soi(demixed: &SampleSet) -> Result<Channel> {
    let (a, b) = demixed.pair()?;
    let dist = |x: &[f64]| sample_kurtosis(x).map_or(0.0, |k| (k - 3.0).abs());
    Ok(if dist(b) > dist(a) {
        Channel::Two
    } else {
        Channel::One
    })
}

/// Full-rate application of `W`.
pub fn apply_demix(w: &DemixMatrix, x1: &Waveform, x2: &Waveform) -> Result<(Waveform, Waveform)> {
    if !x1.same_geometry(x2) {
        return Err(Error::config(
            "demix inputs must share sample rate, start time and length",
        ));
    }
    apply_matrix(&w.w, x1, x2)
}

/// Largest per-row ratio `min|g| / max|g|` of `G = W·A`: zero for a
/// generalized permutation matrix.
pub fn permutation_leakage(g: &Mat2) -> f64 {
    g.0.iter()
        .map(|row| {
            let (a, b) = (row[0].abs(), row[1].abs());
            let hi = a.max(b);
            if hi == 0.0 {
                f64::INFINITY
            } else {
                a.min(b) / hi
            }
        })
        .fold(0.0, f64::max)
}
