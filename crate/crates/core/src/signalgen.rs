//! Baseband source generation.
//!
//! All sources are real-valued, piecewise-constant (rectangular NRZ shaping)
//! and sampled at a common simulation rate. Symbol periods must be an exact
//! integer number of simulation samples.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Unit-variance 4-level alphabet of the real part of 16QAM.
pub const QAM16_REAL_LEVELS: [f64; 4] = [
    -3.0 / 2.236_067_977_499_79,
    -1.0 / 2.236_067_977_499_79,
    1.0 / 2.236_067_977_499_79,
    3.0 / 2.236_067_977_499_79,
];

/// A uniformly sampled real-valued signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    sample_rate_hz: f64,
    start_time_s: f64,
    samples: Vec<f64>,
}

impl Waveform {
    pub fn new(sample_rate_hz: f64, start_time_s: f64, samples: Vec<f64>) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::config(format!(
                "sample rate must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if !start_time_s.is_finite() {
            return Err(Error::config("start time must be finite"));
        }
        if samples.is_empty() {
            return Err(Error::config("waveform must contain at least one sample"));
        }
        if let Some(idx) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!("non-finite sample at index {idx}")));
        }
        Ok(Self {
            sample_rate_hz,
            start_time_s,
            samples,
        })
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Time of sample `idx`.
    pub fn time_of(&self, idx: usize) -> f64 {
        self.start_time_s + idx as f64 / self.sample_rate_hz
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    /// True when both waveforms share rate, start time and length.
    pub fn same_geometry(&self, other: &Waveform) -> bool {
        self.sample_rate_hz == other.sample_rate_hz
            && self.start_time_s == other.start_time_s
            && self.samples.len() == other.samples.len()
    }

    /// Same geometry, new samples. Values are trusted to be finite.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Waveform {
        debug_assert_eq!(samples.len(), self.samples.len());
        Waveform {
            sample_rate_hz: self.sample_rate_hz,
            start_time_s: self.start_time_s,
            samples,
        }
    }

    pub fn scaled(&self, factor: f64) -> Waveform {
        self.with_samples(self.samples.iter().map(|v| v * factor).collect())
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Source waveform families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    NrzBinary,
    Qam16Real,
    Gaussian,
}

impl SourceKind {
    /// Normalized 4th moment E[s^4]/E[s^2]^2 of the level distribution.
    pub fn kurtosis(self) -> f64 {
        match self {
            SourceKind::NrzBinary => 1.0,
            SourceKind::Qam16Real => 1.64,
            SourceKind::Gaussian => 3.0,
        }
    }
}

/// Description of one source. `rate_hz` is the symbol rate for digital
/// sources and the noise bandwidth (hold rate) for Gaussian sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub rate_hz: f64,
    pub rms: f64,
    /// Explicit seed; when absent the scenario derives one from its master seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SourceSpec {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::config(format!(
                "rate must be positive, got {}",
                self.rate_hz
            )));
        }
        if !(self.rms.is_finite() && self.rms >= 0.0) {
            return Err(Error::config(format!(
                "rms must be nonnegative, got {}",
                self.rms
            )));
        }
        samples_per_symbol(sample_rate_hz, self.rate_hz)?;
        Ok(())
    }

    /// Generates exactly `n_samples` samples: whole symbols are drawn and the
    /// last one is truncated if `n_samples` is not a symbol multiple.
    pub fn realize(&self, sample_rate_hz: f64, n_samples: usize, seed: u64) -> Result<Waveform> {
        self.validate(sample_rate_hz)?;
        let sps = samples_per_symbol(sample_rate_hz, self.rate_hz)?;
        let n_symbols = n_samples.div_ceil(sps).max(1);
        let unit = match self.kind {
            SourceKind::NrzBinary => gen_nrz(self.rate_hz, n_symbols, sample_rate_hz, seed)?,
            SourceKind::Qam16Real => gen_qam16_real(self.rate_hz, n_symbols, sample_rate_hz, seed)?,
            SourceKind::Gaussian => {
                gen_gaussian_held(self.rate_hz, n_symbols, sample_rate_hz, 1.0, seed)?
            }
        };
        let mut samples = unit.into_samples();
        samples.truncate(n_samples);
        for v in &mut samples {
            *v *= self.rms;
        }
        Waveform::new(sample_rate_hz, 0.0, samples)
    }
}

/// Integer number of simulation samples per symbol.
pub fn samples_per_symbol(sample_rate_hz: f64, symbol_rate_hz: f64) -> Result<usize> {
    if !(symbol_rate_hz.is_finite() && symbol_rate_hz > 0.0) {
        return Err(Error::config(format!(
            "symbol rate must be positive, got {symbol_rate_hz}"
        )));
    }
    let ratio = sample_rate_hz / symbol_rate_hz;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio {
        return Err(Error::config(format!(
            "sample rate {sample_rate_hz} Hz is not an integer multiple of symbol rate {symbol_rate_hz} Hz"
        )));
    }
    Ok(rounded as usize)
}

fn hold_levels(
    levels: impl Iterator<Item = f64>,
    sps: usize,
    sample_rate_hz: f64,
) -> Result<Waveform> {
    let samples: Vec<f64> = levels.flat_map(|v| std::iter::repeat_n(v, sps)).collect();
    Waveform::new(sample_rate_hz, 0.0, samples)
}

/// Builds an NRZ waveform from an explicit bit pattern (`true` → +1).
pub fn nrz_from_bits(bits: &[bool], bit_rate_hz: f64, sample_rate_hz: f64) -> Result<Waveform> {
    let sps = samples_per_symbol(sample_rate_hz, bit_rate_hz)?;
    if bits.is_empty() {
        return Err(Error::config("need at least one bit"));
    }
    hold_levels(
        bits.iter().map(|&b| if b { 1.0 } else { -1.0 }),
        sps,
        sample_rate_hz,
    )
}

/// Random equiprobable ±1 NRZ.
pub fn gen_nrz(
    bit_rate_hz: f64,
    n_bits: usize,
    sample_rate_hz: f64,
    seed: u64,
) -> Result<Waveform> {
    if n_bits == 0 {
        return Err(Error::config("n_bits must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let bits: Vec<bool> = (0..n_bits).map(|_| rng.random::<bool>()).collect();
    nrz_from_bits(&bits, bit_rate_hz, sample_rate_hz)
}

/// Real part of a 16QAM baseband signal: equiprobable levels {±1, ±3}/√5.
pub fn gen_qam16_real(
    symbol_rate_hz: f64,
    n_symbols: usize,
    sample_rate_hz: f64,
    seed: u64,
) -> Result<Waveform> {
    let sps = samples_per_symbol(sample_rate_hz, symbol_rate_hz)?;
    if n_symbols == 0 {
        return Err(Error::config("n_symbols must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let levels: Vec<f64> = (0..n_symbols)
        .map(|_| QAM16_REAL_LEVELS[rng.random_range(0..4)])
        .collect();
    hold_levels(levels.into_iter(), sps, sample_rate_hz)
}

/// White Gaussian noise, one independent draw per simulation sample.
pub fn gen_gaussian(
    sample_rate_hz: f64,
    n_samples: usize,
    rms: f64,
    seed: u64,
) -> Result<Waveform> {
    if !(rms.is_finite() && rms >= 0.0) {
        return Err(Error::config(format!("rms must be nonnegative, got {rms}")));
    }
    let mut rng = rng_from_seed(seed);
    let samples: Vec<f64> = (0..n_samples)
        .map(|_| rms * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Waveform::new(sample_rate_hz, 0.0, samples)
}

/// Band-limited Gaussian interference: independent draws at `bandwidth_hz`,
/// each held for one period (the same rectangular shaping as the digital sources).
pub fn gen_gaussian_held(
    bandwidth_hz: f64,
    n_symbols: usize,
    sample_rate_hz: f64,
    rms: f64,
    seed: u64,
) -> Result<Waveform> {
    let sps = samples_per_symbol(sample_rate_hz, bandwidth_hz)?;
    let draws = gen_gaussian(bandwidth_hz, n_symbols, rms, seed)?;
    hold_levels(draws.into_samples().into_iter(), sps, sample_rate_hz)
}

/// Rescales `w` so that its RMS equals `target_rms`.
pub fn normalize_rms(w: &Waveform, target_rms: f64) -> Result<Waveform> {
    if !(target_rms.is_finite() && target_rms > 0.0) {
        return Err(Error::config(format!(
            "target rms must be positive, got {target_rms}"
        )));
    }
    let current = w.rms();
    if current == 0.0 {
        return Err(Error::DegenerateSignal(
            "cannot normalize an all-zero waveform".into(),
        ));
    }
    Ok(w.scaled(target_rms / current))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m2 = x.iter().map(|v| v * v).sum::<f64>() / n;
        let m4 = x.iter().map(|v| v.powi(4)).sum::<f64>() / n;
        (m2, m4)
    }

    #[test]
    fn nrz_200_mbps_at_10_gsps_has_fifty_samples_per_bit() {
        let w = gen_nrz(200e6, 10_000, 10e9, 3).unwrap();
        assert_eq!(w.len(), 10_000 * 50);
        assert!(w.samples().iter().all(|&v| v == 1.0 || v == -1.0));
        for chunk in w.samples().chunks(50) {
            assert!(chunk.iter().all(|&v| v == chunk[0]));
        }
        assert_eq!(w.rms(), 1.0);
    }

    #[test]
    fn all_ones_pattern_is_constant() {
        let w = nrz_from_bits(&[true; 16], 200e6, 10e9).unwrap();
        assert!(w.samples().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(
            gen_nrz(1e6, 200, 1e7, 11).unwrap(),
            gen_nrz(1e6, 200, 1e7, 11).unwrap()
        );
        assert_eq!(
            gen_qam16_real(1e6, 200, 1e7, 11).unwrap(),
            gen_qam16_real(1e6, 200, 1e7, 11).unwrap()
        );
        assert_eq!(
            gen_gaussian(1e6, 500, 1.0, 11).unwrap(),
            gen_gaussian(1e6, 500, 1.0, 11).unwrap()
        );
        assert_ne!(
            gen_nrz(1e6, 200, 1e7, 11).unwrap(),
            gen_nrz(1e6, 200, 1e7, 12).unwrap()
        );
    }

    #[test]
    fn non_integer_samples_per_bit_is_config_error() {
        assert!(matches!(gen_nrz(3e6, 10, 10e6, 0), Err(Error::Config(_))));
        assert!(matches!(
            gen_qam16_real(3e6, 10, 10e6, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn qam_levels_and_level_moments() {
        let w = gen_qam16_real(1e6, 1000, 4e6, 5).unwrap();
        assert_eq!(w.len(), 4000);
        assert!(w.samples().iter().all(|v| QAM16_REAL_LEVELS.contains(v)));
        // population moments of the alphabet itself
        let (m2, m4) = moments(&QAM16_REAL_LEVELS);
        assert!((m2 - 1.0).abs() < 1e-15);
        assert!((m4 - 1.64).abs() < 1e-14);
    }

    #[test]
    fn empirical_moments_converge_to_level_moments() {
        let n = 200_000;
        let tol = 5.0 / (n as f64).sqrt();
        let qam = gen_qam16_real(1.0, n, 1.0, 21).unwrap();
        let (m2, m4) = moments(qam.samples());
        assert!((m2 - 1.0).abs() < tol, "m2 = {m2}");
        assert!((m4 - 1.64).abs() < tol * 2.0, "m4 = {m4}");
        let nrz = gen_nrz(1.0, n, 1.0, 21).unwrap();
        let mean = nrz.samples().iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < tol);
    }

    #[test]
    fn gaussian_zero_rms_is_all_zero() {
        let w = gen_gaussian(1e3, 100, 0.0, 1).unwrap();
        assert!(w.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gaussian_kurtosis_near_three() {
        let w = gen_gaussian(1.0, 1_000_000, 1.0, 99).unwrap();
        let (m2, m4) = moments(w.samples());
        let kurt = m4 / (m2 * m2);
        assert!((kurt - 3.0).abs() < 0.05, "kurtosis {kurt}");
        assert!((m2 - 1.0).abs() < 0.01);
    }

    #[test]
    fn normalize_rms_cases() {
        let c = Waveform::new(1.0, 0.0, vec![2.0; 8]).unwrap();
        let n = normalize_rms(&c, 1.0).unwrap();
        assert!(n.samples().iter().all(|&v| v == 1.0));

        let nrz = gen_nrz(1.0, 64, 4.0, 1).unwrap();
        assert_eq!(normalize_rms(&nrz, 1.0).unwrap(), nrz);

        let w = Waveform::new(1.0, 0.0, vec![1.0, -1.0, 3.0, -3.0]).unwrap();
        let out = normalize_rms(&w, 5f64.sqrt()).unwrap();
        for (a, b) in out.samples().iter().zip(w.samples()) {
            assert!((a - b).abs() < 1e-15);
        }

        let zero = Waveform::new(1.0, 0.0, vec![0.0; 4]).unwrap();
        assert!(matches!(
            normalize_rms(&zero, 1.0),
            Err(Error::DegenerateSignal(_))
        ));
    }

    #[test]
    fn realize_hits_exact_sample_count() {
        let spec = SourceSpec {
            kind: SourceKind::Qam16Real,
            rate_hz: 200e6,
            rms: 2.0,
            seed: None,
        };
        let w = spec.realize(5e9, 1013, 4).unwrap();
        assert_eq!(w.len(), 1013);
        assert!(w.samples().iter().all(|v| QAM16_REAL_LEVELS
            .iter()
            .any(|l| (2.0 * l - v).abs() < 1e-15)));
    }

    #[test]
    fn waveform_rejects_bad_input() {
        assert!(Waveform::new(0.0, 0.0, vec![1.0]).is_err());
        assert!(Waveform::new(1.0, 0.0, vec![]).is_err());
        assert!(Waveform::new(1.0, 0.0, vec![f64::NAN]).is_err());
    }
}
