//! Optical pulse-train gating.
//!
//! A pulse train picks one output value per pulse: the pulse-shape-weighted
//! mean of the waveform under the pulse window. Weights always sum to one.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::signalgen::Waveform;

/// FWHM = 2·sqrt(2·ln 2)·sigma.
const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;
/// Gaussian windows are truncated at this many standard deviations.
const GAUSS_TRUNCATION_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    Rect,
    /// `pulse_width_s` is the full width at half maximum.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseTrain {
    pub rep_rate_hz: f64,
    pub pulse_width_s: f64,
    pub shape: PulseShape,
    /// Centre of the first pulse, relative to the waveform start.
    pub offset_s: f64,
    pub jitter_rms_s: f64,
}

impl PulseTrain {
    pub fn validate(&self) -> Result<()> {
        if !(self.rep_rate_hz.is_finite() && self.rep_rate_hz > 0.0) {
            return Err(Error::config(format!(
                "rep_rate must be positive, got {}",
                self.rep_rate_hz
            )));
        }
        if !(self.pulse_width_s.is_finite() && self.pulse_width_s > 0.0) {
            return Err(Error::config(format!(
                "width must be positive, got {}",
                self.pulse_width_s
            )));
        }
        if self.pulse_width_s >= 1.0 / self.rep_rate_hz {
            return Err(Error::config(format!(
                "width {} s must be shorter than the pulse period {} s",
                self.pulse_width_s,
                1.0 / self.rep_rate_hz
            )));
        }
        if !(self.offset_s.is_finite() && self.offset_s >= 0.0) {
            return Err(Error::config("offset must be nonnegative"));
        }
        if !(self.jitter_rms_s.is_finite() && self.jitter_rms_s >= 0.0) {
            return Err(Error::config("jitter_rms must be nonnegative"));
        }
        Ok(())
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.rep_rate_hz
    }

    /// Pulse period expressed in simulation samples (not necessarily integral).
    pub fn period_samples(&self, sample_rate_hz: f64) -> f64 {
        sample_rate_hz / self.rep_rate_hz
    }

    /// Repetition rate whose period is an integer number of simulation samples
    /// coprime with every symbol period in `symbol_samples`, as close as
    /// possible to the rate that yields `ratio` gated samples per Nyquist sample.
    pub fn rep_rate_for_ratio(
        ratio: f64,
        signal_bandwidth_hz: f64,
        sample_rate_hz: f64,
        symbol_samples: &[usize],
    ) -> Result<f64> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::config(format!(
                "ratio must lie in (0, 1], got {ratio}"
            )));
        }
        if !(signal_bandwidth_hz > 0.0) {
            return Err(Error::config("signal bandwidth must be positive"));
        }
        let ideal = sample_rate_hz / (2.0 * signal_bandwidth_hz * ratio);
        let base = ideal.round().max(2.0) as u64;
        let coprime = |p: u64| symbol_samples.iter().all(|&s| gcd(p, s as u64) == 1);
        let period = (0..base)
            .flat_map(|d| [base + d, base.saturating_sub(d)])
            .find(|&p| p >= 2 && coprime(p))
            .unwrap_or(base);
        Ok(sample_rate_hz / period as f64)
    }

    /// Warns when every pulse lands on the same phase of a symbol.
    pub fn phase_coverage_warning(
        &self,
        sample_rate_hz: f64,
        symbol_samples: usize,
    ) -> Option<String> {
        let period = self.period_samples(sample_rate_hz);
        let rounded = period.round();
        if (period - rounded).abs() > 1e-9 * period || symbol_samples <= 1 {
            return None;
        }
        let g = gcd(rounded as u64, symbol_samples as u64);
        (g > 1).then(|| {
            format!(
                "pulse period of {rounded} samples shares factor {g} with the {symbol_samples}-sample symbol period; gates cover only {} symbol phases",
                symbol_samples as u64 / g
            )
        })
    }
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Gated samples: one timestamp per pulse and one value per pulse per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    times_s: Vec<f64>,
    channels: Vec<Vec<f64>>,
    source_rate_hz: f64,
}

impl SampleSet {
    pub fn new(times_s: Vec<f64>, channels: Vec<Vec<f64>>, source_rate_hz: f64) -> Result<Self> {
        if channels.is_empty() || channels.len() > 2 {
            return Err(Error::config(format!(
                "sample set needs one or two channels, got {}",
                channels.len()
            )));
        }
        if channels.iter().any(|c| c.len() != times_s.len()) {
            return Err(Error::config("channel length differs from timestamp count"));
        }
        if times_s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("timestamps must be strictly increasing"));
        }
        if channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::config("sample values must be finite"));
        }
        Ok(Self {
            times_s,
            channels,
            source_rate_hz,
        })
    }

    /// Pairs two value vectors on the timestamps of `self`.
    pub(crate) fn with_pair(&self, ch1: Vec<f64>, ch2: Vec<f64>) -> SampleSet {
        SampleSet {
            times_s: self.times_s.clone(),
            channels: vec![ch1, ch2],
            source_rate_hz: self.source_rate_hz,
        }
    }

    pub fn times_s(&self) -> &[f64] {
        &self.times_s
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Zero-based channel access.
    pub fn channel(&self, idx: usize) -> &[f64] {
        &self.channels[idx]
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    pub fn source_rate_hz(&self) -> f64 {
        self.source_rate_hz
    }

    /// Both channels, or a `Config` error for single-channel sets.
    pub fn pair(&self) -> Result<(&[f64], &[f64])> {
        match self.channels.as_slice() {
            [a, b] => Ok((a, b)),
            _ => Err(Error::config("operation needs a two-channel sample set")),
        }
    }
}

/// Window placement shared by every channel hit by one pulse train.
struct GatePlan {
    centers: Vec<usize>,
    /// Offset of the first window sample relative to its centre.
    lead: usize,
    weights: Vec<f64>,
    uniform: bool,
}

impl GatePlan {
    fn build(w: &Waveform, p: &PulseTrain, seed: u64) -> Result<Self> {
        p.validate()?;
        let fs = w.sample_rate_hz();
        if p.period_samples(fs) < 2.0 {
            return Err(Error::config(format!(
                "pulse period ({} samples) must span at least 2 waveform samples",
                p.period_samples(fs)
            )));
        }
        let (lead, weights, uniform) = match p.shape {
            PulseShape::Rect => {
                let n = ((p.pulse_width_s * fs).round() as usize).max(1);
                (n / 2, vec![1.0 / n as f64; n], true)
            }
            PulseShape::Gaussian => {
                let sigma = p.pulse_width_s * fs / FWHM_PER_SIGMA;
                let half = (GAUSS_TRUNCATION_SIGMAS * sigma).ceil() as usize;
                if half == 0 {
                    (0, vec![1.0], true)
                } else {
                    let raw: Vec<f64> = (0..=2 * half)
                        .map(|k| {
                            let d = k as f64 - half as f64;
                            (-0.5 * (d / sigma).powi(2)).exp()
                        })
                        .collect();
                    let total: f64 = raw.iter().sum();
                    (half, raw.into_iter().map(|v| v / total).collect(), false)
                }
            }
        };
        let len = w.len();
        let span = weights.len();
        let period_s = p.period_s();
        let mut rng = (p.jitter_rms_s > 0.0).then(|| rng_from_seed(seed));
        let mut centers = Vec::new();
        let mut last: Option<usize> = None;
        for k in 0.. {
            let nominal = p.offset_s + k as f64 * period_s;
            if nominal > w.duration_s() + p.pulse_width_s + 8.0 * p.jitter_rms_s {
                break;
            }
            let jitter = match rng.as_mut() {
                Some(r) => p.jitter_rms_s * r.sample::<f64, _>(StandardNormal),
                None => 0.0,
            };
            let pos = ((nominal + jitter) * fs).round();
            if pos < lead as f64 {
                continue;
            }
            let c = pos as usize;
            let start = c - lead;
            if start + span > len {
                continue;
            }
            // heavy jitter can reorder pulses; keep timestamps strictly increasing
            if last.is_some_and(|l| c <= l) {
                continue;
            }
            last = Some(c);
            centers.push(c);
        }
        if centers.is_empty() {
            return Err(Error::EmptySampleSet(
                "no pulse window lies entirely inside the waveform".into(),
            ));
        }
        Ok(Self {
            centers,
            lead,
            weights,
            uniform,
        })
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.weights.len();
        self.centers
            .iter()
            .map(|&c| {
                let window = &x[c - self.lead..c - self.lead + n];
                if self.uniform {
                    window.iter().sum::<f64>() / n as f64
                } else {
                    window.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
                }
            })
            .collect()
    }

    fn times(&self, w: &Waveform) -> Vec<f64> {
        self.centers.iter().map(|&c| w.time_of(c)).collect()
    }
}

/// Gates a single waveform.
pub fn gate(w: &Waveform, p: &PulseTrain, seed: u64) -> Result<SampleSet> {
    let plan = GatePlan::build(w, p, seed)?;
    SampleSet::new(
        plan.times(w),
        vec![plan.apply(w.samples())],
        w.sample_rate_hz(),
    )
}

/// Gates both receiver branches with the same (jittered) pulse train.
pub fn gate_pair(w1: &Waveform, w2: &Waveform, p: &PulseTrain, seed: u64) -> Result<SampleSet> {
    if !w1.same_geometry(w2) {
        return Err(Error::config(
            "gate_pair inputs must share sample rate, start time and length",
        ));
    }
    let plan = GatePlan::build(w1, p, seed)?;
    SampleSet::new(
        plan.times(w1),
        vec![plan.apply(w1.samples()), plan.apply(w2.samples())],
        w1.sample_rate_hz(),
    )
}

/// Gated samples per Nyquist-rate sample of a signal with the given bandwidth.
pub fn sampling_ratio(p: &PulseTrain, signal_bandwidth_hz: f64) -> f64 {
    p.rep_rate_hz / (2.0 * signal_bandwidth_hz)
}
