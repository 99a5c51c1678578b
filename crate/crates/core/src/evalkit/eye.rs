use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::SampleSet;
use crate::signalgen::Waveform;
use crate::util::fmt_f64;

/// Absorbs rounding when a timestamp lands exactly on a symbol boundary.
const PHASE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyeBins {
    pub phase_bins: usize,
    pub amplitude_bins: usize,
    pub amplitude_min: f64,
    pub amplitude_max: f64,
}

impl Default for EyeBins {
    fn default() -> Self {
        Self {
            phase_bins: 32,
            amplitude_bins: 64,
            amplitude_min: -2.5,
            amplitude_max: 2.5,
        }
    }
}

/// What to fold: a full-rate waveform or one channel of a gated sample set.
#[derive(Debug, Clone, Copy)]
pub enum EyeInput<'a> {
    Waveform(&'a Waveform),
    Samples(&'a SampleSet, usize),
}

/// Amplitude-versus-symbol-phase histogram. `histogram[phase][amplitude]`;
/// out-of-range amplitudes are clamped into the edge rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EyeDiagram {
    pub symbol_period_s: f64,
    pub bins: EyeBins,
    pub histogram: Vec<Vec<u64>>,
}

pub fn eye_diagram(input: EyeInput<'_>, symbol_period_s: f64, bins: EyeBins) -> Result<EyeDiagram> {
    if !(symbol_period_s.is_finite() && symbol_period_s > 0.0) {
        return Err(Error::config("symbol period must be positive"));
    }
    if bins.phase_bins == 0
        || bins.amplitude_bins == 0
        || !(bins.amplitude_max > bins.amplitude_min)
    {
        return Err(Error::config(
            "eye bins need positive counts and a nonempty amplitude range",
        ));
    }
    let points: Vec<(f64, f64)> = match input {
        EyeInput::Waveform(w) => {
            if w.duration_s() < symbol_period_s * (1.0 - PHASE_EPS) {
                return Err(Error::config(
                    "eye diagram needs at least one symbol of data",
                ));
            }
            (0..w.len())
                .map(|k| (w.time_of(k), w.samples()[k]))
                .collect()
        }
        EyeInput::Samples(s, ch) => {
            if ch >= s.channel_count() {
                return Err(Error::config(format!(
                    "sample set has no channel {}",
                    ch + 1
                )));
            }
            s.times_s()
                .iter()
                .copied()
                .zip(s.channel(ch).iter().copied())
                .collect()
        }
    };
    if points.is_empty() {
        return Err(Error::EmptySampleSet(
            "nothing to fold into an eye diagram".into(),
        ));
    }
    let mut histogram = vec![vec![0u64; bins.amplitude_bins]; bins.phase_bins];
    let span = bins.amplitude_max - bins.amplitude_min;
    for (t, v) in points {
        let cycles = t / symbol_period_s + PHASE_EPS;
        let phase = cycles - cycles.floor();
        let p = ((phase * bins.phase_bins as f64) as usize).min(bins.phase_bins - 1);
        let a = ((v - bins.amplitude_min) / span * bins.amplitude_bins as f64)
            .floor()
            .clamp(0.0, (bins.amplitude_bins - 1) as f64) as usize;
        histogram[p][a] += 1;
    }
    Ok(EyeDiagram {
        symbol_period_s,
        bins,
        histogram,
    })
}

impl EyeDiagram {
    pub fn total(&self) -> u64 {
        self.histogram.iter().flatten().sum()
    }

    pub fn amplitude_center(&self, bin: usize) -> f64 {
        let b = &self.bins;
        b.amplitude_min
            + (bin as f64 + 0.5) * (b.amplitude_max - b.amplitude_min) / b.amplitude_bins as f64
    }

    /// Centre of a phase bin in unit intervals.
    pub fn phase_center(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) / self.bins.phase_bins as f64
    }

    /// Counts in phase column `phase_bin` whose amplitude centre lies within
    /// `half_width` of the middle of the amplitude range.
    pub fn mid_band_count(&self, phase_bin: usize, half_width: f64) -> u64 {
        let mid = 0.5 * (self.bins.amplitude_min + self.bins.amplitude_max);
        self.histogram[phase_bin]
            .iter()
            .enumerate()
            .filter(|(a, _)| (self.amplitude_center(*a) - mid).abs() < half_width)
            .map(|(_, c)| c)
            .sum()
    }

    /// Mid-band fraction of one phase column (`None` if the column is empty).
    pub fn mid_band_fraction(&self, phase_bin: usize, half_width: f64) -> Option<f64> {
        let col: u64 = self.histogram[phase_bin].iter().sum();
        (col > 0).then(|| self.mid_band_count(phase_bin, half_width) as f64 / col as f64)
    }

    /// Phase bin with the most open eye and its mid-band fraction.
    pub fn optimal_phase(&self, half_width: f64) -> Option<(usize, f64)> {
        (0..self.bins.phase_bins)
            .filter_map(|p| self.mid_band_fraction(p, half_width).map(|f| (p, f)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Dense grid: one row per amplitude bin (top to bottom = high to low),
    /// one column per phase bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("amplitude");
        for p in 0..self.bins.phase_bins {
            let _ = write!(out, ",{}", fmt_f64(self.phase_center(p)));
        }
        out.push('\n');
        for a in (0..self.bins.amplitude_bins).rev() {
            out.push_str(&fmt_f64(self.amplitude_center(a)));
            for p in 0..self.bins.phase_bins {
                let _ = write!(out, ",{}", self.histogram[p][a]);
            }
            out.push('\n');
        }
        out
    }
}
