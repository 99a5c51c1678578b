//! Scenario configuration.
//!
//! Scenarios are TOML documents with one table per concern. Numeric fields
//! accept plain numbers or strings with an SI prefix and optional unit
//! (`"200M"`, `"5ns"`, `"10GHz"`).
//!
//! ```toml
//! [run]
//! sample_rate = "5G"
//! duration = "250u"
//! master_seed = 1
//!
//! [soi]
//! kind = "qam16_real"
//! rate = "200M"
//! rms = 1
//!
//! [interference]
//! kind = "gaussian"
//! rate = "200M"
//! rms = 1
//!
//! [mixing]
//! a11 = 1
//! a12 = 0.5
//! a21 = 0.3
//! a22 = 1
//!
//! [pulse]
//! ratio = 0.01
//! width = "100f"
//! ```

use std::path::Path;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{AngleGrid, MomentOrder};
use crate::sampler::{PulseShape, PulseTrain};
use crate::separator::MixingMatrix;
use crate::signalgen::{samples_per_symbol, SourceKind, SourceSpec};

/// Default gate width: the femtosecond regime, i.e. a single-sample gate.
pub const DEFAULT_PULSE_WIDTH_S: f64 = 100e-15;

/// Parses a number with an optional SI prefix and optional `Hz`/`s` unit.
pub fn parse_si(text: &str) -> Result<f64> {
    let t = text.trim();
    let t = t
        .strip_suffix("Hz")
        .or_else(|| t.strip_suffix("hz"))
        .or_else(|| t.strip_suffix('s'))
        .unwrap_or(t)
        .trim_end();
    let (body, scale) = match t.chars().last() {
        Some(c) => match c {
            'f' => (&t[..t.len() - 1], 1e-15),
            'p' => (&t[..t.len() - 1], 1e-12),
            'n' => (&t[..t.len() - 1], 1e-9),
            'u' => (&t[..t.len() - 1], 1e-6),
            'µ' | 'μ' => (&t[..t.len() - c.len_utf8()], 1e-6),
            'm' => (&t[..t.len() - 1], 1e-3),
            'k' => (&t[..t.len() - 1], 1e3),
            'M' => (&t[..t.len() - 1], 1e6),
            'G' => (&t[..t.len() - 1], 1e9),
            'T' => (&t[..t.len() - 1], 1e12),
            _ => (t, 1.0),
        },
        None => return Err(Error::config("empty numeric value")),
    };
    let v: f64 = body
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("cannot parse {text:?} as a number")))?;
    Ok(v * scale)
}

fn si<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Float(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Int(v) => Ok(v as f64),
        Raw::Float(v) => Ok(v),
        Raw::Text(s) => parse_si(&s).map_err(de::Error::custom),
    }
}

fn si_opt<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    si(d).map(Some)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    #[serde(deserialize_with = "si")]
    sample_rate: f64,
    #[serde(deserialize_with = "si")]
    duration: f64,
    #[serde(default)]
    master_seed: u64,
    #[serde(default, deserialize_with = "si_opt")]
    bandwidth: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceSection {
    kind: SourceKind,
    #[serde(deserialize_with = "si")]
    rate: f64,
    #[serde(deserialize_with = "si")]
    rms: f64,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixingSection {
    a11: f64,
    a12: f64,
    a21: f64,
    a22: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PulseSection {
    #[serde(default, deserialize_with = "si_opt")]
    rep_rate: Option<f64>,
    #[serde(default)]
    ratio: Option<f64>,
    #[serde(default, deserialize_with = "si_opt")]
    width: Option<f64>,
    #[serde(default)]
    shape: Option<PulseShape>,
    #[serde(default, deserialize_with = "si_opt")]
    offset: Option<f64>,
    #[serde(default, deserialize_with = "si_opt")]
    jitter_rms: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnglesSection {
    theta: Option<Vec<f64>>,
    phi: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    run: RunSection,
    soi: SourceSection,
    interference: SourceSection,
    mixing: MixingSection,
    pulse: PulseSection,
    #[serde(default)]
    angles: AnglesSection,
}

/// A fully resolved, validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub master_seed: u64,
    /// Bandwidth used to express the gating rate as a sampling ratio.
    pub signal_bandwidth_hz: f64,
    pub soi: SourceSpec,
    pub interference: SourceSpec,
    pub mixing: MixingMatrix,
    pub pulse: PulseTrain,
    pub theta_grid: AngleGrid,
    pub phi_grid: AngleGrid,
}

fn at<T>(path: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{path}: {msg}")),
        other => Error::Config(format!("{path}: {other}")),
    })
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::config(e.to_string().trim_end().to_owned()))?;
        Self::resolve(file)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn resolve(f: ScenarioFile) -> Result<Self> {
        let fs = f.run.sample_rate;
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::config("run.sample_rate: must be positive"));
        }
        let source = |s: SourceSection| SourceSpec {
            kind: s.kind,
            rate_hz: s.rate,
            rms: s.rms,
            seed: s.seed,
        };
        let soi = source(f.soi);
        let interference = source(f.interference);
        at("soi", soi.validate(fs))?;
        at("interference", interference.validate(fs))?;
        let bandwidth = f
            .run
            .bandwidth
            .unwrap_or_else(|| soi.rate_hz.max(interference.rate_hz));
        let mixing = at(
            "mixing",
            MixingMatrix::new([[f.mixing.a11, f.mixing.a12], [f.mixing.a21, f.mixing.a22]]),
        )?;
        let rep_rate_hz = match (f.pulse.rep_rate, f.pulse.ratio) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "pulse: give either rep_rate or ratio, not both",
                ))
            }
            (Some(r), None) => r,
            (None, Some(ratio)) => at(
                "pulse.ratio",
                PulseTrain::rep_rate_for_ratio(
                    ratio,
                    bandwidth,
                    fs,
                    &symbol_samples(fs, &soi, &interference),
                ),
            )?,
            (None, None) => return Err(Error::config("pulse: rep_rate or ratio is required")),
        };
        let pulse = PulseTrain {
            rep_rate_hz,
            pulse_width_s: f.pulse.width.unwrap_or(DEFAULT_PULSE_WIDTH_S),
            shape: f.pulse.shape.unwrap_or(PulseShape::Rect),
            offset_s: f.pulse.offset.unwrap_or(0.5 / soi.rate_hz),
            jitter_rms_s: f.pulse.jitter_rms.unwrap_or(0.0),
        };
        let theta_grid = match f.angles.theta {
            Some(v) => at("angles.theta", AngleGrid::new(v))?,
            None => AngleGrid::default_theta(),
        };
        let phi_grid = match f.angles.phi {
            Some(v) => at("angles.phi", AngleGrid::new(v))?,
            None => AngleGrid::default_phi(),
        };
        let cfg = ScenarioConfig {
            sample_rate_hz: fs,
            duration_s: f.run.duration,
            master_seed: f.run.master_seed,
            signal_bandwidth_hz: bandwidth,
            soi,
            interference,
            mixing,
            pulse,
            theta_grid,
            phi_grid,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every invariant; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let fs = self.sample_rate_hz;
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::config("run.sample_rate: must be positive"));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::config("run.duration: must be positive"));
        }
        if self.n_samples() < 2 {
            return Err(Error::config("run.duration: shorter than two samples"));
        }
        if !(self.signal_bandwidth_hz.is_finite() && self.signal_bandwidth_hz > 0.0) {
            return Err(Error::config("run.bandwidth: must be positive"));
        }
        at("soi", self.soi.validate(fs))?;
        if self.soi.rms <= 0.0 {
            return Err(Error::config("soi.rms: must be positive"));
        }
        at("interference", self.interference.validate(fs))?;
        at("pulse", self.pulse.validate())?;
        if self.pulse.period_samples(fs) < 2.0 {
            return Err(Error::config(
                "pulse.rep_rate: pulse period must span at least 2 samples",
            ));
        }
        if self.pulse.offset_s >= self.duration_s {
            return Err(Error::config(
                "pulse.offset: first pulse lies beyond the run duration",
            ));
        }
        for (path, grid, order) in [
            ("angles.theta", &self.theta_grid, MomentOrder::Second),
            ("angles.phi", &self.phi_grid, MomentOrder::Fourth),
        ] {
            at(path, AngleGrid::new(grid.angles_deg().to_vec()))?;
            if grid.distinct_count() < order.min_angles() {
                return Err(Error::Config(format!(
                    "{path}: need at least {} distinct angles (mod 180 deg), got {}",
                    order.min_angles(),
                    grid.distinct_count()
                )));
            }
        }
        let mut warnings = Vec::new();
        for (name, spec) in [("soi", &self.soi), ("interference", &self.interference)] {
            let sps = samples_per_symbol(fs, spec.rate_hz)?;
            if let Some(w) = self.pulse.phase_coverage_warning(fs, sps) {
                warnings.push(format!("{name}: {w}"));
            }
        }
        Ok(warnings)
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    /// Symbol periods (in samples) of both sources.
    pub fn symbol_samples(&self) -> Vec<usize> {
        symbol_samples(self.sample_rate_hz, &self.soi, &self.interference)
    }

    /// Expected number of gated samples.
    pub fn expected_gated_samples(&self) -> usize {
        ((self.duration_s - self.pulse.offset_s) * self.pulse.rep_rate_hz)
            .floor()
            .max(0.0) as usize
    }

    /// Replaces the gating rate with the one matching `ratio`.
    pub fn with_ratio(&self, ratio: f64) -> Result<Self> {
        let mut out = self.clone();
        out.pulse.rep_rate_hz = PulseTrain::rep_rate_for_ratio(
            ratio,
            self.signal_bandwidth_hz,
            self.sample_rate_hz,
            &self.symbol_samples(),
        )?;
        out.pulse.validate()?;
        Ok(out)
    }

    /// Kurtosis of each source kind (SOI, interference).
    pub fn source_kurtosis(&self) -> (f64, f64) {
        (self.soi.kind.kurtosis(), self.interference.kind.kurtosis())
    }
}

fn symbol_samples(fs: f64, soi: &SourceSpec, interference: &SourceSpec) -> Vec<usize> {
    [soi, interference]
        .iter()
        .filter_map(|s| samples_per_symbol(fs, s.rate_hz).ok())
        .collect()
}
