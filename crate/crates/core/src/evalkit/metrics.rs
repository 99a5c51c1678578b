use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::separator::{DemixMatrix, MixingMatrix};
use crate::signalgen::{samples_per_symbol, Waveform};

/// Reports clamp infinite SINR gains to this value.
pub const SINR_CAP_DB: f64 = 120.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    /// |Pearson correlation| between the SOI output and the true SOI.
    pub corr_soi: f64,
    /// Capped at ±`SINR_CAP_DB`.
    pub sinr_gain_db: f64,
    /// Sample kurtosis of each full-rate output channel (`None` if constant).
    pub kurtosis_out: [Option<f64>; 2],
    /// Bit error rate, for binary SOIs only.
    pub ber: Option<f64>,
}

/// |Pearson correlation| of two equally long sequences.
pub fn correlation(est: &[f64], truth: &[f64]) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(Error::config(format!(
            "correlation inputs differ in length ({} vs {})",
            est.len(),
            truth.len()
        )));
    }
    if est.is_empty() {
        return Err(Error::EmptySampleSet(
            "correlation of empty sequences".into(),
        ));
    }
    let n = est.len() as f64;
    let me = est.iter().sum::<f64>() / n;
    let mt = truth.iter().sum::<f64>() / n;
    let (mut see, mut stt, mut set) = (0.0, 0.0, 0.0);
    for (e, t) in est.iter().zip(truth) {
        let (de, dt) = (e - me, t - mt);
        see += de * de;
        stt += dt * dt;
        set += de * dt;
    }
    if see == 0.0 || stt == 0.0 {
        return Err(Error::DegenerateSignal(
            "correlation with a zero-variance signal".into(),
        ));
    }
    Ok((set / (see.sqrt() * stt.sqrt())).abs().min(1.0))
}

/// Sign- and scale-invariant similarity of a separated output to the truth.
pub fn correlation_metric(est: &Waveform, truth: &Waveform) -> Result<f64> {
    if !est.same_geometry(truth) {
        return Err(Error::config("correlation inputs must share geometry"));
    }
    correlation(est.samples(), truth.samples())
}

fn power(w: &Waveform) -> f64 {
    w.samples().iter().map(|v| v * v).sum::<f64>() / w.len() as f64
}

fn sinr(signal_gain: f64, p_s: f64, leak_gain: f64, p_i: f64) -> f64 {
    let num = signal_gain * signal_gain * p_s;
    let den = leak_gain * leak_gain * p_i;
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// SINR improvement (dB) of the SOI output row of `W·A` over the best input channel.
/// Returns `+∞` when the SOI output carries no interference at all.
pub fn sinr_gain(
    soi: &Waveform,
    interference: &Waveform,
    mixing: &MixingMatrix,
    demix: &DemixMatrix,
) -> Result<f64> {
    if !soi.same_geometry(interference) {
        return Err(Error::config("sources must share geometry"));
    }
    let (p_s, p_i) = (power(soi), power(interference));
    if p_i == 0.0 {
        return Ok(0.0);
    }
    let a = mixing.matrix();
    let g = demix.w.mul(a);
    let r = demix.soi_channel.index();
    let after = sinr(g.get(r, 0), p_s, g.get(r, 1), p_i);
    let before = (0..2)
        .map(|row| sinr(a.get(row, 0), p_s, a.get(row, 1), p_i))
        .fold(0.0, f64::max);
    Ok(match (after.is_infinite(), before.is_infinite()) {
        (true, true) => 0.0,
        (true, false) => f64::INFINITY,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => 10.0 * (after / before).log10(),
    })
}

/// Bit decisions of a clean NRZ waveform, read at bit centres.
pub fn nrz_bits(w: &Waveform, bit_rate_hz: f64) -> Result<Vec<bool>> {
    let sps = samples_per_symbol(w.sample_rate_hz(), bit_rate_hz)?;
    Ok(w.samples()
        .chunks_exact(sps)
        .map(|c| c[sps / 2] > 0.0)
        .collect())
}

/// Mid-bit threshold detection against `true_bits`, minimized over both polarities.
pub fn ber(est: &Waveform, true_bits: &[bool], bit_rate_hz: f64) -> Result<f64> {
    let sps = samples_per_symbol(est.sample_rate_hz(), bit_rate_hz)?;
    let available = est.len() / sps;
    if true_bits.is_empty() || available != true_bits.len() {
        return Err(Error::config(format!(
            "estimate holds {available} bits but {} reference bits were given",
            true_bits.len()
        )));
    }
    let x = est.samples();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let errors = true_bits
        .iter()
        .enumerate()
        .filter(|(k, &b)| (x[k * sps + sps / 2] - mean > 0.0) != b)
        .count();
    let n = true_bits.len();
    Ok(errors.min(n - errors) as f64 / n as f64)
}
