//! End-to-end scenario execution.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::angle::angular_distance_deg;
use crate::error::{Error, Result, StageExt};
use crate::estimator::{
    fit_fourth_moment_with_noise, fit_second_moment, fourth_harmonic_standard_error, moment_curve,
    CurvePoint, FourthMomentFit, MomentOrder, SecondMomentFit,
};
use crate::evalkit::{
    ber, correlation, correlation_metric, cov_oracle, eye_diagram, grid_fit_oracle,
    kurt_coefficients, nrz_bits, oracle_chain, sinr_gain, CovOracle, EyeBins, EyeDiagram, EyeInput,
    KurtCoefficients, SeparationReport, SINR_CAP_DB,
};
use crate::rng::{derive_seed, stream};
use crate::sampler::{gate_pair, sampling_ratio, SampleSet};
use crate::scenario::ScenarioConfig;
use crate::separator::{
    apply_demix, build_ica, build_pca, compose_demix, mix, sample_kurtosis, whiten,
    whitening_demix, Channel, DemixMatrix, Mat2,
};
use crate::signalgen::{SourceKind, Waveform};

/// Outcome class of a run. Anything but `Ok` maps to exit code 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// Second principal component empty; de-mixing fell back to the PC rotation.
    DegenerateCovariance,
    /// Flat kurtosis curve; de-mixing fell back to whitening only.
    IcaUnidentifiable,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            _ => 2,
        }
    }
}

/// Noiseless reference values for the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleValues {
    pub cov: CovOracle,
    pub kurt: KurtCoefficients,
    /// SOI direction after oracle whitening (absent if the oracle covariance is rank one).
    pub alpha_deg: Option<f64>,
    /// Kurtosis-minimizing axis of the oracle 4th-order curve.
    pub phi0_deg: Option<f64>,
    pub whitened_variance: Option<f64>,
}

/// Estimated-minus-oracle angle errors, folded to the relevant period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleErrors {
    pub theta0_deg: f64,
    pub phi0_deg: Option<f64>,
}

/// Distance between least-squares and brute-force grid angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub theta0_deg: f64,
    pub phi0_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub angle_deg: f64,
    pub theory: Option<f64>,
    pub estimated: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub generate_s: f64,
    pub gate_s: f64,
    pub estimate_s: f64,
    pub separate_s: f64,
    pub metrics_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub status: RunStatus,
    pub messages: Vec<String>,
    pub sampling_ratio: f64,
    pub gated_samples: usize,
    pub fit2: SecondMomentFit,
    pub fit4: Option<FourthMomentFit>,
    pub demix: DemixMatrix,
    pub oracle: OracleValues,
    pub angle_errors: AngleErrors,
    pub grid_check: GridCheck,
    /// |off-diagonal| / mean variance of the whitened gated samples.
    pub whiteness: Option<f64>,
    pub separation: SeparationReport,
    pub moment2: Vec<CurveRow>,
    pub moment4: Vec<CurveRow>,
    pub eye: EyeDiagram,
    /// Wall-clock stage timings; never serialized so reports stay byte-stable.
    #[serde(skip)]
    pub timings: Option<Timings>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }
}

/// Everything the pipeline produced, for callers that need the waveforms too.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub soi: Waveform,
    pub interference: Waveform,
    pub mixed: (Waveform, Waveform),
    pub gated: SampleSet,
    pub whitened: Option<SampleSet>,
    pub separated: (Waveform, Waveform),
}

pub fn run_pipeline(cfg: &ScenarioConfig) -> Result<RunReport> {
    run_pipeline_with_artifacts(cfg).map(|(r, _)| r)
}

fn covariance_whiteness(s: &SampleSet) -> Result<f64> {
    let (a, b) = s.pair()?;
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        vaa += (x - ma) * (x - ma);
        vbb += (y - mb) * (y - mb);
        vab += (x - ma) * (y - mb);
    }
    Ok(vab.abs() / (0.5 * (vaa + vbb)))
}

fn cap_db(v: f64) -> f64 {
    v.clamp(-SINR_CAP_DB, SINR_CAP_DB)
}

pub fn run_pipeline_with_artifacts(cfg: &ScenarioConfig) -> Result<(RunReport, RunArtifacts)> {
    let mut messages = cfg.validate().stage("config")?;
    let mut timings = Timings::default();
    let fs = cfg.sample_rate_hz;
    let n = cfg.n_samples();

    let t0 = Instant::now();
    let seed_of = |spec_seed: Option<u64>, idx: u64| {
        spec_seed.unwrap_or_else(|| derive_seed(cfg.master_seed, &[idx]))
    };
    let soi = cfg
        .soi
        .realize(fs, n, seed_of(cfg.soi.seed, stream::SOI))
        .stage("generate soi")?;
    let interference = cfg
        .interference
        .realize(fs, n, seed_of(cfg.interference.seed, stream::INTERFERENCE))
        .stage("generate interference")?;
    let (x1, x2) = mix(&cfg.mixing, &soi, &interference).stage("mix")?;
    timings.generate_s = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let gated = gate_pair(
        &x1,
        &x2,
        &cfg.pulse,
        derive_seed(cfg.master_seed, &[stream::JITTER]),
    )
    .stage("gate")?;
    timings.gate_s = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let curve2 =
        moment_curve(&gated, &cfg.theta_grid, MomentOrder::Second).stage("second-moment curve")?;
    let fit2 = fit_second_moment(&curve2).stage("second-moment fit")?;
    let grid2 = grid_fit_oracle(&curve2, MomentOrder::Second).stage("second-moment grid check")?;
    let mut status = RunStatus::Ok;
    let mut fit4 = None;
    let mut curve4: Vec<CurvePoint> = Vec::new();
    let mut grid4_distance = None;
    let mut whitened = None;
    let mut whiteness = None;
    let demix = match build_pca(&fit2) {
        Err(e @ Error::DegenerateCovariance { .. }) => {
            status = RunStatus::DegenerateCovariance;
            messages.push(format!("pca: {e}"));
            // rank-one mixture: project onto the principal direction
            DemixMatrix {
                w: Mat2::rotation(fit2.theta0_deg).transpose(),
                soi_channel: Channel::One,
                pca: crate::separator::PcaModel {
                    theta0_deg: fit2.theta0_deg,
                    sigma_ratio: 1.0,
                    u: Mat2::rotation(fit2.theta0_deg),
                    sigma: Mat2::IDENTITY,
                },
                ica: None,
            }
        }
        Err(e) => return Err(e).stage("pca"),
        Ok(pca) => {
            if fit2.degenerate {
                messages.push("pca: principal direction unreliable (q2 < 1e-3 q1)".into());
            }
            let white = whiten(&gated, &pca).stage("whiten")?;
            whiteness = Some(covariance_whiteness(&white).stage("whiten")?);
            curve4 = moment_curve(&white, &cfg.phi_grid, MomentOrder::Fourth)
                .stage("fourth-moment curve")?;
            let se = if white.len() >= 2 {
                fourth_harmonic_standard_error(&white).stage("fourth-moment fit")?
            } else {
                f64::INFINITY
            };
            let f4 = fit_fourth_moment_with_noise(&curve4, se).stage("fourth-moment fit")?;
            let grid4 =
                grid_fit_oracle(&curve4, MomentOrder::Fourth).stage("fourth-moment grid check")?;
            grid4_distance = Some(angular_distance_deg(grid4.angle_deg, f4.phi0_deg, 90.0));
            fit4 = Some(f4);
            whitened = Some(white);
            let d = match build_ica(&f4) {
                Ok(ica) => compose_demix(&ica, &pca),
                Err(e @ Error::IcaUnidentifiable { .. }) => {
                    status = RunStatus::IcaUnidentifiable;
                    messages.push(format!("ica: {e}"));
                    whitening_demix(&pca)
                }
                Err(e) => return Err(e).stage("ica"),
            };
            d.with_soi_from(&gated).stage("resolve soi")?
        }
    };
    timings.estimate_s = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let (y1, y2) = apply_demix(&demix, &x1, &x2).stage("apply demix")?;
    timings.separate_s = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let y_soi = match demix.soi_channel {
        Channel::One => &y1,
        Channel::Two => &y2,
    };
    let corr_soi = match correlation_metric(y_soi, &soi) {
        Ok(c) => c,
        Err(Error::DegenerateSignal(_)) => 0.0,
        Err(e) => return Err(e).stage("metrics"),
    };
    let ber_value = match cfg.soi.kind {
        SourceKind::NrzBinary => {
            let bits = nrz_bits(&soi, cfg.soi.rate_hz).stage("metrics")?;
            Some(ber(y_soi, &bits, cfg.soi.rate_hz).stage("metrics")?)
        }
        _ => None,
    };
    let separation = SeparationReport {
        corr_soi,
        sinr_gain_db: cap_db(sinr_gain(&soi, &interference, &cfg.mixing, &demix).stage("metrics")?),
        kurtosis_out: [sample_kurtosis(y1.samples()), sample_kurtosis(y2.samples())],
        ber: ber_value,
    };

    let (var_s, var_i) = (cfg.soi.rms.powi(2), cfg.interference.rms.powi(2));
    let (kappa_s, kappa_i) = cfg.source_kurtosis();
    let cov = cov_oracle(&cfg.mixing, var_s, var_i);
    let chain = oracle_chain(&cfg.mixing, var_s, var_i, kappa_s, kappa_i, &cfg.phi_grid).ok();
    let oracle = OracleValues {
        cov,
        kurt: kurt_coefficients(kappa_s, kappa_i),
        alpha_deg: chain.as_ref().map(|c| c.alpha_deg),
        phi0_deg: chain.as_ref().map(|c| c.fit4.phi0_deg),
        whitened_variance: chain.as_ref().map(|c| c.whitened_variance),
    };
    let angle_errors = AngleErrors {
        theta0_deg: angular_distance_deg(fit2.theta0_deg, cov.theta0_deg, 180.0),
        phi0_deg: match (&fit4, oracle.phi0_deg) {
            (Some(f), Some(o)) => Some(angular_distance_deg(f.phi0_deg, o, 90.0)),
            _ => None,
        },
    };
    let moment2 = curve2
        .iter()
        .map(|p| CurveRow {
            angle_deg: p.angle_deg,
            theory: Some(cov.eval(p.angle_deg)),
            estimated: p.moment,
        })
        .collect();
    let moment4 = curve4
        .iter()
        .enumerate()
        .map(|(k, p)| CurveRow {
            angle_deg: p.angle_deg,
            theory: chain.as_ref().map(|c| c.curve4[k].moment),
            estimated: p.moment,
        })
        .collect();

    // unit-RMS, polarity-aligned copy of the SOI output for the eye diagram
    let polarity = match correlation_signed(y_soi.samples(), soi.samples()) {
        Some(c) if c < 0.0 => -1.0,
        _ => 1.0,
    };
    let y_rms = y_soi.rms();
    let eye_input = if y_rms > 0.0 {
        y_soi.scaled(polarity / y_rms)
    } else {
        y_soi.clone()
    };
    let eye = eye_diagram(
        EyeInput::Waveform(&eye_input),
        1.0 / cfg.soi.rate_hz,
        EyeBins::default(),
    )
    .stage("eye diagram")?;
    timings.metrics_s = t0.elapsed().as_secs_f64();

    let report = RunReport {
        config: cfg.clone(),
        status,
        messages,
        sampling_ratio: sampling_ratio(&cfg.pulse, cfg.signal_bandwidth_hz),
        gated_samples: gated.len(),
        fit2,
        fit4,
        demix,
        oracle,
        angle_errors,
        grid_check: GridCheck {
            theta0_deg: angular_distance_deg(grid2.angle_deg, fit2.theta0_deg, 180.0),
            phi0_deg: grid4_distance,
        },
        whiteness,
        separation,
        moment2,
        moment4,
        eye,
        timings: Some(timings),
    };
    let artifacts = RunArtifacts {
        soi,
        interference,
        mixed: (x1, x2),
        gated,
        whitened,
        separated: (y1, y2),
    };
    Ok((report, artifacts))
}

fn correlation_signed(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    correlation(a, b).ok().map(|c| c.copysign(cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;

    fn scenario(extra: &str) -> ScenarioConfig {
        let text = format!(
            r#"
[run]
sample_rate = "2G"
duration = "200u"
master_seed = 5

[soi]
kind = "qam16_real"
rate = "200M"
rms = 1

[interference]
kind = "gaussian"
rate = "200M"
rms = 1

[mixing]
a11 = 1
a12 = 0.5
a21 = 0.3
a22 = 1

[pulse]
ratio = 0.05
{extra}
"#
        );
        ScenarioConfig::from_toml_str(&text).unwrap()
    }

    #[test]
    fn separates_default_scenario() {
        let r = run_pipeline(&scenario("")).unwrap();
        assert_eq!(r.status, RunStatus::Ok);
        assert!(r.gated_samples > 3000, "{}", r.gated_samples);
        assert!(r.separation.corr_soi > 0.98, "{:?}", r.separation);
        assert_eq!(r.moment2.len(), 4);
        assert_eq!(r.moment4.len(), 8);
        assert!(r.timings.is_some());
    }

    #[test]
    fn identity_mixing_without_interference() {
        let mut cfg = scenario("");
        cfg.mixing = crate::separator::MixingMatrix::new([[1.0, 0.0], [0.0, 1.0]]).unwrap();
        cfg.interference.rms = 0.0;
        let r = run_pipeline(&cfg).unwrap();
        assert_eq!(r.status, RunStatus::DegenerateCovariance);
        assert!((r.separation.corr_soi - 1.0).abs() < 1e-12);
        assert_eq!(r.exit_code(), 2);
    }

    #[test]
    fn gaussian_pair_is_unidentifiable() {
        let mut cfg = scenario("");
        cfg.soi.kind = SourceKind::Gaussian;
        let r = run_pipeline(&cfg).unwrap();
        assert_eq!(r.status, RunStatus::IcaUnidentifiable);
        assert!(!r.fit4.unwrap().identifiable);
        assert_eq!(r.exit_code(), 2);
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let cfg = scenario("");
        let mut a = run_pipeline(&cfg).unwrap();
        let mut b = run_pipeline(&cfg).unwrap();
        a.timings = None;
        b.timings = None;
        assert_eq!(a, b);
    }
}
