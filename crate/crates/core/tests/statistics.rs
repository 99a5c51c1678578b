//! Monte Carlo checks of the estimators against the analytic oracles.

use subnyq_core::angle::cos_sin_deg;
use subnyq_core::evalkit::kurt_curve_oracle;
use subnyq_core::signalgen::{gen_gaussian, gen_nrz, gen_qam16_real};
use subnyq_core::sweep::trial_seed;
use subnyq_core::util::median;
use subnyq_core::{run_pipeline, ScenarioConfig};

fn check_kurt_oracle(s1: &[f64], s2: &[f64], kappa1: f64, kappa2: f64) {
    let n = s1.len() as f64;
    for k in 0..12 {
        let psi = 15.0 * k as f64;
        let (c, s) = cos_sin_deg(psi);
        let y4: Vec<f64> = s1
            .iter()
            .zip(s2)
            .map(|(a, b)| (c * a + s * b).powi(4))
            .collect();
        let mean = y4.iter().sum::<f64>() / n;
        let var = y4.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let expected = kurt_curve_oracle(kappa1, kappa2, 0.0, psi);
        assert!(
            (mean - expected).abs() <= 3.0 * se,
            "psi = {psi}: Monte Carlo {mean} vs oracle {expected} (3 SE = {})",
            3.0 * se
        );
    }
}

#[test]
fn kurt_oracle_matches_monte_carlo() {
    let n = 1_000_000;
    let qam = gen_qam16_real(1.0, n, 1.0, 21).unwrap();
    let gauss = gen_gaussian(1.0, n, 1.0, 22).unwrap();
    let nrz = gen_nrz(1.0, n, 1.0, 23).unwrap();
    check_kurt_oracle(qam.samples(), gauss.samples(), 1.64, 3.0);
    check_kurt_oracle(nrz.samples(), gauss.samples(), 1.0, 3.0);
    check_kurt_oracle(nrz.samples(), qam.samples(), 1.0, 1.64);
}

fn scenario(duration_s: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::from_toml_str(
        r#"
[run]
sample_rate = "1G"
duration = "1m"
master_seed = 99

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
ratio = 0.01
"#,
    )
    .unwrap();
    cfg.duration_s = duration_s;
    cfg
}

#[test]
fn theta0_error_shrinks_with_sample_count() {
    let base = scenario(1e-3);
    let rep = base.pulse.rep_rate_hz;
    let mut medians = Vec::new();
    for n in [256usize, 1024, 4096] {
        let cfg = scenario((n as f64 + 0.5) / rep);
        let errors: Vec<f64> = (0..32)
            .map(|t| {
                let mut c = cfg.clone();
                c.master_seed = trial_seed(cfg.master_seed, n as f64, t);
                let r = run_pipeline(&c).unwrap();
                assert!(
                    r.gated_samples.abs_diff(n) <= 1,
                    "{} gated samples",
                    r.gated_samples
                );
                r.angle_errors.theta0_deg
            })
            .collect();
        medians.push(median(&errors).unwrap());
    }
    assert!(
        medians[0] > medians[1] && medians[1] > medians[2],
        "{medians:?}"
    );
}
