//! Fixtures shared by the criterion benchmarks in `benches/`.

use subnyq_core::ScenarioConfig;

/// Qam16 SOI against Gaussian interference, `duration` long, gated at `ratio`.
pub fn scenario(duration: &str, ratio: f64) -> ScenarioConfig {
    ScenarioConfig::from_toml_str(&format!(
        r#"
[run]
sample_rate = "2G"
duration = "{duration}"
master_seed = 1

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
ratio = {ratio}
"#
    ))
    .expect("bench scenario is valid")
}
