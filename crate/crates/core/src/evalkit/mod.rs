//! Separation quality metrics and analytic ground truth.

mod eye;
mod metrics;
mod oracle;

pub use eye::{eye_diagram, EyeBins, EyeDiagram, EyeInput};
pub use metrics::{
    ber, correlation, correlation_metric, nrz_bits, sinr_gain, SeparationReport, SINR_CAP_DB,
};
pub use oracle::{
    cov_oracle, grid_fit_oracle, kurt_coefficients, kurt_curve_oracle, oracle_chain,
    whitened_mixing, CovOracle, GridFit, KurtCoefficients, OracleChain, GRID_STEP_DEG,
};
