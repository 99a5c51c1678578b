//! Sub-Nyquist pulse-gated blind source separation.
//!
//! Two sensor channels observe a linear mixture of a signal of interest and
//! an interferer. Both channels are gated by a shared, very sparse optical
//! pulse train. The mixture is unwound from low-order moment curves of the
//! gated samples: a 2nd-moment curve gives the principal axes (PCA and
//! whitening), and a 4th-moment curve of the whitened data gives the final
//! rotation (ICA).
//!
//! ```no_run
//! use subnyq_core::{run_pipeline, ScenarioConfig};
//!
//! let cfg = ScenarioConfig::from_path("scenario.toml")?;
//! let report = run_pipeline(&cfg)?;
//! println!("corr = {}", report.separation.corr_soi);
//! # Ok::<(), subnyq_core::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod emit;
mod error;
pub mod estimator;
pub mod evalkit;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod scenario;
pub mod separator;
pub mod signalgen;
pub mod sweep;
pub mod util;

pub use error::{Error, Result};
pub use estimator::{AngleGrid, CurvePoint, FourthMomentFit, MomentOrder, SecondMomentFit};
pub use evalkit::{EyeBins, EyeDiagram, SeparationReport};
pub use pipeline::{run_pipeline, run_pipeline_with_artifacts, RunReport, RunStatus};
pub use sampler::{PulseShape, PulseTrain, SampleSet};
pub use scenario::ScenarioConfig;
pub use separator::{Channel, DemixMatrix, Mat2, MixingMatrix};
pub use signalgen::{SourceKind, SourceSpec, Waveform};
pub use sweep::{run_sweep, SweepReport, SweepRow, TrialResult};
