//! Adaptive navigation driven by the phasic component of electrodermal
//! activity (EDA).
//!
//! The crate covers the full offline pipeline:
//!
//! - [`signal`]: traces, resampling, normalization, derivative and the
//!   tonic/phasic split of EDA.
//! - [`scr`]: event-related skin conductance response detection with three
//!   detector styles.
//! - [`control`]: the discrete PID operator, the bi-channel adaptive
//!   acceleration law and the linear EDA-slope baseline.
//! - [`surrogate`]: the simulated user (windowed ridge regressor from
//!   acceleration to phasic EDA) and a synthetic physiological oracle.
//! - [`simulate`] and [`optimize`]: running the law against the surrogate and
//!   searching the eleven gains for the largest share of sessions with fewer
//!   ER-SCRs.
//! - [`train`]: fitting the surrogate on a set of sessions.
//! - [`metrics`]: motion sickness dose value, chi-square / phi and reports.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the double-precision instantiation used by the CLI.

pub mod control;
pub mod dataset;
pub mod error;
pub mod io;
pub mod metrics;
pub mod optimize;
pub mod scalar;
pub mod scr;
pub mod signal;
pub mod simulate;
pub mod surrogate;
pub mod train;

pub use control::{plouzeau_step, pid_step, AdaptiveController, ControlFrame, ControlLimits, PidGains, PidState};
pub use dataset::{synth_cohort, CohortSpec, Manifest, ProfileParams, Split};
pub use error::{Error, Result};
pub use metrics::{build_report, chi_square_phi, msdv, Report, Significance, StatResult};
pub use optimize::{objective_ppn, optimize, GainRanges, Objective, OptimizerConfig, TrialHistory};
pub use scalar::Scalar;
pub use scr::{count_er_scr, detect_scr, standard_detectors, DetectorMethod, DetectorParams, ScrEvent};
pub use signal::{decompose, derivative, normalize, resample, DecompositionConfig, EdaDecomposition, NormParams, Trace, Unit};
pub use simulate::{simulate_session, RawBasis, SessionRecord, SimulationConfig, SimulationMode, SimulationResult};
pub use surrogate::{
    fit_surrogate, make_clips, reconstruct, synth_session, ChannelNorms, Clip, ClipLayout, OracleParams, SurrogateModel,
};
pub use train::{heldout_mae, train_surrogate, TrainConfig};

pub type Trace64 = Trace<f64>;
pub type Trace32 = Trace<f32>;
pub type PidGains64 = PidGains<f64>;
pub type PidGains32 = PidGains<f32>;
pub type SurrogateModel64 = SurrogateModel<f64>;
pub type SurrogateModel32 = SurrogateModel<f32>;
pub type SessionRecord64 = SessionRecord<f64>;
pub type SimulationResult64 = SimulationResult<f64>;
pub type Report64 = Report<f64>;
