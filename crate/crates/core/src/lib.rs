//! RIS-assisted mono-static ISAC target detection.
//!
//! A multi-antenna transceiver serves a single-antenna UE while detecting a
//! target through both a direct path and a reconfigurable intelligent surface
//! (RIS). The crate covers:
//!
//! - [`channel`]: planar-array steering, local-scattering correlations and
//!   cascaded RIS channels;
//! - [`sensing`]: the target echo covariance and the precoder gain matrix;
//! - [`detector`]: the clutter-subspace GLRT and its Monte Carlo calibration;
//! - [`optimizer`]: RIS phase alignment and SNR-constrained precoding;
//! - [`harness`]: configuration, SNR sweeps and CSV/JSON output.

pub mod channel;
pub mod detector;
pub mod error;
pub mod harness;
pub mod montecarlo;
pub mod numerics;
pub mod optimizer;
pub mod sensing;
#[doc(hidden)]
pub mod testutil;

pub use error::{Error, Result};
pub use harness::{run_curve, CurveTable, ScenarioConfig};
pub use numerics::{CMatrix, CVector};
