//! Lang-Kobayashi chaos simulation and photon statistics.
//!
//! [`integrate`] produces an intensity trace; [`metrics`] turns it into
//! g²(τ), autocorrelation, echo height and spectra; [`counting`] emulates
//! photon detection on it; [`experiment`] runs grids of such pipelines.

pub mod config;
pub mod counting;
pub mod error;
pub mod experiment;
pub mod integrator;
pub mod metrics;
pub mod params;
pub mod trace;

pub use config::{parse_quantity, Dim, FeedbackLevel, ModelConfig};
pub use counting::{Attenuation, CountSeries, DetectorConfig, Pnd};
pub use error::{Error, Result};
pub use experiment::{reproduce_figure, run_sweep, Figure, FigureOptions, SweepResult, SweepSpec};
pub use integrator::{integrate, FloorPolicy, HistoryInit, LaserState, SimConfig};
pub use metrics::{EchoReport, G2Curve, Spectrum};
pub use params::{DriveConfig, EtaKappaCalibration, FeedbackConfig, LaserParams};
pub use trace::{ChannelMask, Trace, TraceMeta};
