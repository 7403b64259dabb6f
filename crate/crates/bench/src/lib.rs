//! Shared inputs for the benchmarks.

use lkchaos_core::{integrate, DriveConfig, FeedbackConfig, LaserParams, SimConfig, Trace};

/// A chaotic trace of the given recorded length at ρ=1.5, κ=50/ns.
pub fn chaotic_trace(t_record: f64) -> Trace {
    let cfg = SimConfig {
        t_transient: 200e-9,
        t_record,
        ..SimConfig::default()
    };
    integrate(
        &LaserParams::default(),
        &FeedbackConfig::with_kappa(50e9).unwrap(),
        &DriveConfig::new(1.5).unwrap(),
        &cfg,
    )
    .unwrap()
}
