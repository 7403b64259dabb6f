//! Physical constants of the laser model and the derived quantities built from them.
//!
//! All values are SI. Carrier and photon numbers are dimensionless counts; the
//! gain coefficient is per second per carrier and the field amplitude squared is
//! a photon number.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Elementary charge in coulombs.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Intrinsic constants of a single-mode semiconductor laser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserParams {
    /// Linewidth-enhancement factor.
    pub alpha: f64,
    /// Photon lifetime (s).
    pub tau_p: f64,
    /// Carrier lifetime (s).
    pub tau_n: f64,
    /// Differential gain coefficient (1/s per carrier).
    pub g_n: f64,
    /// Carrier number at transparency.
    pub n0: f64,
    /// Gain saturation coefficient (per photon).
    pub epsilon: f64,
    /// Emission wavelength (m).
    pub lambda: f64,
    /// Elementary charge (C).
    pub e_charge: f64,
}

impl Default for LaserParams {
    fn default() -> Self {
        Self {
            alpha: 5.0,
            tau_p: 2.5e-12,
            tau_n: 2.3e-9,
            // 2.56e-8 per ps
            g_n: 2.56e4,
            n0: 1.35e8,
            epsilon: 5e-7,
            lambda: 1.55e-6,
            e_charge: ELEMENTARY_CHARGE,
        }
    }
}

impl LaserParams {
    pub fn validate(self) -> Result<Self> {
        let positive = [
            ("alpha", self.alpha),
            ("tau_p", self.tau_p),
            ("tau_n", self.tau_n),
            ("g_n", self.g_n),
            ("n0", self.n0),
            ("lambda", self.lambda),
            ("e_charge", self.e_charge),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::invalid(
                "epsilon",
                format!("must be finite and >= 0, got {}", self.epsilon),
            ));
        }
        Ok(self)
    }

    /// Carrier number at which modal gain balances cavity loss.
    pub fn threshold_carriers(&self) -> f64 {
        self.n0 + 1.0 / (self.g_n * self.tau_p)
    }

    /// Optical angular frequency 2πc/λ.
    pub fn angular_frequency(&self) -> f64 {
        TAU * SPEED_OF_LIGHT / self.lambda
    }
}

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Threshold current e·(1/τ_N)·[N₀ + 1/(G_N·τ_p)] in amperes.
pub fn threshold_current(p: &LaserParams) -> f64 {
    p.e_charge * p.threshold_carriers() / p.tau_n
}

/// Pump rate ρ·J_th/e in carriers per second.
pub fn carrier_injection_rate(p: &LaserParams, d: &DriveConfig) -> f64 {
    d.rho * p.threshold_carriers() / p.tau_n
}

/// External cavity feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackConfig {
    /// Feedback rate (1/s).
    pub kappa: f64,
    /// Round-trip delay of the external cavity (s).
    pub tau_ext: f64,
    /// Round-trip phase ωτ reduced to [0, 2π).
    pub phase_c: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            kappa: 0.0,
            tau_ext: 99.85e-9,
            phase_c: 0.0,
        }
    }
}

impl FeedbackConfig {
    /// Builds a validated record; `phase_c` is reduced modulo 2π.
    pub fn new(kappa: f64, tau_ext: f64, phase_c: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::invalid("kappa", format!("must be >= 0, got {kappa}")));
        }
        if !(tau_ext.is_finite() && tau_ext > 0.0) {
            return Err(Error::invalid("tau_ext", format!("must be > 0, got {tau_ext}")));
        }
        if !phase_c.is_finite() {
            return Err(Error::invalid("phase_c", "must be finite"));
        }
        let mut phase = phase_c.rem_euclid(TAU);
        if phase >= TAU {
            phase = 0.0;
        }
        Ok(Self {
            kappa,
            tau_ext,
            phase_c: phase,
        })
    }

    pub fn with_kappa(kappa: f64) -> Result<Self> {
        let d = Self::default();
        Self::new(kappa, d.tau_ext, d.phase_c)
    }
}

/// Pump level relative to threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveConfig {
    pub rho: f64,
}

impl DriveConfig {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::invalid("rho", format!("must be > 0, got {rho}")));
        }
        Ok(Self { rho })
    }

    /// Injection current ρ·J_th in amperes.
    pub fn current(&self, p: &LaserParams) -> f64 {
        self.rho * threshold_current(p)
    }
}

/// Measured pairing between feedback power fraction η and model feedback rate κ.
///
/// The relation is kept tabular: points are joined by straight segments and
/// nothing is extrapolated.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaKappaCalibration {
    /// (kappa in 1/s, eta as a fraction), strictly increasing in both.
    points: Vec<(f64, f64)>,
}

impl Default for EtaKappaCalibration {
    fn default() -> Self {
        Self {
            points: vec![(5.5e9, 0.031), (7.0e9, 0.063), (11.0e9, 0.125), (20.0e9, 0.25)],
        }
    }
}

impl EtaKappaCalibration {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("calibration", "needs at least two points"));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(Error::invalid(
                    "calibration",
                    "kappa and eta columns must be strictly increasing",
                ));
            }
        }
        if points.iter().any(|&(k, e)| !(k.is_finite() && e.is_finite() && k >= 0.0 && e >= 0.0)) {
            return Err(Error::invalid("calibration", "entries must be finite and >= 0"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eta_range(&self) -> (f64, f64) {
        (self.points[0].1, self.points[self.points.len() - 1].1)
    }

    pub fn kappa_range(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    pub fn eta_to_kappa(&self, eta: f64) -> Result<f64> {
        let pairs: Vec<(f64, f64)> = self.points.iter().map(|&(k, e)| (e, k)).collect();
        interpolate(&pairs, eta)
    }

    pub fn kappa_to_eta(&self, kappa: f64) -> Result<f64> {
        interpolate(&self.points, kappa)
    }
}

/// Piecewise-linear lookup in a table sorted by its first column.
fn interpolate(table: &[(f64, f64)], x: f64) -> Result<f64> {
    let (lo, hi) = (table[0].0, table[table.len() - 1].0);
    if !(x >= lo && x <= hi) {
        return Err(Error::OutOfRange {
            value: x,
            min: lo,
            max: hi,
        });
    }
    for w in table.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x == x0 {
            return Ok(y0);
        }
        if x == x1 {
            return Ok(y1);
        }
        if x > x0 && x < x1 {
            return Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0));
        }
    }
    unreachable!("x lies inside the table range")
}
