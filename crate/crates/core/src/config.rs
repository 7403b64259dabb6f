//! Parameter files and unit-suffixed scalars.
//!
//! A parameter file holds one `key = value` pair per line; `#` starts a
//! comment. Keys carry their unit in the name (`tau_p_ps`), so values there
//! are bare numbers. Command-line quantities instead spell the unit out
//! (`50ns-1`, `2ps`, `10us`) and a bare number is refused.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::{DriveConfig, EtaKappaCalibration, FeedbackConfig, LaserParams};

/// Physical dimension expected of a scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Time,
    /// Inverse time, written as `ns-1`, `ps-1`, ...
    Rate,
    Frequency,
    Length,
    Current,
    /// Bare number or percentage.
    Fraction,
    /// Radians; bare numbers allowed.
    Angle,
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dim::Time => "time (s, ms, us, ns, ps, fs)",
            Dim::Rate => "rate (s-1, ms-1, us-1, ns-1, ps-1)",
            Dim::Frequency => "frequency (Hz, kHz, MHz, GHz)",
            Dim::Length => "length (m, mm, um, nm)",
            Dim::Current => "current (A, mA, uA)",
            Dim::Fraction => "fraction (bare or %)",
            Dim::Angle => "angle (rad or bare)",
        };
        f.write_str(s)
    }
}

/// Decimal exponent of a unit relative to SI.
fn unit_exponent(dim: Dim, unit: &str) -> Option<i32> {
    let time = |u: &str| match u {
        "s" => Some(0),
        "ms" => Some(-3),
        "us" | "µs" => Some(-6),
        "ns" => Some(-9),
        "ps" => Some(-12),
        "fs" => Some(-15),
        _ => None,
    };
    match dim {
        Dim::Time => time(unit),
        Dim::Rate => unit
            .strip_suffix("-1")
            .or_else(|| unit.strip_suffix("^-1"))
            .and_then(time)
            .map(|e| -e),
        Dim::Frequency => match unit {
            "Hz" => Some(0),
            "kHz" => Some(3),
            "MHz" => Some(6),
            "GHz" => Some(9),
            _ => None,
        },
        Dim::Length => match unit {
            "m" => Some(0),
            "mm" => Some(-3),
            "um" | "µm" => Some(-6),
            "nm" => Some(-9),
            _ => None,
        },
        Dim::Current => match unit {
            "A" => Some(0),
            "mA" => Some(-3),
            "uA" | "µA" => Some(-6),
            _ => None,
        },
        Dim::Fraction => match unit {
            "" => Some(0),
            "%" => Some(-2),
            _ => None,
        },
        Dim::Angle => match unit {
            "" | "rad" => Some(0),
            _ => None,
        },
    }
}

/// `v · 10^exp`, dividing for negative exponents so decimal inputs stay exact.
pub fn pow10(v: f64, exp: i32) -> f64 {
    if exp >= 0 {
        v * 10f64.powi(exp)
    } else {
        v / 10f64.powi(-exp)
    }
}

/// Parses `<number><unit>` into SI.
pub fn parse_quantity(text: &str, dim: Dim) -> Result<f64> {
    let t = text.trim();
    let split = t
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || ((c == '+' || c == '-') && (i == 0 || matches!(t.as_bytes()[i - 1], b'e' | b'E')))
                || ((c == 'e' || c == 'E')
                    && t[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+')))
        })
        .map_or(t.len(), |(i, _)| i);
    let (num, unit) = t.split_at(split);
    let value: f64 = num
        .parse()
        .map_err(|_| Error::Parse(format!("`{text}` does not start with a number")))?;
    let unit = unit.trim();
    if unit.is_empty() && !matches!(dim, Dim::Fraction | Dim::Angle) {
        return Err(Error::Parse(format!("`{text}` needs a unit; expected {dim}")));
    }
    let exp = unit_exponent(dim, unit)
        .ok_or_else(|| Error::Parse(format!("unit `{unit}` in `{text}` is not a {dim}")))?;
    Ok(pow10(value, exp))
}

/// The feedback level as the user gave it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeedbackLevel {
    /// Feedback rate (1/s).
    Kappa(f64),
    /// Fed-back power fraction, resolved through the calibration table.
    Eta(f64),
}

impl FeedbackLevel {
    pub fn kappa(&self, cal: &EtaKappaCalibration) -> Result<f64> {
        match *self {
            FeedbackLevel::Kappa(k) => Ok(k),
            FeedbackLevel::Eta(e) => cal.eta_to_kappa(e),
        }
    }

    pub fn eta(&self) -> Option<f64> {
        match *self {
            FeedbackLevel::Eta(e) => Some(e),
            FeedbackLevel::Kappa(_) => None,
        }
    }
}

/// Keys accepted in a parameter file.
pub const KEYS: [&str; 12] = [
    "alpha",
    "tau_p_ps",
    "tau_n_ns",
    "g_n_per_ps",
    "n0",
    "epsilon",
    "lambda_um",
    "kappa_per_ns",
    "eta_percent",
    "tau_ext_ns",
    "phase_c_rad",
    "rho",
];

/// Device, feedback and drive settings resolved from defaults, a file and overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub params: LaserParams,
    pub level: FeedbackLevel,
    pub tau_ext: f64,
    pub phase_c: f64,
    pub rho: f64,
    pub calibration: EtaKappaCalibration,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let f = FeedbackConfig::default();
        Self {
            params: LaserParams::default(),
            level: FeedbackLevel::Kappa(f.kappa),
            tau_ext: f.tau_ext,
            phase_c: f.phase_c,
            rho: 1.5,
            calibration: EtaKappaCalibration::default(),
        }
    }
}

impl ModelConfig {
    /// Defaults overlaid with the contents of a parameter file.
    pub fn from_str_file(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            let key = key.trim();
            let canon = KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| Error::config(key, format!("unknown key (line {})", lineno + 1)))?;
            if seen.contains(canon) {
                return Err(Error::config(key, format!("given twice (line {})", lineno + 1)));
            }
            if (*canon == "kappa_per_ns" && seen.contains(&"eta_percent"))
                || (*canon == "eta_percent" && seen.contains(&"kappa_per_ns"))
            {
                return Err(Error::config(key, "kappa_per_ns and eta_percent are exclusive"));
            }
            seen.push(canon);
            cfg.set(key, value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_str_file(&std::fs::read_to_string(path)?)
    }

    /// Applies one file-style `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v: f64 = value
            .parse()
            .map_err(|_| Error::config(key, format!("`{value}` is not a number")))?;
        if !v.is_finite() {
            return Err(Error::config(key, "must be finite"));
        }
        let p = &mut self.params;
        match key {
            "alpha" => p.alpha = v,
            "tau_p_ps" => p.tau_p = pow10(v, -12),
            "tau_n_ns" => p.tau_n = pow10(v, -9),
            "g_n_per_ps" => p.g_n = pow10(v, 12),
            "n0" => p.n0 = v,
            "epsilon" => p.epsilon = v,
            "lambda_um" => p.lambda = pow10(v, -6),
            "kappa_per_ns" => self.level = FeedbackLevel::Kappa(pow10(v, 9)),
            "eta_percent" => self.level = FeedbackLevel::Eta(pow10(v, -2)),
            "tau_ext_ns" => self.tau_ext = pow10(v, -9),
            "phase_c_rad" => self.phase_c = v,
            "rho" => self.rho = v,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Checks every record; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let named = |key: &str, e: Error| match e {
            Error::InvalidParameter { reason, .. } => Error::config(key, reason),
            Error::OutOfRange { value, min, max } => Error::config(
                key,
                format!("{} outside calibrated interval [{}, {}]", value * 100.0, min * 100.0, max * 100.0),
            ),
            other => other,
        };
        self.params.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::config(file_key(name), reason),
            other => other,
        })?;
        let kappa = self.level.kappa(&self.calibration).map_err(|e| named("eta_percent", e))?;
        FeedbackConfig::new(kappa, self.tau_ext, self.phase_c).map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::config(file_key(name), reason),
            other => other,
        })?;
        DriveConfig::new(self.rho).map_err(|e| named("rho", e))?;
        Ok(())
    }

    pub fn feedback(&self) -> Result<FeedbackConfig> {
        FeedbackConfig::new(self.level.kappa(&self.calibration)?, self.tau_ext, self.phase_c)
    }

    pub fn drive(&self) -> Result<DriveConfig> {
        DriveConfig::new(self.rho)
    }

    /// Resolved settings in parameter-file form, one entry per key.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let p = &self.params;
        let mut out = vec![
            ("alpha", fmt_num(p.alpha)),
            ("tau_p_ps", fmt_num(pow10(p.tau_p, 12))),
            ("tau_n_ns", fmt_num(pow10(p.tau_n, 9))),
            ("g_n_per_ps", fmt_num(pow10(p.g_n, -12))),
            ("n0", fmt_num(p.n0)),
            ("epsilon", fmt_num(p.epsilon)),
            ("lambda_um", fmt_num(pow10(p.lambda, 6))),
        ];
        match self.level {
            FeedbackLevel::Kappa(k) => out.push(("kappa_per_ns", fmt_num(pow10(k, -9)))),
            FeedbackLevel::Eta(e) => out.push(("eta_percent", fmt_num(pow10(e, 2)))),
        }
        out.push(("tau_ext_ns", fmt_num(pow10(self.tau_ext, 9))));
        out.push(("phase_c_rad", fmt_num(self.phase_c)));
        out.push(("rho", fmt_num(self.rho)));
        out
    }

    /// Text that [`ModelConfig::from_str_file`] reads back to the same record.
    pub fn to_file_string(&self) -> String {
        self.entries()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn file_key(field: &str) -> &'static str {
    match field {
        "alpha" => "alpha",
        "tau_p" => "tau_p_ps",
        "tau_n" => "tau_n_ns",
        "g_n" => "g_n_per_ps",
        "n0" => "n0",
        "epsilon" => "epsilon",
        "lambda" => "lambda_um",
        "kappa" => "kappa_per_ns",
        "tau_ext" => "tau_ext_ns",
        "phase_c" => "phase_c_rad",
        _ => "params",
    }
}

/// Shortest decimal that parses back to the same float.
fn fmt_num(v: f64) -> String {
    format!("{v}")
}
