//! Uniformly sampled laser output and its on-disk formats.
//!
//! Binary layout (little endian), 64-byte header followed by the samples with
//! channels interleaved in mask order (intensity, phase, carriers):
//!
//! | offset | size | field                |
//! |--------|------|----------------------|
//! | 0      | 4    | magic `LKTR`         |
//! | 4      | 4    | version (u32)        |
//! | 8      | 8    | dt in seconds (f64)  |
//! | 16     | 8    | sample count (u64)   |
//! | 24     | 4    | channel mask (u32)   |
//! | 28     | 4    | reserved             |
//! | 32     | 8    | seed (u64)           |
//! | 40     | 8    | kappa in 1/s (f64)   |
//! | 48     | 8    | rho (f64)            |
//! | 56     | 8    | tau_ext in s (f64)   |

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::integrator::{Diagnostics, HistoryInit};
use crate::params::{DriveConfig, FeedbackConfig, LaserParams};

pub const TRACE_MAGIC: [u8; 4] = *b"LKTR";
pub const TRACE_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

/// Set of recorded channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChannelMask(u32);

impl ChannelMask {
    pub const INTENSITY: ChannelMask = ChannelMask(1);
    pub const PHASE: ChannelMask = ChannelMask(2);
    pub const CARRIERS: ChannelMask = ChannelMask(4);
    pub const ALL: ChannelMask = ChannelMask(7);

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn from_bits(bits: u32) -> Result<Self> {
        if bits & 1 == 0 || bits & !7 != 0 {
            return Err(Error::Parse(format!("invalid channel mask {bits:#x}")));
        }
        Ok(ChannelMask(bits))
    }

    pub fn contains(self, other: ChannelMask) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }
}

impl std::ops::BitOr for ChannelMask {
    type Output = ChannelMask;
    fn bitor(self, rhs: Self) -> Self {
        ChannelMask(self.0 | rhs.0)
    }
}

/// Everything needed to regenerate a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub params: LaserParams,
    pub feedback: FeedbackConfig,
    pub drive: DriveConfig,
    pub step_h: f64,
    pub t_transient: f64,
    pub history_init: HistoryInit,
    pub seed: u64,
    pub diagnostics: Diagnostics,
}

impl TraceMeta {
    /// Metadata for a trace that did not come from the integrator.
    pub fn synthetic(dt: f64) -> Self {
        Self {
            params: LaserParams::default(),
            feedback: FeedbackConfig::default(),
            drive: DriveConfig { rho: 1.0 },
            step_h: dt,
            t_transient: 0.0,
            history_init: HistoryInit::Constant,
            seed: 0,
            diagnostics: Diagnostics::default(),
        }
    }

    /// `key=value` pairs describing the run, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let p = &self.params;
        vec![
            ("alpha", format!("{}", p.alpha)),
            ("tau_p_s", format!("{:e}", p.tau_p)),
            ("tau_n_s", format!("{:e}", p.tau_n)),
            ("g_n_per_s", format!("{:e}", p.g_n)),
            ("n0", format!("{:e}", p.n0)),
            ("epsilon", format!("{:e}", p.epsilon)),
            ("lambda_m", format!("{:e}", p.lambda)),
            ("kappa_per_s", format!("{:e}", self.feedback.kappa)),
            ("tau_ext_s", format!("{:e}", self.feedback.tau_ext)),
            ("phase_c_rad", format!("{}", self.feedback.phase_c)),
            ("rho", format!("{}", self.drive.rho)),
            ("step_h_s", format!("{:e}", self.step_h)),
            ("t_transient_s", format!("{:e}", self.t_transient)),
            ("history", self.history_init.as_str().to_string()),
            ("seed", self.seed.to_string()),
            ("steps", self.diagnostics.steps.to_string()),
            ("floor_hits", self.diagnostics.floor_hits.to_string()),
        ]
    }
}

/// Writes `# key=value` comment lines.
pub fn comment_header<K: AsRef<str>, V: AsRef<str>>(entries: &[(K, V)]) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        let _ = writeln!(out, "# {}={}", k.as_ref(), v.as_ref());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    dt: f64,
    intensity: Vec<f64>,
    phase: Option<Vec<f64>>,
    carriers: Option<Vec<f64>>,
    pub meta: TraceMeta,
}

impl Trace {
    pub fn new(
        dt: f64,
        intensity: Vec<f64>,
        phase: Option<Vec<f64>>,
        carriers: Option<Vec<f64>>,
        meta: TraceMeta,
    ) -> Result<Self> {
        if intensity.is_empty() {
            return Err(Error::InsufficientData("trace has no samples".into()));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
        }
        if intensity.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("intensity", "samples must be finite and >= 0"));
        }
        for ch in [&phase, &carriers].into_iter().flatten() {
            if ch.len() != intensity.len() {
                return Err(Error::invalid("channels", "channel lengths differ"));
            }
        }
        Ok(Self {
            dt,
            intensity,
            phase,
            carriers,
            meta,
        })
    }

    /// Intensity-only trace with synthetic metadata.
    pub fn from_intensity(dt: f64, intensity: Vec<f64>) -> Result<Self> {
        Self::new(dt, intensity, None, None, TraceMeta::synthetic(dt))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.len() as f64
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn phase(&self) -> Option<&[f64]> {
        self.phase.as_deref()
    }

    pub fn carriers(&self) -> Option<&[f64]> {
        self.carriers.as_deref()
    }

    pub fn channels(&self) -> ChannelMask {
        let mut m = ChannelMask::INTENSITY;
        if self.phase.is_some() {
            m = m | ChannelMask::PHASE;
        }
        if self.carriers.is_some() {
            m = m | ChannelMask::CARRIERS;
        }
        m
    }

    pub fn mean_intensity(&self) -> f64 {
        self.intensity.iter().sum::<f64>() / self.len() as f64
    }

    /// σ_I / ⟨I⟩.
    pub fn normalized_std(&self) -> f64 {
        let mean = self.mean_intensity();
        let var = self
            .intensity
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / self.len() as f64;
        var.sqrt() / mean
    }

    /// Returns the same trace with intensity multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.dt,
            self.intensity.iter().map(|v| v * c).collect(),
            self.phase.clone(),
            self.carriers.clone(),
            self.meta.clone(),
        )
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = [0u8; HEADER_LEN];
        header[0..4].copy_from_slice(&TRACE_MAGIC);
        header[4..8].copy_from_slice(&TRACE_VERSION.to_le_bytes());
        header[8..16].copy_from_slice(&self.dt.to_le_bytes());
        header[16..24].copy_from_slice(&(self.len() as u64).to_le_bytes());
        header[24..28].copy_from_slice(&self.channels().bits().to_le_bytes());
        header[32..40].copy_from_slice(&self.meta.seed.to_le_bytes());
        header[40..48].copy_from_slice(&self.meta.feedback.kappa.to_le_bytes());
        header[48..56].copy_from_slice(&self.meta.drive.rho.to_le_bytes());
        header[56..64].copy_from_slice(&self.meta.feedback.tau_ext.to_le_bytes());
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.len() * 8 * self.channels().count());
        for i in 0..self.len() {
            buf.extend_from_slice(&self.intensity[i].to_le_bytes());
            if let Some(p) = &self.phase {
                buf.extend_from_slice(&p[i].to_le_bytes());
            }
            if let Some(c) = &self.carriers {
                buf.extend_from_slice(&c[i].to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Reads a binary trace. Laser constants absent from the header are left at
    /// their defaults in the returned metadata.
    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        if header[0..4] != TRACE_MAGIC {
            return Err(Error::Parse("not a trace file (bad magic)".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != TRACE_VERSION {
            return Err(Error::Parse(format!("unsupported trace version {version}")));
        }
        let dt = f64_at(8);
        let count = u64_at(16) as usize;
        let mask = ChannelMask::from_bits(u32_at(24))?;
        let mut meta = TraceMeta::synthetic(dt);
        meta.seed = u64_at(32);
        meta.feedback = FeedbackConfig::new(f64_at(40), f64_at(56), 0.0)?;
        meta.drive = DriveConfig::new(f64_at(48))?;

        let width = mask.count();
        let mut raw = Vec::new();
        r.read_to_end(&mut raw)?;
        if raw.len() != count * width * 8 {
            return Err(Error::Parse(format!(
                "payload holds {} bytes, header promises {}",
                raw.len(),
                count * width * 8
            )));
        }
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let column = |k: usize| -> Vec<f64> { values.iter().skip(k).step_by(width).copied().collect() };
        let intensity = column(0);
        let mut k = 1;
        let phase = mask.contains(ChannelMask::PHASE).then(|| {
            k += 1;
            column(k - 1)
        });
        let carriers = mask.contains(ChannelMask::CARRIERS).then(|| column(k));
        Trace::new(dt, intensity, phase, carriers, meta)
    }

    /// CSV with columns `t_ns,intensity,phase_rad,carriers`; missing channels are empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(comment_header(&self.meta.entries()).as_bytes())?;
        writeln!(w, "t_ns,intensity,phase_rad,carriers")?;
        let opt = |v: Option<&Vec<f64>>, i: usize| v.map(|c| format!("{}", c[i])).unwrap_or_default();
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                i as f64 * self.dt * 1e9,
                self.intensity[i],
                opt(self.phase.as_ref(), i),
                opt(self.carriers.as_ref(), i)
            )?;
        }
        Ok(())
    }
}
