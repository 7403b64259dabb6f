//! Intensity-domain statistics of a trace.
//!
//! Correlations are time averages over a single record: for lag `k` the sum
//! runs over the `N - k` valid sample pairs and is divided by that count, while
//! the mean intensity is taken over the whole record.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::trace::Trace;

/// Default half-width of the window searched for the delay echo.
pub const ECHO_HALF_WINDOW: f64 = 2e-9;

/// How lagged products are summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimator {
    /// Zero-padded FFT correlation, `O(N log N)`.
    #[default]
    Fft,
    /// Explicit double loop, `O(N·L)`.
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct G2Curve {
    /// Lags in seconds, ascending.
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub mean_intensity: f64,
}

impl G2Curve {
    /// Value at zero lag.
    pub fn at_zero(&self) -> f64 {
        let i = self
            .lags
            .iter()
            .position(|&t| t == 0.0)
            .expect("lag grid contains zero");
        self.values[i]
    }

    /// Non-negative half of the curve.
    pub fn one_sided(&self) -> (Vec<f64>, Vec<f64>) {
        self.lags
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= 0.0)
            .map(|(t, v)| (*t, *v))
            .unzip()
    }

    /// CSV with columns `tau_ns,g2` after the given comment header.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::from(header);
        out.push_str("tau_ns,g2\n");
        for (t, v) in self.lags.iter().zip(&self.values) {
            let _ = writeln!(out, "{},{}", t * 1e9, v);
        }
        out
    }
}

/// Normalized intensity autocorrelation on lags `0, dt, 2dt, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct Acf {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl Acf {
    pub fn max_lag(&self) -> f64 {
        self.dt * (self.values.len() - 1) as f64
    }

    pub fn lags(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| k as f64 * self.dt)
    }

    /// First lag at which the correlation falls below `1/e`, linearly
    /// interpolated between samples.
    pub fn coherence_time(&self) -> Option<f64> {
        let level = (-1.0f64).exp();
        self.values.windows(2).enumerate().find_map(|(k, w)| {
            (w[1] < level).then(|| {
                let frac = (w[0] - level) / (w[0] - w[1]);
                (k as f64 + frac) * self.dt
            })
        })
    }

    /// CSV with columns `tau_ns,c`.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::from(header);
        out.push_str("tau_ns,c\n");
        for (t, v) in self.lags().zip(&self.values) {
            let _ = writeln!(out, "{},{}", t * 1e9, v);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoReport {
    pub h: f64,
    pub tau_peak: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Bin centres (Hz), DC excluded.
    pub freqs: Vec<f64>,
    /// One-sided power spectral density (intensity²/Hz).
    pub psd: Vec<f64>,
    /// Equivalent noise bandwidth of the window (Hz).
    pub rbw: f64,
    /// Bin spacing (Hz).
    pub df: f64,
}

impl Spectrum {
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.df
    }

    /// PSD in dB relative to the spectral peak.
    pub fn psd_db(&self) -> Vec<f64> {
        let peak = self.psd.iter().cloned().fold(0.0, f64::max);
        self.psd
            .iter()
            .map(|&p| if peak > 0.0 { 10.0 * (p / peak).max(1e-300).log10() } else { f64::NEG_INFINITY })
            .collect()
    }

    /// CSV with columns `freq_ghz,psd_db`.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::from(header);
        out.push_str("freq_ghz,psd_db\n");
        for (f, db) in self.freqs.iter().zip(self.psd_db()) {
            let _ = writeln!(out, "{},{}", f * 1e-9, db);
        }
        out
    }
}

/// Raw lagged sums `Σ_{t<N-k} x_t·x_{t+k}` for `k = 0..=max_lag`.
pub fn lagged_sums(x: &[f64], max_lag: usize, estimator: Estimator) -> Vec<f64> {
    let max_lag = max_lag.min(x.len().saturating_sub(1));
    match estimator {
        Estimator::Direct => (0..=max_lag)
            .map(|k| x[..x.len() - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum())
            .collect(),
        Estimator::Fft => {
            let n = (x.len() + max_lag + 1).next_power_of_two();
            let mut planner = FftPlanner::<f64>::new();
            let fwd = planner.plan_fft_forward(n);
            let inv = planner.plan_fft_inverse(n);
            let mut buf: Vec<Complex<f64>> = x
                .iter()
                .map(|&v| Complex::new(v, 0.0))
                .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
                .take(n)
                .collect();
            fwd.process(&mut buf);
            for c in buf.iter_mut() {
                *c = Complex::new(c.norm_sqr(), 0.0);
            }
            inv.process(&mut buf);
            let scale = 1.0 / n as f64;
            buf[..=max_lag].iter().map(|c| c.re * scale).collect()
        }
    }
}

fn lag_samples(tr: &Trace, max_lag: f64) -> Result<usize> {
    if !(max_lag.is_finite() && max_lag >= 0.0) {
        return Err(Error::invalid("max_lag", "must be >= 0"));
    }
    if max_lag >= tr.duration() / 2.0 {
        return Err(Error::OutOfRange {
            value: max_lag,
            min: 0.0,
            max: tr.duration() / 2.0,
        });
    }
    Ok((max_lag / tr.dt()).round() as usize)
}

/// Second-order coherence `⟨I(t)I(t+τ)⟩ / ⟨I⟩²` on a symmetric lag grid.
pub fn g2_from_intensity(tr: &Trace, max_lag: f64, lag_stride: usize) -> Result<G2Curve> {
    g2_with(tr, max_lag, lag_stride, Estimator::Fft)
}

pub fn g2_with(tr: &Trace, max_lag: f64, lag_stride: usize, estimator: Estimator) -> Result<G2Curve> {
    if lag_stride == 0 {
        return Err(Error::invalid("lag_stride", "must be >= 1"));
    }
    let lmax = lag_samples(tr, max_lag)?;
    let mean = tr.mean_intensity();
    if mean <= 0.0 {
        return Err(Error::Degenerate("mean intensity is zero".into()));
    }
    let x = tr.intensity();
    let n = x.len();
    // scale to unit mean so sums stay O(N)
    let unit: Vec<f64> = x.iter().map(|v| v / mean).collect();
    let sums = lagged_sums(&unit, lmax, estimator);
    let half: Vec<(f64, f64)> = (0..=lmax)
        .step_by(lag_stride)
        .map(|k| (k as f64 * tr.dt(), sums[k] / (n - k) as f64))
        .collect();
    let mut lags = Vec::with_capacity(2 * half.len() - 1);
    let mut values = Vec::with_capacity(2 * half.len() - 1);
    for &(t, v) in half.iter().skip(1).rev() {
        lags.push(-t);
        values.push(v);
    }
    for &(t, v) in &half {
        lags.push(t);
        values.push(v);
    }
    Ok(G2Curve {
        lags,
        values,
        mean_intensity: mean,
    })
}

/// `1 + Var(I)/⟨I⟩²`, the zero-lag coherence from moments.
pub fn g2_zero(tr: &Trace) -> Result<f64> {
    let mean = tr.mean_intensity();
    if mean <= 0.0 {
        return Err(Error::Degenerate("mean intensity is zero".into()));
    }
    let x = tr.intensity();
    let m2 = x.iter().map(|v| (v / mean) * (v / mean)).sum::<f64>() / x.len() as f64;
    Ok(m2)
}

/// Normalized autocorrelation of the intensity fluctuations, `C(0) = 1`.
pub fn autocorrelation(tr: &Trace, max_lag: f64) -> Result<Acf> {
    autocorrelation_with(tr, max_lag, Estimator::Fft)
}

pub fn autocorrelation_with(tr: &Trace, max_lag: f64, estimator: Estimator) -> Result<Acf> {
    let lmax = lag_samples(tr, max_lag)?;
    let mean = tr.mean_intensity();
    let x = tr.intensity();
    let n = x.len();
    let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let sums = lagged_sums(&centred, lmax, estimator);
    let var = sums[0] / n as f64;
    if !(var > 0.0) || var <= f64::EPSILON * f64::EPSILON * mean * mean * n as f64 {
        return Err(Error::Degenerate("intensity has zero variance".into()));
    }
    let values = sums
        .iter()
        .enumerate()
        .map(|(k, s)| if k == 0 { 1.0 } else { s / (n - k) as f64 / var })
        .collect();
    Ok(Acf {
        dt: tr.dt(),
        values,
    })
}

/// Largest `|C(τ)|` within `half_window` of the external delay.
pub fn echo_height(acf: &Acf, tau_ext: f64, half_window: f64) -> Result<EchoReport> {
    if !(half_window >= 0.0) {
        return Err(Error::invalid("half_window", "must be >= 0"));
    }
    let lo = tau_ext - half_window;
    let hi = tau_ext + half_window;
    if lo < 0.0 || hi > acf.max_lag() * (1.0 + 1e-12) {
        return Err(Error::OutOfRange {
            value: hi,
            min: 0.0,
            max: acf.max_lag(),
        });
    }
    let k_lo = (lo / acf.dt).ceil() as usize;
    let k_hi = ((hi / acf.dt).floor() as usize).min(acf.values.len() - 1);
    let (k, h) = (k_lo..=k_hi)
        .map(|k| (k, acf.values[k].abs()))
        .fold((k_lo, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok(EchoReport {
        h: h.clamp(0.0, 1.0),
        tau_peak: k as f64 * acf.dt,
    })
}

fn hann(m: usize) -> Vec<f64> {
    // periodic form, so overlapping segments tile evenly
    (0..m)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / m as f64).cos())
        .collect()
}

/// Welch estimate: Hann-windowed, mean-removed segments, averaged periodograms.
pub fn power_spectrum(tr: &Trace, segment_len: usize, overlap: f64) -> Result<Spectrum> {
    if segment_len < 4 || !segment_len.is_power_of_two() {
        return Err(Error::invalid("segment_len", format!("must be a power of two >= 4, got {segment_len}")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::invalid("overlap", "must lie in [0, 1)"));
    }
    let x = tr.intensity();
    if x.len() < segment_len {
        return Err(Error::InsufficientData(format!(
            "trace has {} samples, segment needs {segment_len}",
            x.len()
        )));
    }
    let m = segment_len;
    let hop = ((m as f64 * (1.0 - overlap)).round() as usize).max(1);
    let window = hann(m);
    let w_sum: f64 = window.iter().sum();
    let w_sq: f64 = window.iter().map(|w| w * w).sum();
    let fs = 1.0 / tr.dt();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
    let mut acc = vec![0.0; m / 2 + 1];
    let mut buf = vec![Complex::new(0.0, 0.0); m];
    let mut segments = 0usize;
    let mut start = 0;
    while start + m <= x.len() {
        let seg = &x[start..start + m];
        let mean = seg.iter().sum::<f64>() / m as f64;
        for (b, (v, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let norm = 1.0 / (fs * w_sq * segments as f64);
    let df = fs / m as f64;
    let (freqs, psd) = (1..=m / 2)
        .map(|k| {
            // Nyquist bin has no mirror image
            let fold = if k == m / 2 { 1.0 } else { 2.0 };
            (k as f64 * df, fold * acc[k] * norm)
        })
        .unzip();
    Ok(Spectrum {
        freqs,
        psd,
        rbw: fs * w_sq / (w_sum * w_sum),
        df,
    })
}

/// Largest power-of-two segment whose bin spacing is no finer than `rbw`.
pub fn segment_for_rbw(dt: f64, rbw: f64) -> usize {
    let target = 1.0 / (dt * rbw);
    let mut m = 4usize;
    while (m * 2) as f64 <= target {
        m *= 2;
    }
    m
}

/// Lowest frequency at which the cumulative spectrum reaches 80% of the total.
pub fn bandwidth_80(sp: &Spectrum) -> Result<f64> {
    bandwidth_fraction(sp, 0.8)
}

pub fn bandwidth_fraction(sp: &Spectrum, fraction: f64) -> Result<f64> {
    let total: f64 = sp.psd.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("spectrum carries no power".into()));
    }
    let target = fraction * total * (1.0 - 1e-12);
    let mut cum = 0.0;
    for (f, p) in sp.freqs.iter().zip(&sp.psd) {
        cum += p;
        if cum >= target {
            return Ok(*f);
        }
    }
    Ok(*sp.freqs.last().unwrap())
}

/// Frequency of the strongest ripple in `g²(τ) − 1` over `0 < τ ≤ window`,
/// found from a zero-padded, linearly detrended transform.
pub fn g2_ripple_frequency(curve: &G2Curve, window: f64) -> Result<f64> {
    let (lags, values) = curve.one_sided();
    let pts: Vec<(f64, f64)> = lags
        .iter()
        .zip(&values)
        .filter(|(t, _)| **t > 0.0 && **t <= window)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 8 {
        return Err(Error::InsufficientData("too few lags inside the ripple window".into()));
    }
    let dt = pts[1].0 - pts[0].0;
    let n = pts.len() as f64;
    let (st, sv) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mt, mv) = (st / n, sv / n);
    let slope = pts.iter().map(|p| (p.0 - mt) * (p.1 - mv)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
    let m = (pts.len() * 16).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = pts
        .iter()
        .map(|p| Complex::new(p.1 - mv - slope * (p.0 - mt), 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
    // skip the lowest bins, which only carry the residual trend
    let min_bin = (m as f64 / pts.len() as f64 * 1.5).ceil() as usize;
    let k = (min_bin..m / 2)
        .max_by(|&a, &b| buf[a].norm_sqr().total_cmp(&buf[b].norm_sqr()))
        .ok_or_else(|| Error::InsufficientData("ripple window too short".into()))?;
    Ok(k as f64 / (m as f64 * dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn trace(v: Vec<f64>) -> Trace {
        Trace::from_intensity(1e-12, v).unwrap()
    }

    #[test]
    fn constant_trace_has_unit_g2() {
        let tr = trace(vec![3.5; 1000]);
        let g = g2_from_intensity(&tr, 100e-12, 1).unwrap();
        assert!(g.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert_eq!(g.lags.len(), 201);
        assert_eq!(g.at_zero(), g.values[100]);
    }

    #[test]
    fn raised_cosine_g2_is_three_halves() {
        let period = 64;
        let x: Vec<f64> = (0..period * 50)
            .map(|i| 1.0 + (2.0 * PI * i as f64 / period as f64).cos())
            .collect();
        let tr = trace(x);
        let g = g2_from_intensity(&tr, 10e-12, 1).unwrap();
        assert_relative_eq!(g.at_zero(), 1.5, max_relative = 1e-12);
    }

    #[test]
    fn g2_is_symmetric_and_matches_moments() {
        let x: Vec<f64> = (0..4000).map(|i| ((i * 7919) % 101) as f64 + 0.5).collect();
        let tr = trace(x);
        let g = g2_from_intensity(&tr, 300e-12, 3).unwrap();
        let n = g.values.len();
        for i in 0..n {
            assert_eq!(g.values[i], g.values[n - 1 - i]);
            assert_eq!(g.lags[i], -g.lags[n - 1 - i]);
        }
        assert_relative_eq!(g.at_zero(), g2_zero(&tr).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        let dark = trace(vec![0.0; 100]);
        assert!(matches!(g2_from_intensity(&dark, 1e-12, 1), Err(Error::Degenerate(_))));
        let flat = trace(vec![2.0; 100]);
        assert!(matches!(autocorrelation(&flat, 1e-12), Err(Error::Degenerate(_))));
        let x = trace(vec![1.0, 2.0, 3.0, 4.0]);
        assert!(g2_from_intensity(&x, 3e-12, 1).is_err());
        assert!(g2_from_intensity(&x, 1e-12, 0).is_err());
    }

    #[test]
    fn acf_normalized_and_fft_matches_direct() {
        let x: Vec<f64> = (0..3000).map(|i| ((i as f64) * 0.37).sin().abs() + 0.1 * (i % 7) as f64).collect();
        let tr = trace(x);
        let a = autocorrelation_with(&tr, 200e-12, Estimator::Fft).unwrap();
        let b = autocorrelation_with(&tr, 200e-12, Estimator::Direct).unwrap();
        assert_eq!(a.values[0], 1.0);
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - v).abs() < 1e-10, "{u} {v}");
        }
    }

    #[test]
    fn echo_of_periodic_signal_is_one() {
        let period = 50;
        let x: Vec<f64> = (0..period * 40).map(|i| ((i % period) as f64).powi(2)).collect();
        let tr = trace(x);
        let acf = autocorrelation(&tr, 60e-12).unwrap();
        let e = echo_height(&acf, 50e-12, 2e-12).unwrap();
        assert_relative_eq!(e.h, 1.0, max_relative = 1e-12);
        assert_relative_eq!(e.tau_peak, 50e-12, max_relative = 1e-12);
    }

    #[test]
    fn echo_of_zero_acf_and_range_errors() {
        let acf = Acf {
            dt: 1.0,
            values: {
                let mut v = vec![0.0; 100];
                v[0] = 1.0;
                v
            },
        };
        let e = echo_height(&acf, 50.0, 3.0).unwrap();
        assert_eq!(e.h, 0.0);
        assert!((e.tau_peak - 50.0).abs() <= 3.0);
        assert!(echo_height(&acf, 98.0, 3.0).is_err());
        assert!(echo_height(&acf, 1.0, 3.0).is_err());
    }

    #[test]
    fn sinusoid_spectrum_is_a_line() {
        let m = 1024;
        let dt = 1e-12;
        let bin = 100;
        let f0 = bin as f64 / (m as f64 * dt);
        let x: Vec<f64> = (0..m * 8)
            .map(|i| 2.0 + (2.0 * PI * f0 * i as f64 * dt).sin())
            .collect();
        let sp = power_spectrum(&Trace::from_intensity(dt, x).unwrap(), m, 0.5).unwrap();
        let (k, _) = sp
            .psd
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert_relative_eq!(sp.freqs[k], f0, max_relative = 1e-12);
        // Hann spreads a bin-centred line over three bins
        let near: f64 = sp.psd[k - 1..=k + 1].iter().sum();
        assert!(near / sp.psd.iter().sum::<f64>() > 0.95);
        assert_relative_eq!(bandwidth_80(&sp).unwrap(), f0, max_relative = 1e-12);
        assert_relative_eq!(sp.rbw, 1.5 / (m as f64 * dt), max_relative = 1e-12);
    }

    #[test]
    fn constant_trace_spectrum_is_zero() {
        let sp = power_spectrum(&trace(vec![5.0; 4096]), 256, 0.5).unwrap();
        assert!(sp.psd.iter().all(|&p| p == 0.0));
        assert!(matches!(bandwidth_80(&sp), Err(Error::Degenerate(_))));
    }

    #[test]
    fn spectrum_argument_checks() {
        let tr = trace(vec![1.0; 100]);
        assert!(matches!(power_spectrum(&tr, 128, 0.5), Err(Error::InsufficientData(_))));
        assert!(power_spectrum(&tr, 48, 0.5).is_err());
        assert!(power_spectrum(&tr, 64, 1.0).is_err());
    }

    #[test]
    fn flat_spectrum_bandwidth() {
        let df = 1e6;
        let sp = Spectrum {
            freqs: (1..=100).map(|k| k as f64 * df).collect(),
            psd: vec![2.0; 100],
            rbw: df,
            df,
        };
        assert_relative_eq!(bandwidth_80(&sp).unwrap(), 80.0 * df, max_relative = 1e-12);
    }

    #[test]
    fn rbw_segment_choice() {
        // 4 ps sampling at 3 MHz wants ~83k samples
        assert_eq!(segment_for_rbw(4e-12, 3e6), 65_536);
    }

    #[test]
    fn ripple_frequency_of_damped_cosine() {
        let dt = 4e-12;
        let f = 4.6e9;
        let n = 2000;
        let lags: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let values: Vec<f64> = lags
            .iter()
            .map(|t| 1.0 + 0.5 * (-t / 1e-9).exp() * (2.0 * PI * f * t).cos())
            .collect();
        let curve = G2Curve {
            lags,
            values,
            mean_intensity: 1.0,
        };
        let got = g2_ripple_frequency(&curve, 2e-9).unwrap();
        assert!((got - f).abs() / f < 0.05, "{got}");
    }

    #[test]
    fn coherence_time_of_exponential() {
        let acf = Acf {
            dt: 1e-12,
            values: (0..200).map(|k| (-(k as f64) / 40.0).exp()).collect(),
        };
        assert_relative_eq!(acf.coherence_time().unwrap(), 40e-12, max_relative = 0.01);
    }
}
