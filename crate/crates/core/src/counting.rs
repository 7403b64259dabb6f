//! Semiclassical photodetection of a simulated intensity record.
//!
//! Counts are doubly stochastic: conditioned on the intensity, the number of
//! detections in an interval is Poisson with mean proportional to the
//! integrated intensity. Random streams are keyed by `(seed, channel, block)`
//! so serial and parallel sampling give identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::G2Curve;
use crate::trace::Trace;

/// Samples per RNG block when generating timestamps.
const BLOCK: usize = 4096;

/// Scaling from intensity to detected photons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Attenuation {
    /// Mean number of photons reaching the detector per counting window
    /// (before quantum efficiency).
    Fixed(f64),
    /// Choose the attenuation so the mean detected count per window equals this value.
    MeanCounts(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub quantum_eff: f64,
    /// Coincidence histogram bin width (s).
    pub timing_res: f64,
    /// Counting window (s).
    pub window_t: f64,
    pub atten: Attenuation,
    /// Upper bound on the singles rate of one detector (counts/s).
    pub max_rate: f64,
    /// Non-paralyzable dead time (s); `None` disables it.
    pub dead_time: Option<f64>,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            quantum_eff: 0.25,
            timing_res: 60e-12,
            window_t: 4e-12,
            atten: Attenuation::MeanCounts(1.0),
            max_rate: f64::INFINITY,
            dead_time: None,
            seed: 0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.quantum_eff > 0.0 && self.quantum_eff <= 1.0) {
            return Err(Error::invalid("quantum_eff", "must lie in (0, 1]"));
        }
        if !(self.timing_res.is_finite() && self.timing_res > 0.0) {
            return Err(Error::invalid("timing_res", "must be > 0"));
        }
        if !(self.window_t.is_finite() && self.window_t > 0.0) {
            return Err(Error::invalid("window_t", "must be > 0"));
        }
        let a = match self.atten {
            Attenuation::Fixed(a) | Attenuation::MeanCounts(a) => a,
        };
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid("atten", "must be > 0"));
        }
        if !(self.max_rate > 0.0) {
            return Err(Error::invalid("max_rate", "must be > 0"));
        }
        if let Some(d) = self.dead_time {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::invalid("dead_time", "must be >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountSeries {
    pub window_t: f64,
    pub counts: Vec<u32>,
}

impl CountSeries {
    pub fn mean(&self) -> f64 {
        self.counts.iter().map(|&c| c as f64).sum::<f64>() / self.counts.len() as f64
    }
}

/// Empirical photon-number distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Pnd {
    /// `probs[n] = P(n)`.
    pub probs: Vec<f64>,
    pub mean: f64,
    /// `(⟨n²⟩ − ⟨n⟩) / ⟨n⟩²`.
    pub g2_zero: f64,
}

impl Pnd {
    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    /// CSV with columns `n,p_empirical,p_bose_einstein,p_poisson`.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::from(header);
        out.push_str("n,p_empirical,p_bose_einstein,p_poisson\n");
        for (n, p) in self.probs.iter().enumerate() {
            out.push_str(&format!(
                "{n},{p},{},{}\n",
                bose_einstein_pmf(self.mean, n as u64),
                poisson_pmf(self.mean, n as u64)
            ));
        }
        out
    }
}

fn ln_factorial(n: u64) -> f64 {
    // exact summation is fine for the counts seen here; Stirling beyond
    if n < 256 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        let x = n as f64 + 1.0;
        (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3))
    }
}

/// Poisson probability `⟨n⟩ⁿ e^{−⟨n⟩} / n!`, evaluated in log space.
pub fn poisson_pmf(mean: f64, n: u64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * mean.ln() - mean - ln_factorial(n)).exp()
}

/// Bose-Einstein (geometric) probability `⟨n⟩ⁿ / (1+⟨n⟩)^{n+1}`.
pub fn bose_einstein_pmf(mean: f64, n: u64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * (mean / (1.0 + mean)).ln() - (1.0 + mean).ln()).exp()
}

pub(crate) fn keyed_rng(seed: u64, channel: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((channel << 48) ^ block);
    rng
}

#[inline]
fn draw_poisson<R: Rng>(rng: &mut R, mean: f64) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u32).unwrap_or(0)
}

/// Integrated intensity of each complete counting window.
fn window_integrals(tr: &Trace, window_t: f64) -> Result<(usize, Vec<f64>)> {
    let w = (window_t / tr.dt()).round() as usize;
    if w == 0 {
        return Err(Error::invalid(
            "window_t",
            format!("shorter than the trace sample interval {:e} s", tr.dt()),
        ));
    }
    let sums: Vec<f64> = tr
        .intensity()
        .chunks_exact(w)
        .map(|c| c.iter().sum::<f64>() * tr.dt())
        .collect();
    if sums.is_empty() {
        return Err(Error::InsufficientData("trace shorter than one counting window".into()));
    }
    Ok((w, sums))
}

/// Draws photon counts in consecutive windows of the trace.
pub fn sample_counts(tr: &Trace, det: &DetectorConfig) -> Result<CountSeries> {
    det.validate()?;
    let (w, integrals) = window_integrals(tr, det.window_t)?;
    let mean_w = integrals.iter().sum::<f64>() / integrals.len() as f64;
    if !(mean_w > 0.0) {
        return Err(Error::Degenerate("trace carries no intensity".into()));
    }
    let per_window = match det.atten {
        Attenuation::Fixed(a) => a * det.quantum_eff,
        Attenuation::MeanCounts(m) => m,
    };
    let rate = per_window / (w as f64 * tr.dt());
    if rate > det.max_rate {
        return Err(Error::invalid(
            "atten",
            format!("count rate {rate:e}/s exceeds max_rate {:e}/s", det.max_rate),
        ));
    }
    let scale = per_window / mean_w;
    let dead = det.dead_time.filter(|d| *d > 0.0);
    let intensity = tr.intensity();
    let counts = integrals
        .par_iter()
        .enumerate()
        .map(|(k, &wk)| {
            let mut rng = keyed_rng(det.seed, 0, k as u64);
            let n = draw_poisson(&mut rng, scale * wk);
            match dead {
                Some(d) if n > 1 => {
                    let slice = &intensity[k * w..(k + 1) * w];
                    let mut times = arrival_times(&mut rng, slice, tr.dt(), n);
                    times.sort_by(f64::total_cmp);
                    apply_dead_time(&times, d).len() as u32
                }
                _ => n,
            }
        })
        .collect();
    Ok(CountSeries {
        window_t: w as f64 * tr.dt(),
        counts,
    })
}

/// Places `n` arrivals inside a window with density proportional to the intensity.
fn arrival_times<R: Rng>(rng: &mut R, slice: &[f64], dt: f64, n: u32) -> Vec<f64> {
    let total: f64 = slice.iter().sum();
    (0..n)
        .map(|_| {
            let mut u = rng.gen::<f64>() * total;
            for (i, v) in slice.iter().enumerate() {
                if u < *v || i == slice.len() - 1 {
                    return (i as f64 + rng.gen::<f64>()) * dt;
                }
                u -= v;
            }
            unreachable!()
        })
        .collect()
}

/// Keeps arrivals separated by at least `dead` from the previous kept one.
fn apply_dead_time(sorted: &[f64], dead: f64) -> Vec<f64> {
    let mut kept: Vec<f64> = Vec::with_capacity(sorted.len());
    for &t in sorted {
        if kept.last().map_or(true, |&last| t - last >= dead) {
            kept.push(t);
        }
    }
    kept
}

/// Normalized histogram of counts with its mean and factorial-moment `g²(0)`.
pub fn pnd_from_counts(cs: &CountSeries) -> Result<Pnd> {
    if cs.counts.is_empty() {
        return Err(Error::InsufficientData("empty count series".into()));
    }
    let max = *cs.counts.iter().max().unwrap() as usize;
    if max == 0 {
        return Err(Error::Degenerate("all windows are empty".into()));
    }
    let mut tally = vec![0u64; max + 1];
    for &c in &cs.counts {
        tally[c as usize] += 1;
    }
    let total = cs.counts.len() as f64;
    let probs: Vec<f64> = tally.iter().map(|&t| t as f64 / total).collect();
    let (s1, s2) = cs
        .counts
        .iter()
        .fold((0.0, 0.0), |(a, b), &c| (a + c as f64, b + (c as f64) * (c as f64)));
    let mean = s1 / total;
    let m2 = s2 / total;
    Ok(Pnd {
        probs,
        mean,
        g2_zero: (m2 - mean) / (mean * mean),
    })
}

/// Total-variation distance `½ Σ|P(n) − Q(n)|`, with the reference mass beyond
/// the empirical support lumped into one tail term.
pub fn distribution_distance(p: &Pnd, q: impl Fn(u64) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut q_mass = 0.0;
    for (n, &pn) in p.probs.iter().enumerate() {
        let qn = q(n as u64);
        q_mass += qn;
        sum += (pn - qn).abs();
    }
    let p_mass: f64 = p.probs.iter().sum();
    let tail = ((1.0 - q_mass) - (1.0 - p_mass)).abs();
    0.5 * (sum + tail)
}

/// Detection times (s) of one detector.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestampStream {
    pub channel: u8,
    pub times: Vec<f64>,
}

/// Two detectors behind a 50:50 splitter, each seeing half the intensity.
///
/// `det.atten` sets the mean detected count per trace sample and channel
/// (a `Fixed` value is multiplied by the quantum efficiency first).
pub fn hbt_timestamps(tr: &Trace, det: &DetectorConfig) -> Result<[TimestampStream; 2]> {
    det.validate()?;
    let mean = tr.mean_intensity();
    if !(mean > 0.0) {
        return Err(Error::Degenerate("trace carries no intensity".into()));
    }
    let per_sample = match det.atten {
        Attenuation::Fixed(a) => a * det.quantum_eff,
        Attenuation::MeanCounts(m) => m,
    };
    let rate = per_sample / tr.dt();
    if rate > det.max_rate {
        return Err(Error::invalid(
            "atten",
            format!("count rate {rate:e}/s exceeds max_rate {:e}/s", det.max_rate),
        ));
    }
    let scale = per_sample / mean;
    let dt = tr.dt();
    let intensity = tr.intensity();
    let stream = |channel: u8| -> TimestampStream {
        let blocks: Vec<Vec<f64>> = intensity
            .par_chunks(BLOCK)
            .enumerate()
            .map(|(b, chunk)| {
                let mut rng = keyed_rng(det.seed, channel as u64 + 1, b as u64);
                let mut out = Vec::new();
                for (i, &v) in chunk.iter().enumerate() {
                    let n = draw_poisson(&mut rng, scale * v);
                    let t0 = (b * BLOCK + i) as f64 * dt;
                    let start = out.len();
                    for _ in 0..n {
                        out.push(t0 + rng.gen::<f64>() * dt);
                    }
                    out[start..].sort_by(f64::total_cmp);
                }
                out
            })
            .collect();
        let mut times: Vec<f64> = blocks.into_iter().flatten().collect();
        if let Some(d) = det.dead_time.filter(|d| *d > 0.0) {
            times = apply_dead_time(&times, d);
        }
        TimestampStream { channel, times }
    };
    Ok([stream(0), stream(1)])
}

/// Coincidence histogram `g²(τ)` from two timestamp streams.
///
/// Bins of width `bin` are centred on multiples of `bin`; counts are divided by
/// the uncorrelated baseline `N₁·N₂·bin / T`.
pub fn coincidence_g2(
    a: &TimestampStream,
    b: &TimestampStream,
    duration: f64,
    bin: f64,
    max_lag: f64,
) -> Result<(G2Curve, Vec<u64>)> {
    if a.times.is_empty() || b.times.is_empty() {
        return Err(Error::InsufficientData("a timestamp stream is empty".into()));
    }
    let half = (max_lag / bin).round() as i64;
    let nbins = (2 * half + 1) as usize;
    let mut hist = vec![0u64; nbins];
    let reach = (half as f64 + 0.5) * bin;
    let mut lo = 0usize;
    for &t1 in &a.times {
        while lo < b.times.len() && b.times[lo] < t1 - reach {
            lo += 1;
        }
        let mut j = lo;
        while j < b.times.len() && b.times[j] < t1 + reach {
            let k = ((b.times[j] - t1) / bin).round() as i64 + half;
            if (0..nbins as i64).contains(&k) {
                hist[k as usize] += 1;
            }
            j += 1;
        }
    }
    let baseline = a.times.len() as f64 * b.times.len() as f64 * bin / duration;
    let lags = (0..nbins).map(|k| (k as i64 - half) as f64 * bin).collect();
    let values = hist.iter().map(|&c| c as f64 / baseline).collect();
    let rate = a.times.len() as f64 / duration;
    Ok((
        G2Curve {
            lags,
            values,
            mean_intensity: rate,
        },
        hist,
    ))
}

/// Simulated HBT measurement: timestamps from both detectors, then the
/// coincidence histogram with bins of `det.timing_res`.
pub fn hbt_coincidence_g2(tr: &Trace, det: &DetectorConfig, max_lag: f64) -> Result<G2Curve> {
    let [a, b] = hbt_timestamps(tr, det)?;
    Ok(coincidence_g2(&a, &b, tr.duration(), det.timing_res, max_lag)?.0)
}

/// CSV rows `channel,time_ps` for both streams, merged in time order.
pub fn timestamps_csv(streams: &[TimestampStream], header: &str) -> String {
    let mut rows: Vec<(i64, u8)> = streams
        .iter()
        .flat_map(|s| s.times.iter().map(move |t| ((t * 1e12).round() as i64, s.channel)))
        .collect();
    rows.sort();
    let mut out = String::from(header);
    out.push_str("channel,time_ps\n");
    for (t, c) in rows {
        out.push_str(&format!("{c},{t}\n"));
    }
    out
}
