//! Parameter sweeps and figure datasets.
//!
//! Work units (grid point × ensemble member) run on a bounded rayon pool.
//! Every random draw is keyed by the base seed and the unit's indices, so the
//! output does not depend on the number of workers or their scheduling.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use crate::config::FeedbackLevel;
use crate::counting::{
    bose_einstein_pmf, distribution_distance, hbt_coincidence_g2, keyed_rng, pnd_from_counts,
    poisson_pmf, sample_counts, Attenuation, DetectorConfig, Pnd,
};
use crate::error::{Error, Result};
use crate::integrator::{integrate, LaserState, SimConfig};
use crate::metrics::{
    autocorrelation, bandwidth_80, echo_height, g2_from_intensity, g2_zero, power_spectrum,
    segment_for_rbw, ECHO_HALF_WINDOW,
};
use crate::params::{DriveConfig, EtaKappaCalibration, FeedbackConfig, LaserParams};
use crate::trace::{comment_header, Trace};

/// RNG channel for ensemble initial states; counting uses 0 and 1.
const CHANNEL_INITIAL: u64 = 7;

/// Which statistics a sweep computes at each point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricSet {
    pub g2_0: bool,
    pub echo: bool,
    pub bandwidth: bool,
    pub pnd: bool,
}

impl Default for MetricSet {
    fn default() -> Self {
        Self {
            g2_0: true,
            echo: false,
            bandwidth: false,
            pnd: false,
        }
    }
}

impl MetricSet {
    pub const NONE: MetricSet = MetricSet {
        g2_0: false,
        echo: false,
        bandwidth: false,
        pnd: false,
    };

    /// Comma-separated subset of `g2_0,h,bandwidth,pnd`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut m = Self::NONE;
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "g2_0" | "g2" => m.g2_0 = true,
                "h" | "echo" => m.echo = true,
                "bandwidth" | "bw" => m.bandwidth = true,
                "pnd" => m.pnd = true,
                other => return Err(Error::config("metrics", format!("unknown metric `{other}`"))),
            }
        }
        if m == Self::NONE {
            return Err(Error::config("metrics", "no metric requested"));
        }
        Ok(m)
    }

    pub fn names(&self) -> String {
        let mut v = Vec::new();
        if self.g2_0 {
            v.push("g2_0");
        }
        if self.echo {
            v.push("h");
        }
        if self.bandwidth {
            v.push("bandwidth");
        }
        if self.pnd {
            v.push("pnd");
        }
        v.join(",")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub params: LaserParams,
    pub calibration: EtaKappaCalibration,
    pub rhos: Vec<f64>,
    pub levels: Vec<FeedbackLevel>,
    pub phases: Vec<f64>,
    pub tau_ext: f64,
    pub sim: SimConfig,
    pub metrics: MetricSet,
    /// Used when `metrics.pnd` is set; its seed is replaced per point.
    pub detector: DetectorConfig,
    /// Independent initial conditions per grid point.
    pub ensemble_size: usize,
    /// Base seed; unit seeds are derived from it and the unit's indices.
    pub seed: u64,
    /// Worker count; 0 uses every available core.
    pub jobs: usize,
    pub echo_half_window: f64,
    /// Resolution bandwidth of the spectrum behind the bandwidth metric (Hz).
    pub rbw: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            params: LaserParams::default(),
            calibration: EtaKappaCalibration::default(),
            rhos: vec![1.5],
            levels: vec![FeedbackLevel::Kappa(50e9)],
            phases: vec![0.0],
            tau_ext: FeedbackConfig::default().tau_ext,
            sim: SimConfig::default(),
            metrics: MetricSet::default(),
            detector: DetectorConfig::default(),
            ensemble_size: 1,
            seed: 0,
            jobs: 0,
            echo_half_window: ECHO_HALF_WINDOW,
            rbw: 3e6,
        }
    }
}

/// One resolved grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub rho: f64,
    pub kappa: f64,
    /// Set when the point was specified by power fraction.
    pub eta: Option<f64>,
    pub phase_c: f64,
}

impl SweepSpec {
    /// Grid points in rho-major, then feedback, then phase order.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        if self.rhos.is_empty() || self.levels.is_empty() || self.phases.is_empty() {
            return Err(Error::invalid("grid", "every axis needs at least one value"));
        }
        if self.ensemble_size == 0 {
            return Err(Error::invalid("ensemble_size", "must be >= 1"));
        }
        self.params.validate()?;
        self.detector.validate()?;
        let mut out = Vec::new();
        for &rho in &self.rhos {
            DriveConfig::new(rho)?;
            for level in &self.levels {
                let kappa = level.kappa(&self.calibration)?;
                for &phase in &self.phases {
                    let f = FeedbackConfig::new(kappa, self.tau_ext, phase)?;
                    self.sim.delay_steps(&f)?;
                    out.push(GridPoint {
                        index: out.len(),
                        rho,
                        kappa,
                        eta: level.eta(),
                        phase_c: f.phase_c,
                    });
                }
            }
        }
        Ok(out)
    }

    /// `key=value` description of everything that determines the output.
    pub fn entries(&self) -> Vec<(String, String)> {
        let list = |v: &[f64], scale: f64| {
            v.iter().map(|x| format!("{}", x * scale)).collect::<Vec<_>>().join(" ")
        };
        let levels = self
            .levels
            .iter()
            .map(|l| match l {
                FeedbackLevel::Kappa(k) => format!("{}ns-1", k * 1e-9),
                FeedbackLevel::Eta(e) => format!("{}%", e * 100.0),
            })
            .collect::<Vec<_>>()
            .join(" ");
        let p = &self.params;
        let s = &self.sim;
        let mut e: Vec<(String, String)> = vec![
            ("alpha", format!("{}", p.alpha)),
            ("tau_p_s", format!("{:e}", p.tau_p)),
            ("tau_n_s", format!("{:e}", p.tau_n)),
            ("g_n_per_s", format!("{:e}", p.g_n)),
            ("n0", format!("{:e}", p.n0)),
            ("epsilon", format!("{:e}", p.epsilon)),
            ("lambda_m", format!("{:e}", p.lambda)),
            ("tau_ext_s", format!("{:e}", self.tau_ext)),
            ("rho", list(&self.rhos, 1.0)),
            ("feedback", levels),
            ("phase_c_rad", list(&self.phases, 1.0)),
            ("step_h_s", format!("{:e}", s.step_h)),
            ("t_transient_s", format!("{:e}", s.t_transient)),
            ("t_record_s", format!("{:e}", s.t_record)),
            ("record_stride", s.record_stride.to_string()),
            ("history", s.history_init.as_str().to_string()),
            ("floor_policy", s.floor_policy.as_str().to_string()),
            ("metrics", self.metrics.names()),
            ("ensemble_size", self.ensemble_size.to_string()),
            ("seed", self.seed.to_string()),
            ("echo_half_window_s", format!("{:e}", self.echo_half_window)),
            ("rbw_hz", format!("{:e}", self.rbw)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        if self.metrics.pnd {
            let d = &self.detector;
            e.push(("quantum_eff".into(), format!("{}", d.quantum_eff)));
            e.push(("window_t_s".into(), format!("{:e}", d.window_t)));
            e.push(("atten".into(), format!("{:?}", d.atten)));
        }
        e
    }
}

/// Ensemble mean with optional spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; `None` for a single member.
    pub spread: Option<f64>,
}

impl Stat {
    fn of(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let spread = (v.len() > 1)
            .then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Self { mean, spread }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PndSummary {
    pub mean: f64,
    pub g2_0: f64,
    pub tv_bose_einstein: f64,
    pub tv_poisson: f64,
}

impl PndSummary {
    pub fn of(p: &Pnd) -> Self {
        Self {
            mean: p.mean,
            g2_0: p.g2_zero,
            tv_bose_einstein: distribution_distance(p, |n| bose_einstein_pmf(p.mean, n)),
            tv_poisson: distribution_distance(p, |n| poisson_pmf(p.mean, n)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub point: GridPoint,
    pub g2_0: Option<Stat>,
    pub h: Option<Stat>,
    pub tau_peak: Option<f64>,
    pub bandwidth: Option<Stat>,
    /// Counting statistics of the first ensemble member.
    pub pnd: Option<PndSummary>,
    /// Largest floor-hit fraction over the ensemble.
    pub floor_fraction: f64,
    pub runtime: Duration,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub version: &'static str,
    pub config: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub records: Vec<PointRecord>,
    pub provenance: Provenance,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }

    /// One row per grid point; empty cells for metrics that were not requested.
    pub fn to_csv(&self) -> String {
        let mut header = vec![("version".to_string(), self.provenance.version.to_string())];
        header.extend(self.provenance.config.iter().cloned());
        let mut out = comment_header(&header);
        out.push_str(
            "index,rho,kappa_per_ns,eta_percent,phase_c_rad,g2_0,g2_0_spread,h,h_spread,\
             tau_peak_ns,bandwidth_ghz,bandwidth_spread_ghz,pnd_mean,pnd_g2_0,tv_bose_einstein,\
             tv_poisson,floor_fraction,error\n",
        );
        for r in &self.records {
            let p = &r.point;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                p.index,
                p.rho,
                p.kappa * 1e-9,
                opt(p.eta.map(|e| e * 100.0)),
                p.phase_c,
                opt(r.g2_0.map(|s| s.mean)),
                opt(r.g2_0.and_then(|s| s.spread)),
                opt(r.h.map(|s| s.mean)),
                opt(r.h.and_then(|s| s.spread)),
                opt(r.tau_peak.map(|t| t * 1e9)),
                opt(r.bandwidth.map(|s| s.mean * 1e-9)),
                opt(r.bandwidth.and_then(|s| s.spread).map(|s| s * 1e-9)),
                opt(r.pnd.map(|s| s.mean)),
                opt(r.pnd.map(|s| s.g2_0)),
                opt(r.pnd.map(|s| s.tv_bose_einstein)),
                opt(r.pnd.map(|s| s.tv_poisson)),
                r.floor_fraction,
                r.error.as_deref().unwrap_or("").replace(',', ";"),
            );
        }
        out
    }

    /// Wall-clock time per point, kept apart from the deterministic table.
    pub fn timing_csv(&self) -> String {
        let mut out = String::from("index,runtime_s\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{:.3}", r.point.index, r.runtime.as_secs_f64());
        }
        out
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// SplitMix64 finalizer, used to spread (seed, index) pairs over the seed space.
fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Starting state of ensemble member `member`; member 0 keeps the configured one.
pub fn ensemble_initial(p: &LaserParams, base: Option<LaserState>, seed: u64, point: usize, member: usize) -> Option<LaserState> {
    if member == 0 {
        return base;
    }
    let mut rng = keyed_rng(mix(seed, point as u64, member as u64), CHANNEL_INITIAL, 0);
    let s = base.unwrap_or_else(|| LaserState::initial(p));
    Some(LaserState {
        e_amp: s.e_amp * rng.gen_range(0.5..2.0),
        phi: rng.gen_range(0.0..TAU),
        n_car: s.n_car * rng.gen_range(0.98..1.02),
    })
}

#[derive(Debug, Clone, Default)]
struct MemberOutcome {
    g2_0: Option<f64>,
    h: Option<(f64, f64)>,
    bandwidth: Option<f64>,
    pnd: Option<PndSummary>,
    floor_fraction: f64,
}

fn run_member(spec: &SweepSpec, pt: &GridPoint, member: usize) -> Result<MemberOutcome> {
    let f = FeedbackConfig::new(pt.kappa, spec.tau_ext, pt.phase_c)?;
    let d = DriveConfig::new(pt.rho)?;
    let unit_seed = mix(spec.seed, pt.index as u64, member as u64);
    let cfg = SimConfig {
        initial: ensemble_initial(&spec.params, spec.sim.initial, spec.seed, pt.index, member),
        seed: unit_seed,
        ..spec.sim.clone()
    };
    let tr = integrate(&spec.params, &f, &d, &cfg)?;
    point_metrics(spec, &tr, unit_seed, member)
}

fn point_metrics(spec: &SweepSpec, tr: &Trace, seed: u64, member: usize) -> Result<MemberOutcome> {
    let m = spec.metrics;
    let mut out = MemberOutcome {
        floor_fraction: tr.meta.diagnostics.floor_fraction(),
        ..Default::default()
    };
    if m.g2_0 {
        out.g2_0 = Some(g2_zero(tr)?);
    }
    if m.echo {
        let acf = autocorrelation(tr, spec.tau_ext + spec.echo_half_window + 2.0 * tr.dt())?;
        let e = echo_height(&acf, spec.tau_ext, spec.echo_half_window)?;
        out.h = Some((e.h, e.tau_peak));
    }
    if m.bandwidth {
        let seg = segment_for_rbw(tr.dt(), spec.rbw).min(tr.len().next_power_of_two() / 2).max(4);
        out.bandwidth = Some(bandwidth_80(&power_spectrum(tr, seg, 0.5)?)?);
    }
    if m.pnd && member == 0 {
        let det = DetectorConfig {
            seed,
            ..spec.detector.clone()
        };
        out.pnd = Some(PndSummary::of(&pnd_from_counts(&sample_counts(tr, &det)?)?));
    }
    Ok(out)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid("jobs", e.to_string()))
}

/// Integrates and measures every grid point; failed points are recorded, not fatal.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let points = spec.points()?;
    let units: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|i| (0..spec.ensemble_size).map(move |m| (i, m)))
        .collect();
    let outcomes: Vec<(Result<MemberOutcome>, Duration)> = pool(spec.jobs)?.install(|| {
        units
            .par_iter()
            .map(|&(i, m)| {
                let t0 = Instant::now();
                let r = run_member(spec, &points[i], m);
                (r, t0.elapsed())
            })
            .collect()
    });
    let records = points
        .iter()
        .zip(outcomes.chunks(spec.ensemble_size))
        .map(|(pt, members)| aggregate(*pt, members))
        .collect();
    Ok(SweepResult {
        records,
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION"),
            config: spec.entries(),
        },
    })
}

fn aggregate(point: GridPoint, members: &[(Result<MemberOutcome>, Duration)]) -> PointRecord {
    let runtime = members.iter().map(|(_, t)| *t).sum();
    let mut rec = PointRecord {
        point,
        g2_0: None,
        h: None,
        tau_peak: None,
        bandwidth: None,
        pnd: None,
        floor_fraction: 0.0,
        runtime,
        error: None,
    };
    let mut ok = Vec::with_capacity(members.len());
    for (r, _) in members {
        match r {
            Ok(o) => ok.push(o),
            Err(e) => {
                rec.error = Some(e.to_string());
                return rec;
            }
        }
    }
    let collect = |f: &dyn Fn(&MemberOutcome) -> Option<f64>| -> Option<Stat> {
        let v: Option<Vec<f64>> = ok.iter().map(|o| f(o)).collect();
        v.map(|v| Stat::of(&v))
    };
    rec.g2_0 = collect(&|o| o.g2_0);
    rec.h = collect(&|o| o.h.map(|h| h.0));
    rec.tau_peak = collect(&|o| o.h.map(|h| h.1)).map(|s| s.mean);
    rec.bandwidth = collect(&|o| o.bandwidth);
    rec.pnd = ok[0].pnd;
    rec.floor_fraction = ok.iter().map(|o| o.floor_fraction).fold(0.0, f64::max);
    rec
}

/// Figure datasets that can be regenerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Traces, photon-number distributions and g²(τ) at three strong feedback rates.
    Fig2,
    /// Photon-number distributions while the mean count is raised.
    Fig4,
    /// g²(0) over pump level and feedback.
    Fig5,
    /// Echo height over feedback at three pump levels.
    Fig7,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig2, Figure::Fig4, Figure::Fig5, Figure::Fig7];

    pub fn tag(&self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig7 => "fig7",
        }
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| Error::config("figure", format!("unknown tag `{s}` (expected fig2, fig4, fig5 or fig7)")))
    }
}

/// Pump levels of the g²(0) grid.
pub const FIG5_RHOS: [f64; 5] = [1.07, 1.12, 1.2, 1.5, 2.0];
/// Feedback rates (1/s) with a measured power fraction.
pub const FIG5_KAPPAS: [f64; 4] = [5.5e9, 7e9, 11e9, 20e9];
/// Extra feedback rates added by the dense grid.
pub const FIG5_DENSE_KAPPAS: [f64; 6] = [9e9, 15.5e9, 27.5e9, 35e9, 50e9, 65e9];
pub const FIG2_KAPPAS: [f64; 3] = [35e9, 50e9, 65e9];
pub const FIG2_RHO: f64 = 1.5;
pub const FIG4_RHO: f64 = 1.5;
pub const FIG4_ETA: f64 = 0.128;
pub const FIG4_MEANS: [f64; 3] = [0.69, 1.8, 2.61];
pub const FIG7_RHOS: [f64; 3] = [1.07, 1.2, 1.5];
pub const FIG7_KAPPAS: [f64; 8] = [5.5e9, 7e9, 9e9, 11e9, 13e9, 15.5e9, 18e9, 20e9];

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOptions {
    pub params: LaserParams,
    pub sim: SimConfig,
    pub detector: DetectorConfig,
    pub seed: u64,
    pub jobs: usize,
    pub ensemble_size: usize,
    /// Adds feedback rates beyond the calibrated four to the g²(0) grid.
    pub dense: bool,
    /// Counting window for the mean-count sweep; `None` uses the simulated coherence time.
    pub fig4_window: Option<f64>,
    /// Length of the trace excerpt written for the time-series panel (s).
    pub excerpt: f64,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            params: LaserParams::default(),
            sim: SimConfig::default(),
            detector: DetectorConfig::default(),
            seed: 0,
            jobs: 0,
            ensemble_size: 1,
            dense: false,
            fig4_window: None,
            excerpt: 50e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureReport {
    pub figure: Figure,
    pub files: Vec<PathBuf>,
    pub points: usize,
    pub failed: usize,
    /// One line of key metrics.
    pub summary: String,
}

struct Dataset {
    files: Vec<(String, String)>,
    manifest: Vec<(String, String)>,
    points: usize,
    failed: usize,
    summary: String,
}

/// Writes the CSV files and `manifest.txt` for one figure into `out_dir`.
pub fn reproduce_figure(fig: Figure, out_dir: &Path, opts: &FigureOptions) -> Result<FigureReport> {
    let ds = match fig {
        Figure::Fig2 => fig2(opts)?,
        Figure::Fig4 => fig4(opts)?,
        Figure::Fig5 => fig5(opts)?,
        Figure::Fig7 => fig7(opts)?,
    };
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    for (name, body) in &ds.files {
        let path = out_dir.join(name);
        std::fs::write(&path, body)?;
        files.push(path);
    }
    let mut manifest = vec![
        ("figure".to_string(), fig.tag().to_string()),
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("seed".to_string(), opts.seed.to_string()),
        ("points".to_string(), ds.points.to_string()),
        ("failed".to_string(), ds.failed.to_string()),
    ];
    manifest.extend(ds.manifest);
    manifest.push((
        "files".to_string(),
        ds.files.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(" "),
    ));
    let path = out_dir.join("manifest.txt");
    let body: String = manifest.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    std::fs::write(&path, body)?;
    files.push(path);
    Ok(FigureReport {
        figure: fig,
        files,
        points: ds.points,
        failed: ds.failed,
        summary: ds.summary,
    })
}

fn base_spec(opts: &FigureOptions) -> SweepSpec {
    SweepSpec {
        params: opts.params,
        sim: opts.sim.clone(),
        detector: opts.detector.clone(),
        seed: opts.seed,
        jobs: opts.jobs,
        ensemble_size: opts.ensemble_size,
        ..SweepSpec::default()
    }
}

fn sim_entries(opts: &FigureOptions) -> Vec<(String, String)> {
    base_spec(opts)
        .entries()
        .into_iter()
        .filter(|(k, _)| !matches!(k.as_str(), "rho" | "feedback" | "metrics" | "seed"))
        .collect()
}

fn run_traces(
    opts: &FigureOptions,
    pts: &[(f64, f64)],
    job: impl Fn(usize, &Trace) -> Result<Vec<(String, String)>> + Sync,
) -> Result<Vec<Result<Vec<(String, String)>>>> {
    pool(opts.jobs)?.install(|| {
        Ok(pts
            .par_iter()
            .enumerate()
            .map(|(i, &(rho, kappa))| {
                let f = FeedbackConfig::new(kappa, FeedbackConfig::default().tau_ext, 0.0)?;
                let cfg = SimConfig {
                    seed: mix(opts.seed, i as u64, 0),
                    ..opts.sim.clone()
                };
                let tr = integrate(&opts.params, &f, &DriveConfig::new(rho)?, &cfg)?;
                job(i, &tr)
            })
            .collect())
    })
}

fn fig2(opts: &FigureOptions) -> Result<Dataset> {
    let pts: Vec<(f64, f64)> = FIG2_KAPPAS.iter().map(|&k| (FIG2_RHO, k)).collect();
    let results = run_traces(opts, &pts, |i, tr| {
        let tag = format!("k{}", FIG2_KAPPAS[i] * 1e-9);
        let header = comment_header(&tr.meta.entries());
        let mut files = Vec::new();
        let n = ((opts.excerpt / tr.dt()).round() as usize).clamp(1, tr.len());
        let mut excerpt = header.clone();
        excerpt.push_str("t_ns,intensity\n");
        for (k, v) in tr.intensity()[..n].iter().enumerate() {
            let _ = writeln!(excerpt, "{},{}", k as f64 * tr.dt() * 1e9, v);
        }
        files.push((format!("trace_{tag}.csv"), excerpt));
        let g = g2_from_intensity(tr, 5e-9, 1)?;
        files.push((format!("g2_{tag}.csv"), g.to_csv(&header)));
        let det = DetectorConfig {
            seed: mix(opts.seed, i as u64, 1),
            ..opts.detector.clone()
        };
        let pnd = pnd_from_counts(&sample_counts(tr, &det)?)?;
        let s = PndSummary::of(&pnd);
        files.push((format!("pnd_{tag}.csv"), pnd.to_csv(&header)));
        let row = format!(
            "{},{},{},{},{},{},{}\n",
            FIG2_KAPPAS[i] * 1e-9,
            g.at_zero(),
            tr.normalized_std(),
            s.mean,
            s.g2_0,
            s.tv_bose_einstein,
            s.tv_poisson
        );
        files.push(("row".into(), row));
        Ok(files)
    })?;
    let mut summary_csv =
        String::from("kappa_per_ns,g2_0,sigma_over_mean,count_mean,count_g2_0,tv_bose_einstein,tv_poisson\n");
    let mut files = Vec::new();
    let mut failed = 0;
    let mut summary = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(fs) => {
                for (name, body) in fs {
                    if name == "row" {
                        let g2 = body.split(',').nth(1).unwrap_or("").to_string();
                        summary.push(format!("g2(0)[k{}]={:.3}", FIG2_KAPPAS[i] * 1e-9, g2.parse::<f64>().unwrap_or(f64::NAN)));
                        summary_csv.push_str(&body);
                    } else {
                        files.push((name, body));
                    }
                }
            }
            Err(e) => {
                failed += 1;
                let _ = writeln!(summary_csv, "{},,,,,,", FIG2_KAPPAS[i] * 1e-9);
                summary.push(format!("k{}: {e}", FIG2_KAPPAS[i] * 1e-9));
            }
        }
    }
    files.insert(0, ("fig2.csv".into(), summary_csv));
    let mut manifest = sim_entries(opts);
    manifest.push(("rho".into(), FIG2_RHO.to_string()));
    manifest.push(("kappa_per_ns".into(), "35 50 65".into()));
    manifest.push(("window_t_s".into(), format!("{:e}", opts.detector.window_t)));
    manifest.push(("atten".into(), format!("{:?}", opts.detector.atten)));
    Ok(Dataset {
        files,
        manifest,
        points: pts.len(),
        failed,
        summary: summary.join(" "),
    })
}

fn fig4(opts: &FigureOptions) -> Result<Dataset> {
    let kappa = EtaKappaCalibration::default().eta_to_kappa(FIG4_ETA)?;
    let f = FeedbackConfig::new(kappa, FeedbackConfig::default().tau_ext, 0.0)?;
    let cfg = SimConfig {
        seed: mix(opts.seed, 0, 0),
        ..opts.sim.clone()
    };
    let tr = integrate(&opts.params, &f, &DriveConfig::new(FIG4_RHO)?, &cfg)?;
    let header = comment_header(&tr.meta.entries());
    let acf = autocorrelation(&tr, 2e-9)?;
    let coherence = acf
        .coherence_time()
        .ok_or_else(|| Error::Degenerate("correlation never falls below 1/e within 2 ns".into()))?;
    let window = opts
        .fig4_window
        .unwrap_or_else(|| (coherence / tr.dt()).round().max(1.0) * tr.dt());
    let mut csv = String::from(&header);
    let _ = writeln!(csv, "# window_t_s={window:e}");
    csv.push_str("mean_requested,mean_empirical,g2_0,tv_bose_einstein,tv_poisson\n");
    let mut files = Vec::new();
    let mut summary = Vec::new();
    for (i, &mean) in FIG4_MEANS.iter().enumerate() {
        let det = DetectorConfig {
            window_t: window,
            atten: Attenuation::MeanCounts(mean),
            seed: mix(opts.seed, i as u64, 1),
            ..opts.detector.clone()
        };
        let pnd = pnd_from_counts(&sample_counts(&tr, &det)?)?;
        let s = PndSummary::of(&pnd);
        let _ = writeln!(csv, "{mean},{},{},{},{}", s.mean, s.g2_0, s.tv_bose_einstein, s.tv_poisson);
        files.push((format!("pnd_n{mean}.csv"), pnd.to_csv(&header)));
        summary.push(format!("g2(0)[n={mean}]={:.3}", s.g2_0));
    }
    let hbt_det = DetectorConfig {
        seed: mix(opts.seed, 9, 1),
        atten: Attenuation::MeanCounts(0.01),
        ..opts.detector.clone()
    };
    let hbt = hbt_coincidence_g2(&tr, &hbt_det, 2e-9)?;
    files.insert(0, ("fig4.csv".into(), csv));
    files.push(("hbt_g2.csv".into(), hbt.to_csv(&header)));
    files.push((
        "g2_intensity.csv".into(),
        g2_from_intensity(&tr, 2e-9, 1)?.to_csv(&header),
    ));
    let mut manifest = sim_entries(opts);
    manifest.push(("rho".into(), FIG4_RHO.to_string()));
    manifest.push(("eta_percent".into(), (FIG4_ETA * 100.0).to_string()));
    manifest.push(("kappa_per_ns".into(), (kappa * 1e-9).to_string()));
    manifest.push(("coherence_time_s".into(), format!("{coherence:e}")));
    manifest.push(("window_t_s".into(), format!("{window:e}")));
    manifest.push(("intensity_g2_0".into(), g2_zero(&tr)?.to_string()));
    Ok(Dataset {
        files,
        manifest,
        points: FIG4_MEANS.len(),
        failed: 0,
        summary: summary.join(" "),
    })
}

fn fig5(opts: &FigureOptions) -> Result<Dataset> {
    let mut kappas = FIG5_KAPPAS.to_vec();
    if opts.dense {
        kappas.extend(FIG5_DENSE_KAPPAS);
        kappas.sort_by(f64::total_cmp);
    }
    let spec = SweepSpec {
        rhos: FIG5_RHOS.to_vec(),
        levels: kappas.iter().map(|&k| FeedbackLevel::Kappa(k)).collect(),
        metrics: MetricSet::default(),
        ..base_spec(opts)
    };
    let res = run_sweep(&spec)?;
    let cal = EtaKappaCalibration::default();
    let mut csv = comment_header(&res.provenance.config);
    csv.push_str("rho,kappa_per_ns,eta_percent,calibrated,g2_0,g2_0_spread,floor_fraction,error\n");
    let mut calibrated_points = 0;
    for r in &res.records {
        let p = &r.point;
        let calibrated = FIG5_KAPPAS.contains(&p.kappa);
        calibrated_points += calibrated as usize;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            p.rho,
            p.kappa * 1e-9,
            opt(cal.kappa_to_eta(p.kappa).ok().map(|e| e * 100.0)),
            calibrated,
            opt(r.g2_0.map(|s| s.mean)),
            opt(r.g2_0.and_then(|s| s.spread)),
            r.floor_fraction,
            r.error.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    let mut manifest = sim_entries(opts);
    manifest.push(("rho".into(), "1.07 1.12 1.2 1.5 2".into()));
    manifest.push((
        "kappa_per_ns".into(),
        kappas.iter().map(|k| format!("{}", k * 1e-9)).collect::<Vec<_>>().join(" "),
    ));
    manifest.push(("calibrated_points".into(), calibrated_points.to_string()));
    let best = res
        .records
        .iter()
        .filter_map(|r| r.g2_0.map(|s| s.mean))
        .fold(f64::NAN, f64::max);
    Ok(Dataset {
        files: vec![("fig5.csv".into(), csv), ("timing.csv".into(), res.timing_csv())],
        manifest,
        points: res.records.len(),
        failed: res.failures(),
        summary: format!("points={} failed={} max_g2(0)={best:.3}", res.records.len(), res.failures()),
    })
}

fn fig7(opts: &FigureOptions) -> Result<Dataset> {
    let spec = SweepSpec {
        rhos: FIG7_RHOS.to_vec(),
        levels: FIG7_KAPPAS.iter().map(|&k| FeedbackLevel::Kappa(k)).collect(),
        metrics: MetricSet {
            echo: true,
            ..MetricSet::NONE
        },
        ..base_spec(opts)
    };
    let res = run_sweep(&spec)?;
    let mut csv = comment_header(&res.provenance.config);
    csv.push_str("rho,kappa_per_ns,h,h_spread,tau_peak_ns,error\n");
    for r in &res.records {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.point.rho,
            r.point.kappa * 1e-9,
            opt(r.h.map(|s| s.mean)),
            opt(r.h.and_then(|s| s.spread)),
            opt(r.tau_peak.map(|t| t * 1e9)),
            r.error.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    let mut summary = Vec::new();
    for (j, rho) in FIG7_RHOS.iter().enumerate() {
        let row = &res.records[j * FIG7_KAPPAS.len()..(j + 1) * FIG7_KAPPAS.len()];
        let argmin = row
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.h.map(|h| (i, h.mean)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((i, h)) = argmin {
            summary.push(format!("rho={rho}: min h={h:.3} at {}ns-1", FIG7_KAPPAS[i] * 1e-9));
        }
    }
    let mut manifest = sim_entries(opts);
    manifest.push(("rho".into(), "1.07 1.2 1.5".into()));
    manifest.push((
        "kappa_per_ns".into(),
        FIG7_KAPPAS.iter().map(|k| format!("{}", k * 1e-9)).collect::<Vec<_>>().join(" "),
    ));
    Ok(Dataset {
        files: vec![("fig7.csv".into(), csv), ("timing.csv".into(), res.timing_csv())],
        manifest,
        points: res.records.len(),
        failed: res.failures(),
        summary: summary.join("; "),
    })
}
