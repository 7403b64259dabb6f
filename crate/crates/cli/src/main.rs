mod args;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use lkchaos_core::counting::{
    bose_einstein_pmf, coincidence_g2, distribution_distance, hbt_timestamps, pnd_from_counts,
    poisson_pmf, sample_counts, timestamps_csv, Attenuation, DetectorConfig,
};
use lkchaos_core::experiment::{reproduce_figure, run_sweep, Figure, FigureOptions, MetricSet, SweepSpec};
use lkchaos_core::metrics::{
    autocorrelation, bandwidth_80, echo_height, g2_from_intensity, power_spectrum, segment_for_rbw,
};
use lkchaos_core::trace::comment_header;
use lkchaos_core::{
    integrate, ChannelMask, Error, FeedbackLevel, FloorPolicy, HistoryInit, ModelConfig, SimConfig,
    Trace,
};

use args::*;

/// Failure before any computation started (status 2) or during it (status 1).
enum Failure {
    Usage(Error),
    Runtime(Error),
}

type Outcome = Result<(), Failure>;

fn usage<T>(r: lkchaos_core::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Usage)
}

fn runtime<T>(r: lkchaos_core::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Runtime)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::G2(a) => g2(a),
        Command::Acf(a) => acf(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Counts(a) => counts(a),
        Command::Hbt(a) => hbt(a),
        Command::Sweep(a) => sweep(a),
        Command::Figure(a) => figure(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Defaults, then the parameter file, then `--set`, then dedicated flags.
fn model_config(common: &Common, m: Option<&ModelArgs>) -> lkchaos_core::Result<ModelConfig> {
    let mut cfg = match &common.config {
        Some(path) => ModelConfig::load(path)?,
        None => ModelConfig::default(),
    };
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
            key: kv.clone(),
            reason: "expected KEY=VALUE".into(),
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(m) = m {
        if let Some(r) = m.rho {
            cfg.rho = r;
        }
        if let Some(k) = m.kappa {
            cfg.level = FeedbackLevel::Kappa(k);
        }
        if let Some(e) = m.eta {
            cfg.level = FeedbackLevel::Eta(e);
        }
        if let Some(p) = m.phase {
            cfg.phase_c = p;
        }
        if let Some(t) = m.tau_ext {
            cfg.tau_ext = t;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sim_config(s: &SimArgs, seed: u64) -> lkchaos_core::Result<SimConfig> {
    let mut cfg = SimConfig {
        seed,
        ..SimConfig::default()
    };
    if let Some(v) = s.step {
        cfg.step_h = v;
    }
    if let Some(v) = s.transient {
        cfg.t_transient = v;
    }
    if let Some(v) = s.record {
        cfg.t_record = v;
    }
    if let Some(v) = s.stride {
        cfg.record_stride = v;
    }
    if let Some(v) = &s.floor_policy {
        cfg.floor_policy = FloorPolicy::parse(v)?;
    }
    if let Some(v) = &s.history {
        cfg.history_init = HistoryInit::parse(v)?;
    }
    Ok(cfg)
}

fn sim_entries(cfg: &SimConfig) -> Vec<(String, String)> {
    vec![
        ("step_h_s".into(), format!("{:e}", cfg.step_h)),
        ("t_transient_s".into(), format!("{:e}", cfg.t_transient)),
        ("t_record_s".into(), format!("{:e}", cfg.t_record)),
        ("record_stride".into(), cfg.record_stride.to_string()),
        ("history".into(), cfg.history_init.as_str().into()),
        ("floor_policy".into(), cfg.floor_policy.as_str().into()),
        ("seed".into(), cfg.seed.to_string()),
    ]
}

fn print_config(entries: &[(String, String)], dry_run: bool) {
    let text = comment_header(entries);
    if dry_run {
        print!("{}", text.replace("# ", ""));
    } else {
        eprint!("{text}");
    }
}

/// Explicit `--out`, else the environment directory, else the working directory.
fn out_path(common: &Common, default_name: &str) -> PathBuf {
    let base = common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from));
    match base {
        Some(p) if p.is_dir() || (common.out.is_none()) => p.join(default_name),
        Some(p) => p,
        None => PathBuf::from(default_name),
    }
}

fn out_dir(common: &Common, default_name: &str) -> PathBuf {
    match (&common.out, std::env::var_os(OUT_DIR_ENV)) {
        (Some(p), _) => p.clone(),
        (None, Some(d)) => PathBuf::from(d).join(default_name),
        (None, None) => PathBuf::from(default_name),
    }
}

fn ensure_parent(path: &Path) -> lkchaos_core::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(())
}

fn write_text(path: &Path, body: &str) -> lkchaos_core::Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, body)?;
    Ok(())
}

/// Loads `--input` or runs the integrator; returns the trace and its resolved configuration.
struct Prepared {
    entries: Vec<(String, String)>,
    job: Job,
}

enum Job {
    Load(PathBuf),
    Simulate(ModelConfig, SimConfig),
}

fn prepare(common: &Common, src: &Source) -> Result<Prepared, Failure> {
    match &src.input {
        Some(path) => Ok(Prepared {
            entries: vec![("input".into(), path.display().to_string())],
            job: Job::Load(path.clone()),
        }),
        None => {
            let model = usage(model_config(common, Some(&src.model)))?;
            let sim = usage(sim_config(&src.sim, common.seed))?;
            usage(sim.delay_steps(&usage(model.feedback())?))?;
            let mut entries: Vec<(String, String)> =
                model.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            entries.extend(sim_entries(&sim));
            Ok(Prepared {
                entries,
                job: Job::Simulate(model, sim),
            })
        }
    }
}

fn obtain(job: &Job) -> Result<Trace, Failure> {
    match job {
        Job::Load(path) => {
            let f = runtime(File::open(path).map_err(Error::from))?;
            runtime(Trace::read_binary(BufReader::new(f)))
        }
        Job::Simulate(model, sim) => runtime(integrate(
            &model.params,
            &runtime(model.feedback())?,
            &runtime(model.drive())?,
            sim,
        )),
    }
}

fn header(trace: &Trace, extra: &[(String, String)]) -> String {
    let mut e: Vec<(String, String)> = trace
        .meta
        .entries()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    e.extend(extra.iter().cloned());
    comment_header(&e)
}

fn simulate(a: SimulateArgs) -> Outcome {
    let model = usage(model_config(&a.common, Some(&a.model)))?;
    let mut sim = usage(sim_config(&a.sim, a.common.seed))?;
    if a.all_channels {
        sim.channels = ChannelMask::ALL;
    }
    let feedback = usage(model.feedback())?;
    usage(sim.delay_steps(&feedback))?;
    let out = out_path(&a.common, "trace.lktr");
    let mut entries: Vec<(String, String)> =
        model.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    entries.extend(sim_entries(&sim));
    entries.push(("out".into(), out.display().to_string()));
    print_config(&entries, a.common.dry_run);
    if a.common.dry_run {
        return Ok(());
    }
    let tr = runtime(integrate(&model.params, &feedback, &runtime(model.drive())?, &sim))?;
    runtime(ensure_parent(&out))?;
    let w = BufWriter::new(runtime(File::create(&out).map_err(Error::from))?);
    if out.extension().is_some_and(|e| e == "csv") {
        runtime(tr.write_csv(w))?;
    } else {
        runtime(tr.write_binary(w))?;
    }
    println!(
        "sigma/mean={:.4} mean_intensity={:.6e} samples={} floor_fraction={:.2e} out={}",
        tr.normalized_std(),
        tr.mean_intensity(),
        tr.len(),
        tr.meta.diagnostics.floor_fraction(),
        out.display()
    );
    Ok(())
}

fn g2(a: G2Args) -> Outcome {
    let prep = prepare(&a.common, &a.source)?;
    if a.lag_stride == 0 {
        return Err(Failure::Usage(Error::Config {
            key: "lag-stride".into(),
            reason: "must be >= 1".into(),
        }));
    }
    let out = out_path(&a.common, "g2.csv");
    let mut entries = prep.entries.clone();
    entries.push(("max_lag_s".into(), format!("{:e}", a.max_lag)));
    entries.push(("lag_stride".into(), a.lag_stride.to_string()));
    print_config(&entries, a.common.dry_run);
    if a.common.dry_run {
        return Ok(());
    }
    let tr = obtain(&prep.job)?;
    let g = runtime(g2_from_intensity(&tr, a.max_lag, a.lag_stride))?;
    runtime(write_text(&out, &g.to_csv(&header(&tr, &entries[prep_extra(&prep)..]))))?;
    println!("g2(0)={:.3} out={}", g.at_zero(), out.display());
    Ok(())
}

/// Index of the first entry that the trace metadata does not already carry.
fn prep_extra(prep: &Prepared) -> usize {
    match prep.job {
        Job::Load(_) => 0,
        Job::Simulate(..) => prep.entries.len(),
    }
}

fn acf(a: AcfArgs) -> Outcome {
    let prep = prepare(&a.common, &a.source)?;
    let out = out_path(&a.common, "acf.csv");
    let mut entries = prep.entries.clone();
    entries.push(("half_window_s".into(), format!("{:e}", a.half_window)));
    print_config(&entries, a.common.dry_run);
    if a.common.dry_run {
        return Ok(());
    }
    let tr = obtain(&prep.job)?;
    let tau_ext = tr.meta.feedback.tau_ext;
    let max_lag = a
        .max_lag
        .unwrap_or_else(|| (tau_ext + a.half_window + 2.0 * tr.dt()).min(0.5 * tr.duration() - tr.dt()));
    let c = runtime(autocorrelation(&tr, max_lag))?;
    runtime(write_text(&out, &c.to_csv(&header(&tr, &entries[prep_extra(&prep)..]))))?;
    let coh = c
        .coherence_time()
        .map(|t| format!("{:.1}ps", t * 1e12))
        .unwrap_or_else(|| "none".into());
    match echo_height(&c, tau_ext, a.half_window) {
        Ok(e) => println!(
            "h={:.3} tau_peak={:.3}ns coherence_time={coh} out={}",
            e.h,
            e.tau_peak * 1e9,
            out.display()
        ),
        Err(_) => println!("h=n/a coherence_time={coh} out={}", out.display()),
    }
    Ok(())
}

fn spectrum(a: SpectrumArgs) -> Outcome {
    let prep = prepare(&a.common, &a.source)?;
    if !(0.0..1.0).contains(&a.overlap) {
        return Err(Failure::Usage(Error::Config {
            key: "overlap".into(),
            reason: "must lie in [0, 1)".into(),
        }));
    }
    let out = out_path(&a.common, "spectrum.csv");
    let mut entries = prep.entries.clone();
    entries.push(("rbw_target_hz".into(), format!("{:e}", a.rbw)));
    entries.push(("overlap".into(), a.overlap.to_string()));
    print_config(&entries, a.common.dry_run);
    if a.common.dry_run {
        return Ok(());
    }
    let tr = obtain(&prep.job)?;
    let seg = segment_for_rbw(tr.dt(), a.rbw);
    let sp = runtime(power_spectrum(&tr, seg, a.overlap))?;
    let bw = runtime(bandwidth_80(&sp))?;
    let mut extra = entries[prep_extra(&prep)..].to_vec();
    extra.push(("segment_len".into(), seg.to_string()));
    extra.push(("rbw_hz".into(), format!("{:e}", sp.rbw)));
    runtime(write_text(&out, &sp.to_csv(&header(&tr, &extra))))?;
    println!(
        "bandwidth_80={:.3}GHz rbw={:.3}MHz out={}",
        bw * 1e-9,
        sp.rbw * 1e-6,
        out.display()
    );
    Ok(())
}

fn detector(d: &DetectorArgs, seed: u64) -> lkchaos_core::Result<DetectorConfig> {
    let atten = match (d.mean_counts, d.atten) {
        (_, Some(a)) => Attenuation::Fixed(a),
        (Some(m), None) => Attenuation::MeanCounts(m),
        (None, None) => Attenuation::MeanCounts(1.0),
    };
    let det = DetectorConfig {
        quantum_eff: d.quantum_eff,
        timing_res: d.timing_res,
        window_t: d.window,
        atten,
        dead_time: d.dead_time,
        seed,
        ..DetectorConfig::default()
    };
    det.validate()?;
    Ok(det)
}

fn detector_entries(det: &DetectorConfig) -> Vec<(String, String)> {
    vec![
        ("quantum_eff".into(), det.quantum_eff.to_string()),
        ("timing_res_s".into(), format!("{:e}", det.timing_res)),
        ("window_t_s".into(), format!("{:e}", det.window_t)),
        ("atten".into(), format!("{:?}", det.atten)),
        (
            "dead_time_s".into(),
            det.dead_time.map(|t| format!("{t:e}")).unwrap_or_else(|| "none".into()),
        ),
        ("detector_seed".into(), det.seed.to_string()),
    ]
}

fn counts(a: CountsArgs) -> Outcome {
    let prep = prepare(&a.common, &a.source)?;
    let det = usage(detector(&a.detector, a.common.seed))?;
    let out = out_path(&a.common, "pnd.csv");
    let mut entries = prep.entries.clone();
    entries.extend(detector_entries(&det));
    print_config(&entries, a.common.dry_run);
    if a.common.dry_run {
        return Ok(());
    }
    let tr = obtain(&prep.job)?;
    let cs = runtime(sample_counts(&tr, &det))?;
    let pnd = runtime(pnd_from_counts(&cs))?;
    runtime(write_text(&out, &pnd.to_csv(&header(&tr, &entries[prep_extra(&prep)..]))))?;
    println!(
        "mean={:.4} g2(0)={:.3} tv_bose_einstein={:.4} tv_poisson={:.4} windows={} out={}",
        pnd.mean,
        pnd.g2_zero,
        distribution_distance(&pnd, |n| bose_einstein_pmf(pnd.mean, n)),
        distribution_distance(&pnd, |n| poisson_pmf(pnd.mean, n)),
        cs.counts.len(),
        out.display()
    );
    Ok(())
}

fn hbt(a: HbtArgs) -> Outcome {
    let prep = prepare(&a.common, &a.source)?;
    let det = usage(detector(&a.detector, a.common.seed))?;
    let out = out_path(&a.common, "hbt_g2.csv");
    let mut entries = prep.entries.clone();
    entries.extend(detector_entries(&det));
    entries.push(("max_lag_s".into(), format!("{:e}", a.max_lag)));
    print_config(&entries, a.common.dry_run);
    if a.common.dry_run {
        return Ok(());
    }
    let tr = obtain(&prep.job)?;
    let streams = runtime(hbt_timestamps(&tr, &det))?;
    let (g, pairs) = runtime(coincidence_g2(
        &streams[0],
        &streams[1],
        tr.duration(),
        det.timing_res,
        a.max_lag,
    ))?;
    let head = header(&tr, &entries[prep_extra(&prep)..]);
    runtime(write_text(&out, &g.to_csv(&head)))?;
    if let Some(path) = &a.timestamps {
        runtime(write_text(path, &timestamps_csv(&streams, &head)))?;
    }
    println!(
        "g2(0)={:.3} singles={}/{} pairs={} out={}",
        g.at_zero(),
        streams[0].times.len(),
        streams[1].times.len(),
        pairs.iter().sum::<u64>(),
        out.display()
    );
    Ok(())
}

fn sweep(a: SweepArgs) -> Outcome {
    let model = usage(model_config(&a.common, None))?;
    let sim = usage(sim_config(&a.sim, a.common.seed))?;
    let levels: Vec<FeedbackLevel> = if a.eta.is_empty() {
        a.kappa.iter().map(|&k| FeedbackLevel::Kappa(k)).collect()
    } else {
        a.eta.iter().map(|&e| FeedbackLevel::Eta(e)).collect()
    };
    let spec = SweepSpec {
        params: model.params,
        calibration: model.calibration.clone(),
        rhos: a.rho.clone(),
        levels,
        phases: if a.phase.is_empty() { vec![model.phase_c] } else { a.phase.clone() },
        tau_ext: model.tau_ext,
        sim,
        metrics: usage(MetricSet::parse(&a.metrics))?,
        detector: usage(detector(&a.detector, a.common.seed))?,
        ensemble_size: a.ensemble,
        seed: a.common.seed,
        jobs: a.common.jobs,
        ..SweepSpec::default()
    };
    let points = usage(spec.points())?;
    let dir = out_dir(&a.common, "sweep");
    let mut entries = spec.entries();
    entries.push(("points".into(), points.len().to_string()));
    entries.push(("out".into(), dir.display().to_string()));
    print_config(&entries, a.common.dry_run);
    if a.common.dry_run {
        return Ok(());
    }
    let res = runtime(run_sweep(&spec))?;
    runtime(std::fs::create_dir_all(&dir).map_err(Error::from))?;
    runtime(write_text(&dir.join("sweep.csv"), &res.to_csv()))?;
    runtime(write_text(&dir.join("timing.csv"), &res.timing_csv()))?;
    let manifest: String = res
        .provenance
        .config
        .iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .chain([
            format!("version={}\n", res.provenance.version),
            format!("points={}\n", res.records.len()),
            format!("failed={}\n", res.failures()),
            "files=sweep.csv timing.csv\n".to_string(),
        ])
        .collect();
    runtime(write_text(&dir.join("manifest.txt"), &manifest))?;
    let g2s: Vec<String> = res
        .records
        .iter()
        .filter_map(|r| r.g2_0.map(|s| format!("{:.3}", s.mean)))
        .collect();
    println!(
        "points={} failed={} g2(0)=[{}] out={}",
        res.records.len(),
        res.failures(),
        g2s.join(" "),
        dir.display()
    );
    if res.failures() > 0 {
        for r in res.records.iter().filter(|r| r.error.is_some()) {
            eprintln!("point {} failed: {}", r.point.index, r.error.as_deref().unwrap_or(""));
        }
        return Err(Failure::Runtime(Error::Degenerate(format!(
            "{} grid point(s) failed",
            res.failures()
        ))));
    }
    Ok(())
}

fn figure(a: FigureArgs) -> Outcome {
    let fig: Figure = usage(a.tag.parse())?;
    let model = usage(model_config(&a.common, None))?;
    let sim = usage(sim_config(&a.sim, a.common.seed))?;
    if a.ensemble == 0 {
        return Err(Failure::Usage(Error::Config {
            key: "ensemble".into(),
            reason: "must be >= 1".into(),
        }));
    }
    let opts = FigureOptions {
        params: model.params,
        sim,
        seed: a.common.seed,
        jobs: a.common.jobs,
        ensemble_size: a.ensemble,
        dense: a.dense,
        fig4_window: a.window,
        ..FigureOptions::default()
    };
    let dir = out_dir(&a.common, fig.tag());
    let mut entries: Vec<(String, String)> =
        model.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    entries.extend(sim_entries(&opts.sim));
    entries.push(("figure".into(), fig.tag().into()));
    entries.push(("ensemble_size".into(), a.ensemble.to_string()));
    entries.push(("dense".into(), a.dense.to_string()));
    entries.push(("out".into(), dir.display().to_string()));
    print_config(&entries, a.common.dry_run);
    if a.common.dry_run {
        return Ok(());
    }
    let rep = runtime(reproduce_figure(fig, &dir, &opts))?;
    println!(
        "{} points={} failed={} {} out={}",
        fig.tag(),
        rep.points,
        rep.failed,
        rep.summary,
        dir.display()
    );
    if rep.failed > 0 {
        return Err(Failure::Runtime(Error::Degenerate(format!(
            "{} point(s) failed",
            rep.failed
        ))));
    }
    Ok(())
}
