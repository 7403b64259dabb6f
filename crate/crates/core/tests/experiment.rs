use std::path::Path;

use lkchaos_core::config::FeedbackLevel;
use lkchaos_core::experiment::{reproduce_figure, MetricSet, SweepSpec};
use lkchaos_core::{Figure, FigureOptions, SimConfig};

fn short_sim() -> SimConfig {
    SimConfig {
        t_transient: 100e-9,
        t_record: 300e-9,
        ..SimConfig::default()
    }
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn bunching_falls_with_pump() {
    let spec = SweepSpec {
        rhos: vec![1.07, 1.2, 1.5],
        levels: vec![FeedbackLevel::Kappa(11e9)],
        ..SweepSpec::default()
    };
    let res = lkchaos_core::run_sweep(&spec).unwrap();
    let g: Vec<f64> = res.records.iter().map(|r| r.g2_0.unwrap().mean).collect();
    assert!(g[0] > g[1] && g[1] > g[2], "{g:?}");
}

#[test]
fn ensemble_agrees_with_time_average() {
    let spec = SweepSpec {
        rhos: vec![1.5],
        levels: vec![FeedbackLevel::Kappa(50e9)],
        ensemble_size: 4,
        seed: 8,
        ..SweepSpec::default()
    };
    let res = lkchaos_core::run_sweep(&spec).unwrap();
    let g = res.records[0].g2_0.unwrap();
    let spread = g.spread.unwrap();
    assert!(spread < 0.1 * g.mean, "{} +- {spread}", g.mean);
}

#[test]
fn parallel_sweep_matches_serial() {
    let spec = SweepSpec {
        tau_ext: 2e-9,
        rhos: vec![1.07, 1.5, 2.0],
        levels: vec![FeedbackLevel::Kappa(7e9), FeedbackLevel::Kappa(35e9)],
        sim: SimConfig {
            t_transient: 10e-9,
            t_record: 80e-9,
            ..SimConfig::default()
        },
        metrics: MetricSet::parse("g2_0,h,pnd").unwrap(),
        ensemble_size: 2,
        seed: 12,
        ..SweepSpec::default()
    };
    let one = lkchaos_core::run_sweep(&SweepSpec { jobs: 1, ..spec.clone() }).unwrap();
    let many = lkchaos_core::run_sweep(&SweepSpec { jobs: 3, ..spec }).unwrap();
    assert_eq!(one.to_csv(), many.to_csv());
}

#[test]
fn fig5_covers_twenty_points() {
    let dir = tempfile::tempdir().unwrap();
    let opts = FigureOptions {
        sim: short_sim(),
        ..FigureOptions::default()
    };
    let report = reproduce_figure(Figure::Fig5, dir.path(), &opts).unwrap();
    assert_eq!((report.points, report.failed), (20, 0));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("points=20\n"), "{manifest}");
    let table = std::fs::read_to_string(dir.path().join("fig5.csv")).unwrap();
    assert_eq!(csv_rows(&table).len(), 20);
}

#[test]
fn figures_rerun_byte_identical() {
    let opts = FigureOptions {
        sim: short_sim(),
        seed: 4,
        ..FigureOptions::default()
    };
    for fig in [Figure::Fig2, Figure::Fig4, Figure::Fig7] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        reproduce_figure(fig, a.path(), &opts).unwrap();
        reproduce_figure(fig, b.path(), &opts).unwrap();
        // timing.csv records wall-clock runtime and is the one file allowed to differ
        let strip = |v: Vec<(String, Vec<u8>)>| -> Vec<_> {
            v.into_iter().filter(|(n, _)| n != "timing.csv").collect()
        };
        let (fa, fb) = (strip(read_dir(a.path())), strip(read_dir(b.path())));
        assert!(fa.len() > 1);
        assert_eq!(fa, fb, "{}", fig.tag());
    }
}

#[test]
fn fig2_counts_favour_bose_einstein() {
    let dir = tempfile::tempdir().unwrap();
    let report = reproduce_figure(Figure::Fig2, dir.path(), &FigureOptions::default()).unwrap();
    assert_eq!(report.failed, 0);
    let names: Vec<String> = read_dir(dir.path()).into_iter().map(|(n, _)| n).collect();
    for k in ["35", "50", "65"] {
        for prefix in ["trace_k", "g2_k", "pnd_k"] {
            assert!(names.contains(&format!("{prefix}{k}.csv")), "{names:?}");
        }
    }
    let table = std::fs::read_to_string(dir.path().join("fig2.csv")).unwrap();
    let rows = csv_rows(&table);
    assert_eq!(rows.len(), 3);
    for row in rows {
        let (be, po): (f64, f64) = (row[5].parse().unwrap(), row[6].parse().unwrap());
        assert!(be < po, "kappa {}: {be} vs {po}", row[0]);
    }
}
