use lkchaos_core::integrator::relaxation_oscillation_frequency;
use lkchaos_core::metrics::{
    autocorrelation, autocorrelation_with, bandwidth_80, echo_height, g2_from_intensity,
    g2_ripple_frequency, g2_with, power_spectrum, Estimator,
};
use lkchaos_core::{integrate, DriveConfig, FeedbackConfig, LaserParams, SimConfig, Trace};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn chaotic(rho: f64, kappa: f64) -> Trace {
    integrate(
        &LaserParams::default(),
        &FeedbackConfig::with_kappa(kappa).unwrap(),
        &DriveConfig::new(rho).unwrap(),
        &SimConfig::default(),
    )
    .unwrap()
}

fn positive_trace() -> impl Strategy<Value = Trace> {
    prop::collection::vec(0.01f64..10.0, 64..600)
        .prop_map(|v| Trace::from_intensity(1e-12, v).unwrap())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn g2_is_even_in_lag(tr in positive_trace()) {
        let g = g2_from_intensity(&tr, 20e-12, 1).unwrap();
        let n = g.values.len();
        for k in 0..n {
            prop_assert_eq!(g.lags[k], -g.lags[n - 1 - k]);
            prop_assert_eq!(g.values[k], g.values[n - 1 - k]);
        }
    }

    #[test]
    fn g2_zero_is_one_plus_relative_variance(tr in positive_trace()) {
        let x = tr.intensity();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let g0 = g2_from_intensity(&tr, 0.0, 1).unwrap().at_zero();
        prop_assert!(close(g0, 1.0 + var / (mean * mean), 1e-12), "{} vs {}", g0, 1.0 + var / (mean * mean));
    }

    #[test]
    fn statistics_ignore_intensity_scale(tr in positive_trace(), c in 1e-6f64..1e6) {
        let sc = tr.scaled(c).unwrap();
        let lag = 30e-12;
        let (a, b) = (g2_from_intensity(&tr, lag, 1).unwrap(), g2_from_intensity(&sc, lag, 1).unwrap());
        for (u, v) in a.values.iter().zip(&b.values) {
            prop_assert!(close(*u, *v, 1e-10));
        }
        let (ca, cb) = (autocorrelation(&tr, lag).unwrap(), autocorrelation(&sc, lag).unwrap());
        for (u, v) in ca.values.iter().zip(&cb.values) {
            prop_assert!((u - v).abs() < 1e-10);
        }
        let (ha, hb) = (echo_height(&ca, 20e-12, 5e-12).unwrap(), echo_height(&cb, 20e-12, 5e-12).unwrap());
        prop_assert!((ha.h - hb.h).abs() < 1e-10);
        let (sa, sb) = (power_spectrum(&tr, 32, 0.5).unwrap(), power_spectrum(&sc, 32, 0.5).unwrap());
        prop_assert_eq!(bandwidth_80(&sa).unwrap(), bandwidth_80(&sb).unwrap());
    }

    #[test]
    fn fft_and_direct_estimators_agree(tr in positive_trace()) {
        let lag = 20e-12;
        let a = g2_with(&tr, lag, 1, Estimator::Fft).unwrap();
        let b = g2_with(&tr, lag, 1, Estimator::Direct).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            prop_assert!(close(*u, *v, 1e-9));
        }
    }

    #[test]
    fn acf_starts_at_one(tr in positive_trace()) {
        let c = autocorrelation(&tr, 10e-12).unwrap();
        prop_assert_eq!(c.values[0], 1.0);
        prop_assert!(c.values.iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }
}

#[test]
fn white_noise_acf_is_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 20_000;
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let tr = Trace::from_intensity(1e-12, x).unwrap();
    let c = autocorrelation_with(&tr, 200e-12, Estimator::Direct).unwrap();
    let bound = 5.0 / (n as f64).sqrt();
    assert!(c.values[1..].iter().all(|v| v.abs() < bound));
}

#[test]
fn psd_integrates_to_windowed_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Vec<f64> = (0..16_384)
        .map(|k| 3.0 + (k as f64 * 0.3).sin() + rng.gen_range(-0.5..0.5))
        .collect();
    let m = 1024;
    let w: Vec<f64> = (0..m)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / m as f64).cos())
        .collect();
    let w_sq: f64 = w.iter().map(|v| v * v).sum();
    let mut acc = Vec::new();
    let mut start = 0;
    while start + m <= x.len() {
        let seg = &x[start..start + m];
        let mean = seg.iter().sum::<f64>() / m as f64;
        acc.push(seg.iter().zip(&w).map(|(v, wi)| ((v - mean) * wi).powi(2)).sum::<f64>() / w_sq);
        start += m / 2;
    }
    let oracle = acc.iter().sum::<f64>() / acc.len() as f64;
    let sp = power_spectrum(&Trace::from_intensity(1e-12, x).unwrap(), m, 0.5).unwrap();
    assert!((sp.total_power() - oracle).abs() / oracle < 0.01);
}

#[test]
fn g2_ripple_follows_relaxation_oscillation() {
    let p = LaserParams::default();
    let f_ro = relaxation_oscillation_frequency(&p, &DriveConfig::new(1.5).unwrap()).unwrap();
    for kappa in [11.216e9, 20e9] {
        let g = g2_from_intensity(&chaotic(1.5, kappa), 2e-9, 1).unwrap();
        let f = g2_ripple_frequency(&g, 2e-9).unwrap();
        assert!((f - f_ro).abs() / f_ro < 0.3, "kappa={kappa:e}: {f:e} vs {f_ro:e}");
    }
}

#[test]
fn echo_appears_at_the_delay() {
    let tr = chaotic(1.5, 11e9);
    let acf = autocorrelation(&tr, 102e-9).unwrap();
    let echo = echo_height(&acf, 99.85e-9, 2e-9).unwrap();
    assert!((echo.tau_peak - 99.85e-9).abs() < 0.5e-9, "{:e}", echo.tau_peak);
    let background = acf
        .lags()
        .zip(&acf.values)
        .filter(|(t, _)| (60e-9..90e-9).contains(t))
        .map(|(_, c)| c.abs())
        .fold(0.0, f64::max);
    assert!(echo.h > 3.0 * background, "h={} background={background}", echo.h);
}

#[test]
fn echo_height_dips_at_intermediate_feedback() {
    let h: Vec<f64> = [5.5e9, 7e9, 11e9, 20e9]
        .iter()
        .map(|&k| {
            let acf = autocorrelation(&chaotic(1.2, k), 102e-9).unwrap();
            echo_height(&acf, 99.85e-9, 2e-9).unwrap().h
        })
        .collect();
    let argmin = (0..4).min_by(|&a, &b| h[a].total_cmp(&h[b])).unwrap();
    assert!(argmin > 0 && argmin < 3, "{h:?}");
}
