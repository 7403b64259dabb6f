use lkchaos_core::params::{carrier_injection_rate, threshold_current};
use lkchaos_core::{DriveConfig, EtaKappaCalibration, LaserParams};

// J_th = e·(N0 + 1/(G_N·τ_p))/τ_N in exact integers:
// e = 1602176634e-28 C, G_N·τ_p = 64e-9, τ_N = 23e-10 s, N0 = 135e6
fn threshold_oracle_digits() -> (u128, u128) {
    let bracket: u128 = 135_000_000 + 1_000_000_000 / 64;
    let numerator = 1_602_176_634u128 * bracket;
    // value = numerator / 23 · 1e-18 A
    (numerator, 23)
}

#[test]
fn threshold_current_matches_exact_arithmetic() {
    let (num, den) = threshold_oracle_digits();
    // twelve significant digits of the quotient, scaled back to amperes
    let scaled = num * 1_000_000 / den;
    let oracle = scaled as f64 * 1e-24;
    let jth = threshold_current(&LaserParams::default());
    assert!((jth - oracle).abs() / oracle < 1e-12, "{jth} vs {oracle}");
    assert_eq!(format!("{:.2}", jth * 1e3), "10.49");
}

#[test]
fn injection_rate_scales_threshold() {
    let p = LaserParams::default();
    let (num, den) = threshold_oracle_digits();
    // carriers per second: J_th/e = bracket/τ_N
    let per_second = (num / 1_602_176_634) as f64 / den as f64 * 1e10;
    let r = carrier_injection_rate(&p, &DriveConfig::new(1.5).unwrap());
    assert!((r - 1.5 * per_second).abs() / r < 1e-14);
    assert!((r * p.e_charge - 1.5 * threshold_current(&p)).abs() / r < 1e-14);
}

#[test]
fn calibration_contains_reference_pairs() {
    let cal = EtaKappaCalibration::default();
    for (kappa, eta) in [(5.5e9, 0.031), (7e9, 0.063), (11e9, 0.125), (20e9, 0.25)] {
        assert_eq!(cal.eta_to_kappa(eta).unwrap(), kappa);
    }
    let k = cal.eta_to_kappa(0.128).unwrap();
    assert!((k - 11.216e9).abs() < 1e3, "{k}");
}
