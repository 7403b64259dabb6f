//! Fixed-step RK4 integration of the Lang-Kobayashi rate equations.
//!
//! The state is the real field amplitude `E` (with `E²` a photon number), the
//! unwrapped optical phase `φ` and the carrier number `N`. The delayed field is
//! read from a ring buffer holding one external round trip of history, so the
//! delay must be an integer number of steps.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::params::{carrier_injection_rate, DriveConfig, FeedbackConfig, LaserParams};
use crate::trace::{ChannelMask, Trace, TraceMeta};

/// Lower bound on the field amplitude, in square-root photon units.
pub const AMPLITUDE_FLOOR: f64 = 1e-6;

/// Relative tolerance used when checking that the delay is a whole number of steps.
const DELAY_RATIO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserState {
    /// Field amplitude, `e_amp² ` is the intracavity photon number.
    pub e_amp: f64,
    /// Unwrapped optical phase (rad).
    pub phi: f64,
    /// Carrier number.
    pub n_car: f64,
}

impl LaserState {
    pub fn intensity(&self) -> f64 {
        self.e_amp * self.e_amp
    }

    pub fn is_finite(&self) -> bool {
        self.e_amp.is_finite() && self.phi.is_finite() && self.n_car.is_finite()
    }

    /// Default starting point: a weak field with carriers at transparency.
    pub fn initial(p: &LaserParams) -> Self {
        Self {
            e_amp: 1e-3,
            phi: 0.0,
            n_car: p.n0,
        }
    }
}

/// Fill policy for the field history before `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistoryInit {
    /// Every history slot holds the initial state.
    #[default]
    Constant,
    /// History holds the amplitude floor with zero phase (no light in the cavity).
    Dark,
}

impl HistoryInit {
    pub fn as_str(&self) -> &'static str {
        match self {
            HistoryInit::Constant => "constant",
            HistoryInit::Dark => "dark",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(HistoryInit::Constant),
            "dark" => Ok(HistoryInit::Dark),
            other => Err(Error::Parse(format!("unknown history policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Integration step (s).
    pub step_h: f64,
    /// Warm-up duration that is integrated but not recorded (s).
    pub t_transient: f64,
    /// Recorded duration (s).
    pub t_record: f64,
    /// State at `t = 0`; `None` selects [`LaserState::initial`].
    pub initial: Option<LaserState>,
    pub history_init: HistoryInit,
    /// Keep one sample out of every `record_stride` steps.
    pub record_stride: usize,
    pub channels: ChannelMask,
    pub floor_policy: FloorPolicy,
    /// Carried into trace metadata; the integration itself is deterministic.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step_h: 2e-12,
            t_transient: 2e-6,
            t_record: 10e-6,
            initial: None,
            history_init: HistoryInit::Constant,
            record_stride: 2,
            channels: ChannelMask::INTENSITY,
            floor_policy: FloorPolicy::Rescue,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Checks the configuration against a feedback setup and returns the delay in steps.
    pub fn delay_steps(&self, f: &FeedbackConfig) -> Result<usize> {
        if !(self.step_h.is_finite() && self.step_h > 0.0) {
            return Err(Error::invalid("step_h", format!("must be > 0, got {}", self.step_h)));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride", "must be >= 1"));
        }
        if !(self.t_record.is_finite() && self.t_record > 0.0) {
            return Err(Error::invalid("t_record", "must be > 0"));
        }
        let ratio = f.tau_ext / self.step_h;
        let d = ratio.round();
        if d < 1.0 || (ratio - d).abs() > DELAY_RATIO_TOL * ratio {
            return Err(Error::invalid(
                "step_h",
                format!(
                    "tau_ext / step_h = {ratio} is not a positive integer (tau_ext = {:e} s)",
                    f.tau_ext
                ),
            ));
        }
        // tolerate floating-point jitter in the transient bound
        if !(self.t_transient.is_finite() && self.t_transient >= f.tau_ext * (1.0 - 1e-12)) {
            return Err(Error::invalid(
                "t_transient",
                format!("must be >= tau_ext ({:e} s), got {:e}", f.tau_ext, self.t_transient),
            ));
        }
        let steps = self.record_steps();
        if steps / self.record_stride == 0 {
            return Err(Error::invalid("t_record", "shorter than one recorded sample"));
        }
        Ok(d as usize)
    }

    pub fn transient_steps(&self) -> u64 {
        (self.t_transient / self.step_h).round() as u64
    }

    pub fn record_steps(&self) -> usize {
        (self.t_record / self.step_h).round() as usize
    }
}

/// Precomputed right-hand-side constants.
#[derive(Debug, Clone, Copy)]
pub struct RateEquations {
    g_n: f64,
    n0: f64,
    epsilon: f64,
    inv_tau_p: f64,
    inv_tau_n: f64,
    half_alpha: f64,
    kappa: f64,
    phase_c: f64,
    pump: f64,
}

impl RateEquations {
    pub fn new(p: &LaserParams, f: &FeedbackConfig, pump_rate: f64) -> Self {
        Self {
            g_n: p.g_n,
            n0: p.n0,
            epsilon: p.epsilon,
            inv_tau_p: 1.0 / p.tau_p,
            inv_tau_n: 1.0 / p.tau_n,
            half_alpha: 0.5 * p.alpha,
            kappa: f.kappa,
            phase_c: f.phase_c,
            pump: pump_rate,
        }
    }

    /// Saturated modal gain for the given state.
    #[inline]
    pub fn gain(&self, s: &LaserState) -> f64 {
        self.g_n * (s.n_car - self.n0) / (1.0 + self.epsilon * s.e_amp * s.e_amp)
    }

    /// Time derivatives `[dE/dt, dφ/dt, dN/dt]` given the delayed amplitude and phase.
    #[inline]
    pub fn eval(&self, s: &LaserState, e_delayed: f64, phi_delayed: f64) -> [f64; 3] {
        let e = s.e_amp;
        let intensity = e * e;
        let g = self.g_n * (s.n_car - self.n0) / (1.0 + self.epsilon * intensity);
        let net = g - self.inv_tau_p;
        let (sin, cos) = (self.phase_c + s.phi - phi_delayed).sin_cos();
        let fb = self.kappa * e_delayed;
        let de = 0.5 * net * e + fb * cos;
        let dphi = self.half_alpha * net - fb * sin / e.max(AMPLITUDE_FLOOR);
        let dn = self.pump - s.n_car * self.inv_tau_n - g * intensity;
        [de, dphi, dn]
    }
}

/// Right-hand side of the delayed rate equations.
pub fn derivatives(
    s: &LaserState,
    e_delayed: f64,
    phi_delayed: f64,
    p: &LaserParams,
    f: &FeedbackConfig,
    pump_rate: f64,
) -> [f64; 3] {
    RateEquations::new(p, f, pump_rate).eval(s, e_delayed, phi_delayed)
}

/// Continuous-wave operating point of the laser without feedback.
///
/// Setting the amplitude and carrier derivatives to zero makes the photon
/// number the solution of a linear equation once gain saturation is included.
pub fn steady_state(p: &LaserParams, d: &DriveConfig) -> Result<LaserState> {
    if d.rho <= 1.0 {
        return Err(Error::NoLasing { rho: d.rho });
    }
    let pump = carrier_injection_rate(p, d);
    let excess = pump - p.threshold_carriers() / p.tau_n;
    let photons = excess / (1.0 / p.tau_p + p.epsilon / (p.g_n * p.tau_p * p.tau_n));
    let n_car = p.threshold_carriers() + p.epsilon * photons / (p.g_n * p.tau_p);
    Ok(LaserState {
        e_amp: photons.sqrt(),
        phi: 0.0,
        n_car,
    })
}

/// Small-signal relaxation-oscillation frequency (Hz) of the solitary laser.
pub fn relaxation_oscillation_frequency(p: &LaserParams, d: &DriveConfig) -> Result<f64> {
    let s = steady_state(p, d)?;
    Ok((p.g_n * s.intensity() / p.tau_p).sqrt() / TAU)
}

/// Counters collected while integrating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub steps: u64,
    /// Steps whose amplitude was raised to [`AMPLITUDE_FLOOR`].
    pub floor_hits: u64,
    /// Steps redone on the complex field after undershooting the floor.
    pub rescues: u64,
}

impl Diagnostics {
    pub fn floor_fraction(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.floor_hits as f64 / self.steps as f64
        }
    }
}

/// Delay line of `(E, φ)` samples covering `[t - τ, t]`.
#[derive(Clone)]
struct History {
    amp: Vec<f64>,
    phase: Vec<f64>,
    head: usize,
}

impl History {
    fn new(delay: usize, fill: (f64, f64)) -> Self {
        Self {
            amp: vec![fill.0; delay + 1],
            phase: vec![fill.1; delay + 1],
            head: 0,
        }
    }

    /// Values at `t - τ` and `t - τ + h`.
    #[inline]
    fn delayed(&self) -> ((f64, f64), (f64, f64)) {
        let len = self.amp.len();
        let i0 = (self.head + 1) % len;
        let i1 = (self.head + 2) % len;
        ((self.amp[i0], self.phase[i0]), (self.amp[i1], self.phase[i1]))
    }

    /// Stores the sample at `t + h`, dropping the one at `t - τ`.
    #[inline]
    fn push(&mut self, s: &LaserState) {
        let len = self.amp.len();
        self.head = (self.head + 1) % len;
        self.amp[self.head] = s.e_amp;
        self.phase[self.head] = s.phi;
    }
}

/// What to do with a step whose amplitude lands below [`AMPLITUDE_FLOOR`].
///
/// The amplitude equation cannot carry the field through zero: near the origin
/// the feedback term overshoots to negative `E` within a single step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FloorPolicy {
    /// Redo the step on the complex field `E·e^{iφ}`, where a passage close to
    /// the origin is regular, and clamp only if the result is still below the floor.
    #[default]
    Rescue,
    /// Clamp the amplitude to the floor.
    Clamp,
}

impl FloorPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            FloorPolicy::Rescue => "rescue",
            FloorPolicy::Clamp => "clamp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rescue" => Ok(FloorPolicy::Rescue),
            "clamp" => Ok(FloorPolicy::Clamp),
            other => Err(Error::Parse(format!("unknown floor policy `{other}`"))),
        }
    }
}

impl RateEquations {
    /// Complex-field form `dÊ/dt = ½(1+iα)(G − 1/τ_p)Ê + κ·e^{−iC}·Ê(t−τ)`
    /// on `[Re Â, Im Â, N]`, where `Â = Ê·e^{−iωt}` is the field seen in a
    /// frame turning at `omega` rad/s. The delayed field is given in the same frame.
    #[inline]
    fn eval_rotating(&self, y: [f64; 3], xd: f64, yd: f64, omega: f64) -> [f64; 3] {
        let [x, q, n] = y;
        let intensity = x * x + q * q;
        let g = self.g_n * (n - self.n0) / (1.0 + self.epsilon * intensity);
        let half_net = 0.5 * (g - self.inv_tau_p);
        let alpha = 2.0 * self.half_alpha;
        let (s, c) = self.phase_c.sin_cos();
        let (fr, fi) = (self.kappa * c, -self.kappa * s);
        let dx = half_net * (x - alpha * q) + fr * xd - fi * yd + omega * q;
        let dq = half_net * (q + alpha * x) + fr * yd + fi * xd - omega * x;
        let dn = self.pump - n * self.inv_tau_n - g * intensity;
        [dx, dq, dn]
    }
}

#[inline]
fn rk4(
    y: [f64; 3],
    h: f64,
    d0: (f64, f64),
    dm: (f64, f64),
    d1: (f64, f64),
    f: impl Fn([f64; 3], f64, f64) -> [f64; 3],
) -> [f64; 3] {
    let shift = |k: [f64; 3], c: f64| [y[0] + c * k[0], y[1] + c * k[1], y[2] + c * k[2]];
    let k1 = f(y, d0.0, d0.1);
    let k2 = f(shift(k1, 0.5 * h), dm.0, dm.1);
    let k3 = f(shift(k2, 0.5 * h), dm.0, dm.1);
    let k4 = f(shift(k3, h), d1.0, d1.1);
    let w = h / 6.0;
    [
        y[0] + w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        y[2] + w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    ]
}

fn to_cartesian(amp: f64, phi: f64) -> (f64, f64) {
    let (s, c) = phi.sin_cos();
    (amp * c, amp * s)
}

/// Stepper that advances the delayed system one RK4 step at a time.
#[derive(Clone)]
pub struct Integrator {
    rhs: RateEquations,
    policy: FloorPolicy,
    h: f64,
    state: LaserState,
    history: History,
    time: f64,
    diagnostics: Diagnostics,
}

impl Integrator {
    pub fn new(
        p: &LaserParams,
        f: &FeedbackConfig,
        d: &DriveConfig,
        cfg: &SimConfig,
    ) -> Result<Self> {
        p.validate()?;
        let delay = cfg.delay_steps(f)?;
        let s = cfg.initial.unwrap_or_else(|| LaserState::initial(p));
        if !(s.is_finite() && s.n_car > 0.0 && s.e_amp >= 0.0) {
            return Err(Error::invalid("initial", format!("invalid initial state {s:?}")));
        }
        let state = LaserState {
            e_amp: s.e_amp.max(AMPLITUDE_FLOOR),
            ..s
        };
        let fill = match cfg.history_init {
            HistoryInit::Constant => (state.e_amp, state.phi),
            HistoryInit::Dark => (AMPLITUDE_FLOOR, 0.0),
        };
        let mut history = History::new(delay, fill);
        history.push(&state);
        Ok(Self {
            rhs: RateEquations::new(p, f, carrier_injection_rate(p, d)),
            policy: cfg.floor_policy,
            h: cfg.step_h,
            state,
            history,
            time: 0.0,
            diagnostics: Diagnostics::default(),
        })
    }

    pub fn state(&self) -> LaserState {
        self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    /// Overwrites the current state (history is left untouched).
    pub fn set_state(&mut self, s: LaserState) {
        self.state = s;
    }

    /// One classical RK4 step; the delayed input at the half step is the
    /// midpoint of the two bracketing history samples.
    #[inline]
    pub fn step(&mut self) -> Result<()> {
        let (d0, d1) = self.history.delayed();
        let y = self.state;
        let rhs = &self.rhs;
        let dm = (0.5 * (d0.0 + d1.0), 0.5 * (d0.1 + d1.1));
        let polar = rk4([y.e_amp, y.phi, y.n_car], self.h, d0, dm, d1, |v, a, b| {
            let s = LaserState {
                e_amp: v[0],
                phi: v[1],
                n_car: v[2],
            };
            rhs.eval(&s, a, b)
        });
        let mut next = LaserState {
            e_amp: polar[0],
            phi: polar[1],
            n_car: polar[2],
        };
        self.time += self.h;
        self.diagnostics.steps += 1;
        if !next.is_finite() {
            return Err(Error::Diverged { time: self.time });
        }
        if next.e_amp < AMPLITUDE_FLOOR {
            if self.policy == FloorPolicy::Rescue {
                next = self.cartesian_step(&y, d0, d1);
                self.diagnostics.rescues += 1;
                if !next.is_finite() {
                    return Err(Error::Diverged { time: self.time });
                }
            }
            if next.e_amp < AMPLITUDE_FLOOR {
                next.e_amp = AMPLITUDE_FLOOR;
                self.diagnostics.floor_hits += 1;
            }
        }
        self.state = next;
        self.history.push(&next);
        Ok(())
    }

    /// Step on the complex field, in a frame that follows the α-driven
    /// rotation at the start of the step. Without it the rotation makes RK4
    /// unstable far below threshold.
    fn cartesian_step(&self, y: &LaserState, d0: (f64, f64), d1: (f64, f64)) -> LaserState {
        let h = self.h;
        let rhs = &self.rhs;
        let omega = rhs.half_alpha * (rhs.gain(y) - rhs.inv_tau_p);
        let c0 = to_cartesian(d0.0, d0.1 - y.phi);
        let c1 = to_cartesian(d1.0, d1.1 - y.phi - omega * h);
        let cm = {
            let (a, b) = (to_cartesian(d0.0, d0.1), to_cartesian(d1.0, d1.1));
            let (x, q) = (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1));
            let (s, c) = (y.phi + 0.5 * omega * h).sin_cos();
            (x * c + q * s, q * c - x * s)
        };
        let out = rk4([y.e_amp, 0.0, y.n_car], h, c0, cm, c1, |v, a, b| {
            rhs.eval_rotating(v, a, b, omega)
        });
        LaserState {
            e_amp: out[0].hypot(out[1]),
            phi: y.phi + omega * h + out[1].atan2(out[0]),
            n_car: out[2],
        }
    }
}

/// Integrates the delayed rate equations and returns the recorded window.
pub fn integrate(
    p: &LaserParams,
    f: &FeedbackConfig,
    d: &DriveConfig,
    cfg: &SimConfig,
) -> Result<Trace> {
    let mut integ = Integrator::new(p, f, d, cfg)?;
    for _ in 0..cfg.transient_steps() {
        integ.step()?;
    }
    let stride = cfg.record_stride;
    let n_samples = cfg.record_steps() / stride;
    let mask = cfg.channels;
    let mut intensity = Vec::with_capacity(n_samples);
    let mut phase = mask.contains(ChannelMask::PHASE).then(|| Vec::with_capacity(n_samples));
    let mut carriers = mask
        .contains(ChannelMask::CARRIERS)
        .then(|| Vec::with_capacity(n_samples));
    for _ in 0..n_samples {
        for _ in 0..stride {
            integ.step()?;
        }
        let s = integ.state();
        intensity.push(s.intensity());
        if let Some(v) = phase.as_mut() {
            v.push(s.phi);
        }
        if let Some(v) = carriers.as_mut() {
            v.push(s.n_car);
        }
    }
    let meta = TraceMeta {
        params: *p,
        feedback: *f,
        drive: *d,
        step_h: cfg.step_h,
        t_transient: cfg.t_transient,
        history_init: cfg.history_init,
        seed: cfg.seed,
        diagnostics: integ.diagnostics(),
    };
    Trace::new(cfg.step_h * stride as f64, intensity, phase, carriers, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params_no_eps() -> LaserParams {
        LaserParams {
            epsilon: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn gain_clamped_state_has_zero_field_derivatives() {
        let p = params_no_eps();
        let f = FeedbackConfig::default();
        let s = LaserState {
            e_amp: 200.0,
            phi: 0.3,
            n_car: p.threshold_carriers(),
        };
        let [de, dphi, _] = derivatives(&s, 0.0, 0.0, &p, &f, 0.0);
        assert!(de.abs() < 1e-9 * s.e_amp / p.tau_p, "{de}");
        assert!(dphi.abs() < 1e-3, "{dphi}");
    }

    #[test]
    fn carrier_balance_at_floor() {
        let p = LaserParams::default();
        let f = FeedbackConfig::default();
        let s = LaserState {
            e_amp: AMPLITUDE_FLOOR,
            phi: 0.0,
            n_car: 1.4e8,
        };
        let [_, _, dn] = derivatives(&s, 0.0, 0.0, &p, &f, s.n_car / p.tau_n);
        let g = p.g_n * (s.n_car - p.n0);
        assert!(dn.abs() <= 1.01 * g * AMPLITUDE_FLOOR * AMPLITUDE_FLOOR);
    }

    #[test]
    fn floor_protects_phase_division() {
        let p = LaserParams::default();
        let f = FeedbackConfig::new(1e10, 1e-9, 1.0).unwrap();
        let s = LaserState {
            e_amp: 0.0,
            phi: 0.0,
            n_car: p.n0,
        };
        let d = derivatives(&s, 1.0, 0.0, &p, &f, 0.0);
        assert!(d.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn steady_state_zeroes_derivatives() {
        let p = LaserParams::default();
        let d = DriveConfig { rho: 1.5 };
        let s = steady_state(&p, &d).unwrap();
        let pump = carrier_injection_rate(&p, &d);
        let [de, dphi, dn] = derivatives(&s, 0.0, 0.0, &p, &FeedbackConfig::default(), pump);
        assert!(de.abs() < 1e-6 * s.e_amp / p.tau_p);
        assert!(dphi.abs() < 1e-3);
        assert!(dn.abs() < 1e-9 * pump);
        assert_relative_eq!(s.intensity(), 8.19e4, max_relative = 0.01);
    }

    #[test]
    fn relaxation_frequency_limits() {
        let p = LaserParams::default();
        let f = relaxation_oscillation_frequency(&p, &DriveConfig { rho: 1.5 }).unwrap();
        assert!((f - 4.6e9).abs() < 0.1e9, "{f}");
        let near = relaxation_oscillation_frequency(&p, &DriveConfig { rho: 1.0 + 1e-9 }).unwrap();
        assert!(near < 1e6);
        assert!(matches!(
            relaxation_oscillation_frequency(&p, &DriveConfig { rho: 1.0 }),
            Err(Error::NoLasing { .. })
        ));
        // doubling G_N while holding S/τ_p scales by √2
        let d = DriveConfig { rho: 1.5 };
        let s = steady_state(&p, &d).unwrap().intensity();
        let base = (p.g_n * s / p.tau_p).sqrt();
        let doubled = (2.0 * p.g_n * s / p.tau_p).sqrt();
        assert_relative_eq!(doubled / base, std::f64::consts::SQRT_2, max_relative = 1e-14);
    }

    #[test]
    fn delay_must_be_whole_steps() {
        let f = FeedbackConfig::default();
        let cfg = SimConfig::default();
        assert_eq!(cfg.delay_steps(&f).unwrap(), 49_925);
        let bad = SimConfig {
            step_h: 3e-12,
            ..SimConfig::default()
        };
        assert!(bad.delay_steps(&f).is_err());
        let short = SimConfig {
            t_transient: 10e-9,
            ..SimConfig::default()
        };
        assert!(short.delay_steps(&f).is_err());
        let stride = SimConfig {
            record_stride: 0,
            ..SimConfig::default()
        };
        assert!(stride.delay_steps(&f).is_err());
    }

    fn short_cfg() -> (FeedbackConfig, SimConfig) {
        let f = FeedbackConfig::new(0.0, 1e-9, 0.0).unwrap();
        let cfg = SimConfig {
            t_transient: 10e-9,
            t_record: 5e-9,
            record_stride: 1,
            ..SimConfig::default()
        };
        (f, cfg)
    }

    #[test]
    fn below_threshold_laser_goes_dark() {
        let p = LaserParams::default();
        let (f, mut cfg) = short_cfg();
        cfg.t_transient = 20e-9;
        let tr = integrate(&p, &f, &DriveConfig { rho: 0.5 }, &cfg).unwrap();
        let last = *tr.intensity().last().unwrap();
        assert!(last < 1e-6, "{last}");
    }

    #[test]
    fn integration_is_deterministic() {
        let p = LaserParams::default();
        let f = FeedbackConfig::new(2e10, 1e-9, 0.4).unwrap();
        let cfg = SimConfig {
            t_transient: 5e-9,
            t_record: 5e-9,
            ..SimConfig::default()
        };
        let d = DriveConfig { rho: 1.5 };
        let a = integrate(&p, &f, &d, &cfg).unwrap();
        let b = integrate(&p, &f, &d, &cfg).unwrap();
        assert_eq!(a.intensity(), b.intensity());
    }

    #[test]
    fn divergence_is_reported_with_time() {
        let p = LaserParams::default();
        let (f, cfg) = short_cfg();
        let mut integ = Integrator::new(&p, &f, &DriveConfig { rho: 1.5 }, &cfg).unwrap();
        integ.set_state(LaserState {
            e_amp: f64::NAN,
            phi: 0.0,
            n_car: p.n0,
        });
        match integ.step() {
            Err(Error::Diverged { time }) => assert_relative_eq!(time, cfg.step_h),
            other => panic!("{other:?}"),
        }
    }
}
