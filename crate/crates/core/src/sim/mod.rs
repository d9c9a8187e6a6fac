//! Switched, piecewise-linear simulation of the half-bridge LLC stage.
//!
//! The circuit is a half bridge driving `Lr`–`Cr` into the magnetizing
//! inductance `Lm`, which sits across the primary of an ideal transformer
//! with a center-tapped two-diode rectifier, an output capacitor and a
//! load. All devices are ideal. The continuous state is
//! `(iLr, vCr, iLm, vOut)`; the discrete mode is the bridge phase, the
//! rectifier phase and (during dead time) which body diode clamps the
//! switching node.
//!
//! Each mode is a small linear ODE integrated with fixed-step RK4. Mode
//! boundaries are located by bisection on event functions, re-integrating
//! from the start of the step, so every transition lands on its own sample.

mod waveform;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::locate_crossing;
use crate::tank::{series_resonance, TankParams};

pub use waveform::{fundamental_component, Channel, Waveform, WaveformError};

/// Default number of integration steps per switching period.
pub const STEPS_PER_PERIOD: f64 = 2000.0;
/// Event times are located to this fraction of a switching period.
pub const EVENT_TOLERANCE: f64 = 1e-12;
/// Bisection budget for event localization.
pub const MAX_BISECTIONS: usize = 200;
/// Default soft-start duration (s).
pub const DEFAULT_SOFT_START: f64 = 2e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("mode violation at t = {t:e} s: {detail}")]
    ModeViolation { t: f64, detail: String },
    #[error("event localization failed at t = {t:e} s")]
    EventLocalizationFailure { t: f64 },
    #[error("invalid simulation setup: {0}")]
    InvalidConfig(String),
    #[error("non-finite state at t = {t:e} s")]
    NonFinite { t: f64 },
}

impl SimError {
    /// Simulation time at which the failure happened, if any.
    pub fn time(&self) -> Option<f64> {
        match self {
            SimError::ModeViolation { t, .. }
            | SimError::EventLocalizationFailure { t }
            | SimError::NonFinite { t } => Some(*t),
            SimError::InvalidConfig(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SwitchPhase {
    HighOn,
    DeadToLow,
    LowOn,
    DeadToHigh,
}

impl SwitchPhase {
    pub fn is_dead(self) -> bool {
        matches!(self, SwitchPhase::DeadToLow | SwitchPhase::DeadToHigh)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RectPhase {
    /// Upper diode conducts; primary current `iLr - iLm` positive.
    D1,
    /// Lower diode conducts; primary current negative.
    D2,
    Off,
}

/// What holds the switching node while both gates are off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeClamp {
    /// Low-side body diode, node at 0 V.
    Low,
    /// High-side body diode, node at Vin.
    High,
    /// Neither diode conducts; tank current held at zero.
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mode {
    pub switch: SwitchPhase,
    pub rect: RectPhase,
    /// Only meaningful during dead time.
    pub node: NodeClamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    pub i_lr: f64,
    pub v_cr: f64,
    pub i_lm: f64,
    pub v_out: f64,
    pub mode: Mode,
    /// Energy delivered by the input source since the start of the run (J).
    pub e_in: f64,
    /// Energy absorbed by the load since the start of the run (J).
    pub e_load: f64,
}

impl SimState {
    pub fn zero() -> Self {
        Self::from_vector(0.0, [0.0; 4])
    }

    pub fn from_vector(t: f64, x: [f64; 4]) -> Self {
        Self {
            t,
            i_lr: x[0],
            v_cr: x[1],
            i_lm: x[2],
            v_out: x[3],
            mode: Mode {
                switch: SwitchPhase::HighOn,
                rect: RectPhase::Off,
                node: NodeClamp::High,
            },
            e_in: 0.0,
            e_load: 0.0,
        }
    }

    /// The four continuous circuit states `(iLr, vCr, iLm, vOut)`.
    pub fn vector(&self) -> [f64; 4] {
        [self.i_lr, self.v_cr, self.i_lm, self.v_out]
    }

    fn packed(&self) -> [f64; 6] {
        [self.i_lr, self.v_cr, self.i_lm, self.v_out, self.e_in, self.e_load]
    }

    fn with_packed(&self, t: f64, x: [f64; 6]) -> Self {
        Self {
            t,
            i_lr: x[0],
            v_cr: x[1],
            i_lm: x[2],
            v_out: x[3],
            e_in: x[4],
            e_load: x[5],
            mode: self.mode,
        }
    }

    /// Primary-side current into the ideal transformer.
    pub fn i_primary(&self) -> f64 {
        self.i_lr - self.i_lm
    }

    /// Energy stored in the tank and the output capacitor.
    pub fn stored_energy(&self, tank: &TankParams) -> f64 {
        0.5 * tank.lr * self.i_lr * self.i_lr
            + 0.5 * tank.cr * self.v_cr * self.v_cr
            + 0.5 * tank.lm * self.i_lm * self.i_lm
            + 0.5 * tank.cout * self.v_out * self.v_out
    }
}

/// Output load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Load {
    /// Resistance in ohms; `f64::INFINITY` is an open output.
    Resistance(f64),
    /// Constant-current sink in amperes. It cannot pull the output below 0 V.
    Current(f64),
}

impl Load {
    pub fn open() -> Self {
        Load::Resistance(f64::INFINITY)
    }

    fn current(self, v_out: f64, i_rect: f64) -> f64 {
        match self {
            Load::Resistance(r) => v_out / r,
            Load::Current(i) if v_out > 0.0 => i,
            Load::Current(i) => i.min(i_rect.max(0.0)),
        }
    }

    /// Load current drawn at output voltage `v_out`.
    pub fn current_at(self, v_out: f64) -> f64 {
        self.current(v_out, f64::INFINITY)
    }
}

/// A load that changes at given instants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadStep {
    pub t_start: f64,
    pub load: Load,
}

/// Piecewise-constant load schedule; the first entry applies from `t = -∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LoadProfile {
    steps: Vec<LoadStep>,
}

impl LoadProfile {
    pub fn constant(load: Load) -> Self {
        Self {
            steps: vec![LoadStep { t_start: 0.0, load }],
        }
    }

    pub fn new(mut steps: Vec<LoadStep>) -> Result<Self, SimError> {
        if steps.is_empty() {
            return Err(SimError::InvalidConfig("load profile is empty".into()));
        }
        steps.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[LoadStep] {
        &self.steps
    }

    pub fn at(&self, t: f64) -> Load {
        let i = self.steps.partition_point(|s| s.t_start <= t);
        self.steps[i.saturating_sub(1)].load
    }

    /// First breakpoint strictly after `t`.
    pub fn next_change(&self, t: f64) -> Option<f64> {
        self.steps.iter().map(|s| s.t_start).find(|&ts| ts > t)
    }
}

/// Run description for [`run_transient`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub tank: TankParams,
    pub vin: f64,
    /// Switching frequency after soft start (Hz).
    pub fsw: f64,
    /// Duration of the 2·f0 → fsw ramp; `None` starts directly at `fsw`.
    pub soft_start: Option<f64>,
    pub load: LoadProfile,
    /// Largest integration step; defaults to one 2000th of a period.
    pub dt_max: Option<f64>,
    pub t_end: f64,
    pub record: Vec<Channel>,
    /// Minimum spacing of recorded samples; events are always recorded.
    /// `None` records every step.
    pub sample_interval: Option<f64>,
}

impl SimConfig {
    pub fn new(tank: TankParams, vin: f64, fsw: f64, load: Load, t_end: f64) -> Self {
        Self {
            tank,
            vin,
            fsw,
            soft_start: None,
            load: LoadProfile::constant(load),
            dt_max: None,
            t_end,
            record: Channel::ALL.to_vec(),
            sample_interval: None,
        }
    }

    pub fn dt_max(&self) -> f64 {
        self.dt_max.unwrap_or(1.0 / (STEPS_PER_PERIOD * self.fsw))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.tank
            .validate()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        if !(self.fsw > 0.0 && self.fsw.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "fsw must be positive, got {}",
                self.fsw
            )));
        }
        if !(self.vin >= 0.0) {
            return Err(SimError::InvalidConfig("vin must be non-negative".into()));
        }
        if !(self.t_end >= 0.0) {
            return Err(SimError::InvalidConfig("t_end must be non-negative".into()));
        }
        if !(self.dt_max() > 0.0) {
            return Err(SimError::InvalidConfig("dt_max must be positive".into()));
        }
        if 2.0 * self.tank.t_dead >= 1.0 / self.fsw {
            return Err(SimError::InvalidConfig(
                "dead time must be shorter than half a switching period".into(),
            ));
        }
        Ok(())
    }

    /// Switching frequency for a period starting at `t`.
    pub fn frequency_at(&self, t: f64) -> f64 {
        match self.soft_start {
            Some(ramp) if ramp > 0.0 && t < ramp => {
                let f_start = 2.0 * series_resonance(&self.tank);
                f_start + (self.fsw - f_start) * t / ramp
            }
            _ => self.fsw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SwitchSide {
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZvsEdge {
    pub t_edge: f64,
    /// The switch being turned on.
    pub switch: SwitchSide,
    pub i_lr: f64,
    pub achieved: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ZvsReport {
    pub edges: Vec<ZvsEdge>,
}

impl ZvsReport {
    pub fn all_achieved(&self) -> bool {
        self.edges.iter().all(|e| e.achieved)
    }

    pub fn failures(&self) -> usize {
        self.edges.iter().filter(|e| !e.achieved).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    DiodeOn(RectPhase),
    DiodeOff(RectPhase),
    NodeClamp(NodeClamp),
    Gate(SwitchPhase),
    LoadChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocatedEvent {
    pub t: f64,
    pub kind: EventKind,
}

/// Per-period bookkeeping from [`Simulator::run_period`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodSummary {
    pub t_start: f64,
    pub t_end: f64,
    pub fsw: f64,
    /// Largest `|iLr|` over the period.
    pub i_lr_peak: f64,
    /// Output voltage at the end of the period.
    pub v_out: f64,
    /// `true` if the full period was simulated.
    pub complete: bool,
}

/// Collects samples, events and ZVS verdicts while a run progresses.
#[derive(Debug, Clone)]
pub struct Recorder {
    pub waveform: Waveform,
    pub zvs: ZvsReport,
    pub events: Vec<LocatedEvent>,
    sample_interval: f64,
    last_sample: f64,
    enabled: bool,
}

impl Recorder {
    pub fn new(channels: Vec<Channel>, sample_interval: Option<f64>) -> Self {
        Self {
            waveform: Waveform::new(channels),
            zvs: ZvsReport::default(),
            events: Vec::new(),
            sample_interval: sample_interval.unwrap_or(0.0),
            last_sample: f64::NEG_INFINITY,
            enabled: true,
        }
    }

    /// Recorder that keeps events and ZVS verdicts but no samples.
    pub fn events_only() -> Self {
        let mut r = Self::new(Vec::new(), None);
        r.enabled = false;
        r
    }

    fn sample(&mut self, sim: &Simulator, s: &SimState, load: Load, force: bool) {
        if !self.enabled || self.waveform.channels.is_empty() {
            return;
        }
        if !force && s.t - self.last_sample < self.sample_interval * (1.0 - 1e-9) {
            return;
        }
        self.last_sample = s.t;
        self.waveform.push(s.t, &sim.sample(s, load));
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Guard {
    /// Rectifier primary current sign for the conducting diode.
    DiodeCurrent(RectPhase),
    /// Magnetizing voltage reaching the clamp of the given diode.
    DiodeVoltage(RectPhase),
    /// Tank current through the clamping body diode.
    ClampCurrent(NodeClamp),
    FloatBelowZero,
    FloatAboveVin,
}

/// Integrator and mode logic for one tank at one input voltage.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub tank: TankParams,
    pub vin: f64,
    pub dt_max: f64,
    current_scale: f64,
    voltage_scale: f64,
}

impl Simulator {
    pub fn new(tank: TankParams, vin: f64, dt_max: f64) -> Self {
        let voltage_scale = vin.abs().max(1.0);
        Self {
            tank,
            vin,
            dt_max,
            current_scale: voltage_scale / tank.characteristic_impedance(),
            voltage_scale,
        }
    }

    pub fn from_config(cfg: &SimConfig) -> Self {
        Self::new(cfg.tank, cfg.vin, cfg.dt_max())
    }

    fn clamp_voltage(&self, v_out: f64) -> f64 {
        self.tank.n * (v_out + self.tank.vf)
    }

    /// Switching-node voltage when neither body diode conducts.
    fn float_voltage(&self, x: &[f64; 6], rect: RectPhase) -> f64 {
        match rect {
            RectPhase::D1 => x[1] + self.clamp_voltage(x[3]),
            RectPhase::D2 => x[1] - self.clamp_voltage(x[3]),
            RectPhase::Off => x[1],
        }
    }

    fn node_voltage(&self, x: &[f64; 6], mode: Mode) -> f64 {
        match mode.switch {
            SwitchPhase::HighOn => self.vin,
            SwitchPhase::LowOn => 0.0,
            _ => match mode.node {
                NodeClamp::Low => 0.0,
                NodeClamp::High => self.vin,
                NodeClamp::Float => self.float_voltage(x, mode.rect).clamp(0.0, self.vin),
            },
        }
    }

    /// Voltage across the magnetizing inductance.
    fn magnetizing_voltage(&self, x: &[f64; 6], rect: RectPhase, vsw: f64) -> f64 {
        let t = &self.tank;
        match rect {
            RectPhase::D1 => self.clamp_voltage(x[3]),
            RectPhase::D2 => -self.clamp_voltage(x[3]),
            RectPhase::Off => t.lm * (vsw - x[1]) / (t.lr + t.lm),
        }
    }

    fn rectified_current(&self, x: &[f64; 6], rect: RectPhase) -> f64 {
        let ip = x[0] - x[2];
        match rect {
            RectPhase::D1 => self.tank.n * ip,
            RectPhase::D2 => -self.tank.n * ip,
            RectPhase::Off => 0.0,
        }
    }

    fn derivatives(&self, x: &[f64; 6], mode: Mode, load: Load) -> [f64; 6] {
        let t = &self.tank;
        let vsw = self.node_voltage(x, mode);
        let vm = self.magnetizing_voltage(x, mode.rect, vsw);
        let floating = mode.switch.is_dead() && mode.node == NodeClamp::Float;
        let di_lr = if floating {
            0.0
        } else {
            match mode.rect {
                RectPhase::Off => (vsw - x[1]) / (t.lr + t.lm),
                _ => (vsw - x[1] - vm) / t.lr,
            }
        };
        let di_lm = match mode.rect {
            RectPhase::Off => di_lr,
            _ => vm / t.lm,
        };
        let i_rect = self.rectified_current(x, mode.rect);
        let i_load = load.current(x[3], i_rect);
        let mut dv_out = (i_rect - i_load) / t.cout;
        if x[3] <= 0.0 && dv_out < 0.0 {
            dv_out = 0.0;
        }
        [di_lr, x[0] / t.cr, di_lm, dv_out, vsw * x[0], x[3] * i_load]
    }

    fn rk4(&self, x: &[f64; 6], mode: Mode, load: Load, h: f64) -> [f64; 6] {
        let add = |a: &[f64; 6], k: &[f64; 6], s: f64| -> [f64; 6] { std::array::from_fn(|i| a[i] + s * k[i]) };
        let k1 = self.derivatives(x, mode, load);
        let k2 = self.derivatives(&add(x, &k1, 0.5 * h), mode, load);
        let k3 = self.derivatives(&add(x, &k2, 0.5 * h), mode, load);
        let k4 = self.derivatives(&add(x, &k3, h), mode, load);
        let mut x1: [f64; 6] = std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        // a current sink can reach 0 V inside a step; the rectifier holds it there
        x1[3] = x1[3].max(0.0);
        x1
    }

    fn guards(mode: Mode) -> Vec<Guard> {
        let mut g = match mode.rect {
            RectPhase::D1 | RectPhase::D2 => vec![Guard::DiodeCurrent(mode.rect)],
            RectPhase::Off => vec![Guard::DiodeVoltage(RectPhase::D1), Guard::DiodeVoltage(RectPhase::D2)],
        };
        if mode.switch.is_dead() {
            match mode.node {
                NodeClamp::Float => {
                    g.push(Guard::FloatBelowZero);
                    g.push(Guard::FloatAboveVin);
                }
                clamp => g.push(Guard::ClampCurrent(clamp)),
            }
        }
        g
    }

    /// Event function, normalized so that its scale is O(1); the mode stays
    /// valid while it is positive.
    fn guard_value(&self, guard: Guard, x: &[f64; 6], mode: Mode) -> f64 {
        let ip = x[0] - x[2];
        match guard {
            Guard::DiodeCurrent(RectPhase::D1) => ip / self.current_scale,
            Guard::DiodeCurrent(_) => -ip / self.current_scale,
            Guard::DiodeVoltage(side) => {
                let vm = self.magnetizing_voltage(x, RectPhase::Off, self.node_voltage(x, mode));
                let clamp = self.clamp_voltage(x[3]);
                let v = if side == RectPhase::D1 { clamp - vm } else { clamp + vm };
                v / self.voltage_scale
            }
            Guard::ClampCurrent(NodeClamp::Low) => x[0] / self.current_scale,
            Guard::ClampCurrent(_) => -x[0] / self.current_scale,
            Guard::FloatBelowZero => self.float_voltage(x, mode.rect) / self.voltage_scale,
            Guard::FloatAboveVin => (self.vin - self.float_voltage(x, mode.rect)) / self.voltage_scale,
        }
    }

    fn tolerance(&self) -> f64 {
        1e-9
    }

    /// Rectifier phase consistent with the state and a node voltage.
    fn resolve_rect(&self, x: &[f64; 6], vsw: f64) -> RectPhase {
        let ip = (x[0] - x[2]) / self.current_scale;
        if ip > self.tolerance() {
            return RectPhase::D1;
        }
        if ip < -self.tolerance() {
            return RectPhase::D2;
        }
        let vm = self.magnetizing_voltage(x, RectPhase::Off, vsw);
        let clamp = self.clamp_voltage(x[3]);
        if vm >= clamp && vm > 0.0 {
            RectPhase::D1
        } else if vm <= -clamp && vm < 0.0 {
            RectPhase::D2
        } else {
            RectPhase::Off
        }
    }

    /// Picks the mode that is consistent with `x` for a given bridge phase.
    /// During dead time this chooses the conducting body diode (or none).
    fn resolve(&self, x: &mut [f64; 6], switch: SwitchPhase, load: Load) -> Mode {
        let fixed = |node, rect| Mode { switch, rect, node };
        match switch {
            SwitchPhase::HighOn => fixed(NodeClamp::High, self.resolve_rect(x, self.vin)),
            SwitchPhase::LowOn => fixed(NodeClamp::Low, self.resolve_rect(x, 0.0)),
            _ => {
                let i = x[0] / self.current_scale;
                if i > self.tolerance() {
                    return fixed(NodeClamp::Low, self.resolve_rect(x, 0.0));
                }
                if i < -self.tolerance() {
                    return fixed(NodeClamp::High, self.resolve_rect(x, self.vin));
                }
                // zero tank current: see which way each clamp would drive it
                let low = fixed(NodeClamp::Low, self.resolve_rect(x, 0.0));
                if self.derivatives(x, low, load)[0] > 0.0 {
                    return low;
                }
                let high = fixed(NodeClamp::High, self.resolve_rect(x, self.vin));
                if self.derivatives(x, high, load)[0] < 0.0 {
                    return high;
                }
                x[0] = 0.0;
                let mut rect = RectPhase::Off;
                for _ in 0..3 {
                    let vsw = self.float_voltage(x, rect).clamp(0.0, self.vin);
                    let next = self.resolve_rect(x, vsw);
                    if next == rect {
                        break;
                    }
                    rect = next;
                }
                fixed(NodeClamp::Float, rect)
            }
        }
    }

    /// Resolves the mode of `state` for bridge phase `switch`.
    pub fn resolve_mode(&self, state: &mut SimState, switch: SwitchPhase, load: Load) {
        let mut x = state.packed();
        let mode = self.resolve(&mut x, switch, load);
        *state = state.with_packed(state.t, x);
        state.mode = mode;
    }

    /// Recorded channel values for a state.
    pub fn sample(&self, s: &SimState, load: Load) -> [f64; 8] {
        let x = s.packed();
        let i_rect = self.rectified_current(&x, s.mode.rect);
        [
            self.node_voltage(&x, s.mode),
            s.i_lr,
            s.v_cr,
            s.i_lm,
            s.v_out,
            load.current(s.v_out, i_rect),
            f64::from(u8::from(s.mode.switch == SwitchPhase::HighOn)),
            f64::from(u8::from(s.mode.switch == SwitchPhase::LowOn)),
        ]
    }

    /// Switching-node voltage of a state.
    pub fn switch_node_voltage(&self, s: &SimState) -> f64 {
        self.node_voltage(&s.packed(), s.mode)
    }

    /// One RK4 step of the current mode's ODE, without event handling.
    /// Fails with `ModeViolation` when the result leaves the mode's valid
    /// region by more than the event tolerance.
    pub fn step(&self, state: &SimState, dt: f64, load: Load) -> Result<SimState, SimError> {
        if dt > self.dt_max * (1.0 + 1e-12) {
            return Err(SimError::InvalidConfig(format!(
                "step {dt:e} exceeds dt_max {:e}",
                self.dt_max
            )));
        }
        let x1 = self.rk4(&state.packed(), state.mode, load, dt);
        let next = state.with_packed(state.t + dt, x1);
        self.check_mode(&next)?;
        Ok(next)
    }

    fn check_mode(&self, s: &SimState) -> Result<(), SimError> {
        let x = s.packed();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { t: s.t });
        }
        for guard in Self::guards(s.mode) {
            let g = self.guard_value(guard, &x, s.mode);
            if g < -1e-6 {
                return Err(SimError::ModeViolation {
                    t: s.t,
                    detail: format!("{guard:?} at {g:e} in {:?}", s.mode),
                });
            }
        }
        Ok(())
    }

    /// Locates the mode changes between `before` and `after`, which must be
    /// one integration step apart in the same mode. Events are returned in
    /// time order; each is located independently to `EVENT_TOLERANCE · period`.
    pub fn detect_events(
        &self,
        before: &SimState,
        after: &SimState,
        load: Load,
        period: f64,
    ) -> Result<Vec<LocatedEvent>, SimError> {
        let x0 = before.packed();
        let h = after.t - before.t;
        let x1 = after.packed();
        let mode = before.mode;
        let mut found = Vec::new();
        for guard in Self::guards(mode) {
            let g0 = self.guard_value(guard, &x0, mode);
            let g1 = self.guard_value(guard, &x1, mode);
            if g0 > 0.0 && g1 <= 0.0 {
                let tau = locate_crossing(
                    |tau| self.guard_value(guard, &self.rk4(&x0, mode, load, tau), mode),
                    0.0,
                    h,
                    EVENT_TOLERANCE * period,
                    MAX_BISECTIONS,
                )
                .map_err(|_| SimError::EventLocalizationFailure { t: before.t })?;
                found.push((tau, guard));
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(found
            .into_iter()
            .map(|(tau, guard)| LocatedEvent {
                t: before.t + tau,
                kind: match guard {
                    Guard::DiodeCurrent(side) => EventKind::DiodeOff(side),
                    Guard::DiodeVoltage(side) => EventKind::DiodeOn(side),
                    Guard::ClampCurrent(_) | Guard::FloatBelowZero | Guard::FloatAboveVin => {
                        EventKind::NodeClamp(mode.node)
                    }
                },
            })
            .collect())
    }

    fn apply_transition(
        &self,
        state: &mut SimState,
        load: Load,
        rec: &mut Recorder,
        cause: Option<EventKind>,
    ) -> Result<(), SimError> {
        let before = state.mode;
        self.resolve_mode(state, before.switch, load);
        let kind = match cause {
            Some(k) => k,
            None => return Ok(()),
        };
        let after = state.mode;
        if after.rect != before.rect {
            if before.rect != RectPhase::Off {
                rec.events.push(LocatedEvent {
                    t: state.t,
                    kind: EventKind::DiodeOff(before.rect),
                });
            }
            if after.rect != RectPhase::Off {
                rec.events.push(LocatedEvent {
                    t: state.t,
                    kind: EventKind::DiodeOn(after.rect),
                });
            }
        }
        if before.switch.is_dead() && after.node != before.node {
            rec.events.push(LocatedEvent {
                t: state.t,
                kind: EventKind::NodeClamp(after.node),
            });
        }
        if after == before && !matches!(kind, EventKind::LoadChange) {
            // resolution kept the old mode: the guard crossed only by rounding
            let x = state.packed();
            let still_valid = Self::guards(after)
                .into_iter()
                .all(|g| self.guard_value(g, &x, after) > -1e-9);
            if !still_valid {
                return Err(SimError::ModeViolation {
                    t: state.t,
                    detail: format!("no consistent mode after {kind:?}"),
                });
            }
        }
        Ok(())
    }

    /// Integrates from `state.t` to `t_stop` with the bridge phase fixed,
    /// handling rectifier and clamp events and load breakpoints.
    pub fn advance(
        &self,
        state: &mut SimState,
        t_stop: f64,
        load: &LoadProfile,
        period: f64,
        rec: &mut Recorder,
        i_peak: &mut f64,
    ) -> Result<(), SimError> {
        let snap = EVENT_TOLERANCE * period;
        let mut same_instant = 0usize;
        while t_stop - state.t > snap {
            let breakpoint = load.next_change(state.t).filter(|&b| b <= t_stop);
            let horizon = breakpoint.unwrap_or(t_stop);
            let h = self.dt_max.min(horizon - state.t);
            let now = load.at(state.t);
            let x0 = state.packed();
            let x1 = self.rk4(&x0, state.mode, now, h);
            let candidate = state.with_packed(state.t + h, x1);
            let events = self.detect_events(state, &candidate, now, period)?;
            if let Some(first) = events.first() {
                let tau = first.t - state.t;
                if tau <= snap {
                    same_instant += 1;
                    if same_instant > 8 {
                        return Err(SimError::ModeViolation {
                            t: state.t,
                            detail: "mode chatter".into(),
                        });
                    }
                } else {
                    same_instant = 0;
                }
                let x = self.rk4(&x0, state.mode, now, tau);
                *state = state.with_packed(first.t, x);
                *i_peak = i_peak.max(state.i_lr.abs());
                self.apply_transition(state, now, rec, Some(first.kind))?;
                rec.sample(self, state, now, true);
                continue;
            }
            same_instant = 0;
            let reached = horizon - candidate.t <= snap;
            *state = state.with_packed(if reached { horizon } else { candidate.t }, x1);
            self.check_mode(state)?;
            *i_peak = i_peak.max(state.i_lr.abs());
            match breakpoint {
                Some(b) if reached && b < t_stop => {
                    let next = load.at(b);
                    rec.events.push(LocatedEvent {
                        t: b,
                        kind: EventKind::LoadChange,
                    });
                    self.apply_transition(state, next, rec, Some(EventKind::LoadChange))?;
                    rec.sample(self, state, next, true);
                }
                _ => rec.sample(self, state, now, false),
            }
        }
        state.t = t_stop;
        Ok(())
    }

    fn gate(&self, state: &mut SimState, switch: SwitchPhase, load: Load, rec: &mut Recorder) {
        let previous = state.mode;
        if previous.switch.is_dead() && !switch.is_dead() {
            let (side, wanted) = match switch {
                SwitchPhase::HighOn => (SwitchSide::High, NodeClamp::High),
                _ => (SwitchSide::Low, NodeClamp::Low),
            };
            rec.zvs.edges.push(ZvsEdge {
                t_edge: state.t,
                switch: side,
                i_lr: state.i_lr,
                achieved: previous.node == wanted,
            });
        } else if !switch.is_dead() && previous.switch != switch && self.tank.t_dead == 0.0 {
            // no dead time: the incoming switch always turns on hard
            rec.zvs.edges.push(ZvsEdge {
                t_edge: state.t,
                switch: if switch == SwitchPhase::HighOn {
                    SwitchSide::High
                } else {
                    SwitchSide::Low
                },
                i_lr: state.i_lr,
                achieved: false,
            });
        }
        state.mode.switch = switch;
        self.resolve_mode(state, switch, load);
        rec.events.push(LocatedEvent {
            t: state.t,
            kind: EventKind::Gate(switch),
        });
        rec.sample(self, state, load, true);
    }

    /// Simulates one switching period starting with the high-side turn-on
    /// at `state.t`, stopping early at `t_limit`.
    pub fn run_period(
        &self,
        state: &mut SimState,
        fsw: f64,
        load: &LoadProfile,
        t_limit: f64,
        rec: &mut Recorder,
    ) -> Result<PeriodSummary, SimError> {
        let period = 1.0 / fsw;
        let t0 = state.t;
        let td = self.tank.t_dead;
        if 2.0 * td >= period {
            return Err(SimError::InvalidConfig(
                "dead time must be shorter than half a switching period".into(),
            ));
        }
        let schedule = [
            (t0, SwitchPhase::HighOn),
            (t0 + 0.5 * period - td, SwitchPhase::DeadToLow),
            (t0 + 0.5 * period, SwitchPhase::LowOn),
            (t0 + period - td, SwitchPhase::DeadToHigh),
        ];
        let t_end = t0 + period;
        let mut peak = state.i_lr.abs();
        let mut complete = true;
        for (k, &(t_gate, phase)) in schedule.iter().enumerate() {
            let next = schedule.get(k + 1).map_or(t_end, |s| s.0);
            if t_gate == next {
                continue;
            }
            if t_gate >= t_limit {
                complete = false;
                break;
            }
            state.t = t_gate;
            self.gate(state, phase, load.at(state.t), rec);
            let stop = next.min(t_limit);
            self.advance(state, stop, load, period, rec, &mut peak)?;
            if stop < next {
                complete = false;
                break;
            }
        }
        if complete {
            state.t = t_end;
        }
        Ok(PeriodSummary {
            t_start: t0,
            t_end: state.t,
            fsw,
            i_lr_peak: peak,
            v_out: state.v_out,
            complete,
        })
    }

    /// Closes a run: records the turn-on edge that ends the last dead time.
    pub fn finish_edge(&self, state: &mut SimState, load: Load, rec: &mut Recorder) {
        if state.mode.switch == SwitchPhase::DeadToHigh {
            self.gate(state, SwitchPhase::HighOn, load, rec);
        }
    }
}

/// Output of [`run_transient`].
#[derive(Debug, Clone)]
pub struct Transient {
    pub waveform: Waveform,
    pub zvs: ZvsReport,
    pub events: Vec<LocatedEvent>,
    pub final_state: SimState,
    pub periods: Vec<PeriodSummary>,
}

/// Open-loop run from `initial` to `cfg.t_end`, period by period.
pub fn run_transient(cfg: &SimConfig, initial: SimState) -> Result<Transient, SimError> {
    cfg.validate()?;
    let sim = Simulator::from_config(cfg);
    let mut rec = Recorder::new(cfg.record.clone(), cfg.sample_interval);
    let mut state = initial;
    let mut periods = Vec::new();
    let t_end = initial.t + cfg.t_end;
    if cfg.t_end > 0.0 {
        while state.t < t_end {
            let fsw = cfg.frequency_at(state.t - initial.t);
            let summary = sim.run_period(&mut state, fsw, &cfg.load, t_end, &mut rec)?;
            periods.push(summary);
            if !summary.complete {
                break;
            }
            if (t_end - state.t) <= EVENT_TOLERANCE / fsw {
                let load = cfg.load.at(state.t);
                sim.finish_edge(&mut state, load, &mut rec);
                break;
            }
        }
    }
    Ok(Transient {
        waveform: rec.waveform,
        zvs: rec.zvs,
        events: rec.events,
        final_state: state,
        periods,
    })
}

/// FHA tank-current amplitude: `(2·Vin/π) / |Zin|` for a resistive load.
pub fn fha_tank_current(tank: &TankParams, vin: f64, fsw: f64, rl: f64) -> f64 {
    use num_complex::Complex64;
    let w = 2.0 * PI * fsw;
    let re = crate::tank::effective_load(tank.n, rl);
    let zlm = Complex64::new(0.0, w * tank.lm);
    let zp = if re.is_finite() { zlm * re / (zlm + re) } else { zlm };
    let zin = Complex64::new(0.0, w * tank.lr - 1.0 / (w * tank.cr)) + zp;
    2.0 * vin / PI / zin.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_tank() -> TankParams {
        TankParams::new(37.327e-6, 67.86e-9, 76.52e-6, 1.83)
    }

    #[test]
    fn zero_input_stays_zero() {
        let mut cfg = SimConfig::new(reference_tank(), 0.0, 100e3, Load::Resistance(24.0), 50e-6);
        cfg.record = vec![Channel::ILr, Channel::VOut];
        let run = run_transient(&cfg, SimState::zero()).unwrap();
        assert!(run.final_state.vector().iter().all(|&v| v == 0.0));
        assert!(run.waveform.data.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn rk4_error_is_fifth_order() {
        let sim = Simulator::new(reference_tank(), 48.0, 1e-6);
        let load = Load::Resistance(24.0);
        let mut s = SimState::from_vector(0.0, [0.3, 20.0, 0.1, 12.0]);
        sim.resolve_mode(&mut s, SwitchPhase::HighOn, load);
        assert_eq!(s.mode.rect, RectPhase::D1);
        let reference = |h: f64| {
            let mut r = s;
            for _ in 0..10 {
                r = sim.step(&r, h / 10.0, load).unwrap();
            }
            r
        };
        let err = |h: f64| {
            let a = sim.step(&s, h, load).unwrap();
            let b = reference(h);
            (a.i_lr - b.i_lr).abs() + (a.v_cr - b.v_cr).abs() / 100.0
        };
        let e1 = err(4e-7);
        let e2 = err(2e-7);
        assert!(e1 / e2 >= 16.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn off_mode_power_balance() {
        // open output and rectifier blocked: stored-energy rate equals vsw·iLr
        let tank = reference_tank();
        let sim = Simulator::new(tank, 48.0, 1e-8);
        let load = Load::open();
        let mut s = SimState::from_vector(0.0, [0.2, 10.0, 0.2, 30.0]);
        sim.resolve_mode(&mut s, SwitchPhase::HighOn, load);
        assert_eq!(s.mode.rect, RectPhase::Off);
        let dt = 1e-8;
        let s1 = sim.step(&s, dt, load).unwrap();
        let d_stored = s1.stored_energy(&tank) - s.stored_energy(&tank);
        let source = s1.e_in - s.e_in;
        assert!(
            (d_stored - source).abs() < 1e-9 * source.abs(),
            "{d_stored} vs {source}"
        );
    }

    #[test]
    fn open_output_keeps_rectifier_off() {
        // output held above the reachable magnetizing voltage
        let mut cfg = SimConfig::new(reference_tank(), 48.0, 100e3, Load::open(), 100e-6);
        cfg.record = vec![Channel::ILr, Channel::ILm];
        let start = SimState::from_vector(0.0, [0.0, 24.0, 0.0, 40.0]);
        let run = run_transient(&cfg, start).unwrap();
        let i_lr = run.waveform.channel(Channel::ILr).unwrap();
        let i_lm = run.waveform.channel(Channel::ILm).unwrap();
        assert!(i_lr.iter().zip(i_lm).all(|(a, b)| (a - b).abs() < 1e-9));
        assert!(!run.events.iter().any(|e| matches!(e.kind, EventKind::DiodeOn(_))));
    }

    #[test]
    fn load_profile_lookup() {
        let p = LoadProfile::new(vec![
            LoadStep {
                t_start: 1e-3,
                load: Load::Current(0.7),
            },
            LoadStep {
                t_start: 0.0,
                load: Load::Current(0.5),
            },
            LoadStep {
                t_start: 11e-3,
                load: Load::Current(0.5),
            },
        ])
        .unwrap();
        assert_eq!(p.at(0.5e-3), Load::Current(0.5));
        assert_eq!(p.at(1e-3), Load::Current(0.7));
        assert_eq!(p.at(20e-3), Load::Current(0.5));
        assert_eq!(p.next_change(1e-3), Some(11e-3));
        assert_eq!(p.next_change(12e-3), None);
        assert!(LoadProfile::new(vec![]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::new(reference_tank(), 48.0, 100e3, Load::Resistance(24.0), 1e-3);
        assert!(cfg.validate().is_ok());
        cfg.tank.t_dead = 6e-6;
        assert!(cfg.validate().is_err());
        let cfg = SimConfig::new(reference_tank(), 48.0, -1.0, Load::Resistance(24.0), 1e-3);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_length_run_is_empty() {
        let cfg = SimConfig::new(reference_tank(), 48.0, 100e3, Load::Resistance(24.0), 0.0);
        let run = run_transient(&cfg, SimState::zero()).unwrap();
        assert!(run.waveform.is_empty());
        assert!(run.zvs.edges.is_empty());
    }

    #[test]
    fn soft_start_ramps_down() {
        let mut cfg = SimConfig::new(reference_tank(), 48.0, 110e3, Load::Resistance(24.0), 1e-3);
        cfg.soft_start = Some(DEFAULT_SOFT_START);
        let f0 = series_resonance(&cfg.tank);
        assert!((cfg.frequency_at(0.0) - 2.0 * f0).abs() < 1e-6);
        assert!((cfg.frequency_at(1e-3) - (f0 + 55e3)).abs() < 1.0);
        assert_eq!(cfg.frequency_at(3e-3), 110e3);
    }
}
