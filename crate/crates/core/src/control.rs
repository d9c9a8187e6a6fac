//! Output-voltage regulation by switching-frequency modulation.
//!
//! A PI law acts on the output error once per switching period. Above
//! resonance the gain falls with frequency, so a low output pulls the
//! frequency down. A peak-current override ramps the frequency up while the
//! tank current exceeds its limit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::DesignReport;
use crate::gain::solve_frequency;
use crate::sim::{
    fha_tank_current, Channel, Load, LoadProfile, LoadStep, PeriodSummary, Recorder, SimConfig, SimError, SimState,
    Simulator, Waveform, ZvsReport,
};
use crate::steady_state::{find_pop, PopError, PopMethod, PopOptions, PopResult};
use crate::tank::{effective_load, load_resistance, noload_resonance, series_resonance, TankParams};

/// Integral gain giving roughly 1 ms recovery on the reference design.
pub const DEFAULT_KI: f64 = 4e6;
/// Frequency ramp used while the current limit is exceeded (Hz/s).
pub const DEFAULT_SHIFT_RATE: f64 = 2e7;
/// Regulation band used for recovery times, relative to the reference.
pub const RECOVERY_BAND: f64 = 0.01;
/// Tighter band used for settling times.
pub const SETTLING_BAND: f64 = 0.002;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("invalid controller configuration: {0}")]
    InvalidConfig(String),
    #[error("design is not feasible")]
    Infeasible,
    #[error("could not find the starting operating point: {0}")]
    Start(#[from] PopError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl ControlError {
    /// Simulation time at which a numerical failure happened, if known.
    pub fn time(&self) -> Option<f64> {
        match self {
            ControlError::Sim(e) | ControlError::Start(PopError::Sim(e)) => e.time(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub v_ref: f64,
    /// Integral gain (Hz per V·s).
    pub ki: f64,
    /// Proportional gain (Hz per V).
    #[serde(default)]
    pub kp: f64,
    pub fsw_min: f64,
    pub fsw_max: f64,
    /// Peak tank current that triggers the frequency override (A).
    pub i_limit: f64,
    /// Override ramp rate (Hz/s).
    pub f_shift_rate: f64,
    /// Time between updates; `None` updates every switching period.
    #[serde(default)]
    pub update_period: Option<f64>,
}

impl ControllerConfig {
    /// Defaults derived from a design: nominal output, clamps between the
    /// no-load resonance and the requirement's upper limit, and a current
    /// limit at twice the full-load tank current at resonance.
    pub fn for_design(report: &DesignReport) -> Self {
        let req = &report.requirements;
        let tank = &report.tank_rounded;
        let rl = load_resistance(req.vout_nom, req.iout_max);
        Self {
            v_ref: req.vout_nom,
            ki: DEFAULT_KI,
            kp: 0.0,
            fsw_min: req.fsw_min.max(noload_resonance(tank)),
            fsw_max: req.fsw_max,
            i_limit: 2.0 * fha_tank_current(tank, req.vin_nom, series_resonance(tank), rl),
            f_shift_rate: DEFAULT_SHIFT_RATE,
            update_period: None,
        }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: &str| Err(ControlError::InvalidConfig(m.into()));
        if !(self.fsw_min > 0.0 && self.fsw_min < self.fsw_max) {
            return bad("need 0 < fsw_min < fsw_max");
        }
        if !(self.ki >= 0.0 && self.kp >= 0.0) {
            return bad("gains must be non-negative");
        }
        if !(self.i_limit > 0.0) {
            return bad("i_limit must be positive");
        }
        if !(self.f_shift_rate >= 0.0) {
            return bad("f_shift_rate must be non-negative");
        }
        if !(self.v_ref > 0.0) {
            return bad("v_ref must be positive");
        }
        if let Some(p) = self.update_period {
            if !(p > 0.0) {
                return bad("update_period must be positive");
            }
        }
        Ok(())
    }
}

/// Controller memory between updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    /// Integral part of the frequency command (Hz).
    pub integral: f64,
    pub fsw: f64,
    pub overriding: bool,
}

impl ControllerState {
    pub fn new(fsw: f64) -> Self {
        Self {
            integral: fsw,
            fsw,
            overriding: false,
        }
    }
}

/// One controller update after `dt` seconds; returns the new frequency.
pub fn controller_update(
    cfg: &ControllerConfig,
    state: &mut ControllerState,
    meas_v_out: f64,
    meas_i_lr_peak: f64,
    dt: f64,
) -> f64 {
    let clamp = |f: f64| f.clamp(cfg.fsw_min, cfg.fsw_max);
    if meas_i_lr_peak > cfg.i_limit {
        state.overriding = true;
        state.fsw = clamp(state.fsw + cfg.f_shift_rate * dt);
        // resume regulation from wherever the override left off
        state.integral = state.fsw;
        return state.fsw;
    }
    state.overriding = false;
    let error = cfg.v_ref - meas_v_out;
    // conditional integration: the integrator never runs past a clamp
    state.integral = clamp(state.integral - cfg.ki * error * dt);
    state.fsw = clamp(state.integral - cfg.kp * error);
    state.fsw
}

/// One controller update as seen by the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSample {
    pub t: f64,
    pub v_out: f64,
    pub i_lr_peak: f64,
    /// Frequency commanded for the next period.
    pub fsw: f64,
    pub overriding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadStepScenario {
    pub vin: f64,
    pub load: LoadProfile,
    pub t_end: f64,
    pub controller: ControllerConfig,
    /// Minimum spacing of recorded samples; `None` records every step.
    #[serde(default)]
    pub sample_interval: Option<f64>,
}

impl LoadStepScenario {
    /// Current-sink pulse: `base` amperes, `pulse` amperes from `t_step` for
    /// `width` seconds, then `base` again until `t_end`.
    pub fn pulse(
        vin: f64,
        base: f64,
        pulse: f64,
        t_step: f64,
        width: f64,
        t_end: f64,
        controller: ControllerConfig,
    ) -> Result<Self, ControlError> {
        let load = LoadProfile::new(vec![
            LoadStep {
                t_start: 0.0,
                load: Load::Current(base),
            },
            LoadStep {
                t_start: t_step,
                load: Load::Current(pulse),
            },
            LoadStep {
                t_start: t_step + width,
                load: Load::Current(base),
            },
        ])?;
        Ok(Self {
            vin,
            load,
            t_end,
            controller,
            sample_interval: None,
        })
    }

    /// The reference scenario: 0.5 A with a 10 ms step to 0.7 A at 1 ms.
    pub fn reference(report: &DesignReport) -> Self {
        let cfg = ControllerConfig::for_design(report);
        Self::pulse(report.requirements.vin_nom, 0.5, 0.7, 1e-3, 10e-3, 21e-3, cfg).expect("non-empty profile")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub t_change: f64,
    /// Largest `|vOut − v_ref|` until the next change.
    pub max_deviation: f64,
    /// Time after the change from which `vOut` stays inside ±1% up to the
    /// next change; `None` if it never gets there.
    pub recovery_time: Option<f64>,
    /// Same for ±0.2%.
    pub settling_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadStepReport {
    pub v_ref: f64,
    pub fsw_start: f64,
    pub max_deviation: f64,
    pub recoveries: Vec<Recovery>,
    pub fsw_min_seen: f64,
    pub fsw_max_seen: f64,
    pub override_engaged: bool,
    /// Output voltage at the last update.
    pub v_out_final: f64,
    pub zvs_failures: usize,
}

pub struct LoadStepRun {
    pub waveform: Waveform,
    pub zvs: ZvsReport,
    pub trace: Vec<ControlSample>,
    pub report: LoadStepReport,
    pub final_state: SimState,
}

/// Frequency at which the periodic operating point puts the start-of-period
/// output sample at `v_ref`, found by a secant iteration seeded from the
/// first-harmonic solution.
pub fn regulated_operating_point(
    tank: &TankParams,
    vin: f64,
    load: Load,
    v_ref: f64,
) -> Result<PopResult, ControlError> {
    let f0 = series_resonance(tank);
    let rl = match load {
        Load::Resistance(r) => r,
        Load::Current(i) => load_resistance(v_ref, i),
    };
    let qe = {
        let re = effective_load(tank.n, rl);
        if re.is_finite() {
            tank.characteristic_impedance() / re
        } else {
            0.0
        }
    };
    let target = 2.0 * tank.n * v_ref / vin;
    let fn_guess = solve_frequency(tank.ln(), qe, target).unwrap_or(1.0);
    let opts = PopOptions::default();
    let pop_at = |f: f64| -> Result<PopResult, ControlError> {
        let cfg = SimConfig::new(*tank, vin, f, load, 0.0);
        Ok(find_pop(&cfg, PopMethod::Shooting, &opts)?)
    };
    let mut fa = fn_guess * f0;
    let mut pa = pop_at(fa)?;
    let mut fb = fa * 0.99;
    let mut pb = pop_at(fb)?;
    for _ in 0..20 {
        let (ea, eb) = (pa.x0.v_out - v_ref, pb.x0.v_out - v_ref);
        if eb.abs() < 1e-6 * v_ref || ea == eb {
            break;
        }
        let fc = fb - eb * (fb - fa) / (eb - ea);
        let fc = fc.clamp(0.5 * fb, 2.0 * fb);
        fa = fb;
        pa = pb;
        fb = fc;
        pb = pop_at(fb)?;
    }
    Ok(pb)
}

fn time_inside(window: &[&ControlSample], tc: f64, v_ref: f64, band: f64) -> Option<f64> {
    match window.iter().rposition(|s| (s.v_out - v_ref).abs() > band * v_ref) {
        None if !window.is_empty() => Some(0.0),
        Some(i) if i + 1 < window.len() => Some(window[i].t - tc),
        _ => None,
    }
}

fn recoveries(trace: &[ControlSample], changes: &[f64], v_ref: f64, t_end: f64) -> Vec<Recovery> {
    changes
        .iter()
        .enumerate()
        .map(|(k, &tc)| {
            let t_next = changes.get(k + 1).copied().unwrap_or(f64::INFINITY);
            let window: Vec<&ControlSample> = trace.iter().filter(|s| s.t > tc && s.t <= t_next.min(t_end)).collect();
            Recovery {
                t_change: tc,
                max_deviation: window.iter().map(|s| (s.v_out - v_ref).abs()).fold(0.0, f64::max),
                recovery_time: time_inside(&window, tc, v_ref, RECOVERY_BAND),
                settling_time: time_inside(&window, tc, v_ref, SETTLING_BAND),
            }
        })
        .collect()
}

/// Closed-loop run of `scenario` on the design's rounded tank, starting at
/// the regulated periodic operating point for the initial load.
pub fn run_load_step(report: &DesignReport, scenario: &LoadStepScenario) -> Result<LoadStepRun, ControlError> {
    if !report.feasible {
        return Err(ControlError::Infeasible);
    }
    run_load_step_on(&report.tank_rounded, scenario)
}

/// [`run_load_step`] for an explicit tank, without the feasibility gate.
pub fn run_load_step_on(tank: &TankParams, scenario: &LoadStepScenario) -> Result<LoadStepRun, ControlError> {
    let ctl = scenario.controller;
    ctl.validate()?;
    let first = scenario.load.at(0.0);
    let start = regulated_operating_point(tank, scenario.vin, first, ctl.v_ref)?;
    let fsw_start = start.fsw.clamp(ctl.fsw_min, ctl.fsw_max);

    let mut cfg = SimConfig::new(*tank, scenario.vin, fsw_start, first, scenario.t_end);
    cfg.load = scenario.load.clone();
    cfg.validate()?;
    let sim = Simulator::from_config(&cfg);
    let mut rec = Recorder::new(Channel::ALL.to_vec(), scenario.sample_interval);
    let mut state = start.x0;
    let mut cs = ControllerState::new(fsw_start);
    let mut trace = Vec::new();
    let mut since_update = 0.0;
    let mut override_engaged = false;
    let (mut fmin, mut fmax) = (fsw_start, fsw_start);
    let mut window_peak = 0.0f64;

    while state.t < scenario.t_end {
        let summary: PeriodSummary = sim.run_period(&mut state, cs.fsw, &cfg.load, scenario.t_end, &mut rec)?;
        if !summary.complete {
            break;
        }
        let dt = summary.t_end - summary.t_start;
        since_update += dt;
        window_peak = window_peak.max(summary.i_lr_peak);
        let due = ctl.update_period.is_none_or(|p| since_update >= p * (1.0 - 1e-9));
        if due {
            let fsw = controller_update(&ctl, &mut cs, summary.v_out, window_peak, since_update);
            override_engaged |= cs.overriding;
            fmin = fmin.min(fsw);
            fmax = fmax.max(fsw);
            trace.push(ControlSample {
                t: summary.t_end,
                v_out: summary.v_out,
                i_lr_peak: window_peak,
                fsw,
                overriding: cs.overriding,
            });
            since_update = 0.0;
            window_peak = 0.0;
        }
    }
    let load_now = cfg.load.at(state.t);
    sim.finish_edge(&mut state, load_now, &mut rec);

    let mut changes = vec![0.0];
    changes.extend(scenario.load.steps().iter().map(|s| s.t_start).filter(|&t| t > 0.0));
    let recs = recoveries(&trace, &changes, ctl.v_ref, scenario.t_end);
    let report = LoadStepReport {
        v_ref: ctl.v_ref,
        fsw_start,
        max_deviation: recs.iter().map(|r| r.max_deviation).fold(0.0, f64::max),
        recoveries: recs,
        fsw_min_seen: fmin,
        fsw_max_seen: fmax,
        override_engaged,
        v_out_final: trace.last().map_or(state.v_out, |s| s.v_out),
        zvs_failures: rec.zvs.failures(),
    };
    Ok(LoadStepRun {
        waveform: rec.waveform,
        zvs: rec.zvs,
        trace,
        report,
        final_state: state,
    })
}
