//! Periodic operating point (POP) of the switched converter at a fixed
//! switching frequency and load.
//!
//! The period map takes the four continuous states at a high-side turn-on
//! instant to the states one period later. Its fixed point is found either
//! by plain cycle iteration or by Newton shooting with a finite-difference
//! Jacobian. Modes are re-derived from the state at the start of every
//! period, so mode boundaries are free to move between iterations.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{
    Channel, Load, LoadProfile, PeriodSummary, Recorder, SimConfig, SimError, SimState, Simulator, SwitchPhase,
    Waveform, ZvsReport,
};
use crate::tank::{effective_load, TankParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PopError {
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("state diverged after {iterations} iterations (norm grew {growth:.1}x)")]
    Divergence { iterations: usize, growth: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("periodic operating point needs a fixed frequency and load: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PopMethod {
    CycleIteration,
    Shooting,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopOptions {
    /// Per-state residual limit, relative to that state's cycle peak.
    pub tolerance: f64,
    pub max_cycles: usize,
    /// Plain cycles run before Newton starts.
    pub warm_start_cycles: usize,
    /// Relative finite-difference perturbation for the Jacobian.
    pub perturbation: f64,
    pub max_newton: usize,
}

impl Default for PopOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_cycles: 2000,
            warm_start_cycles: 20,
            perturbation: 1e-6,
            max_newton: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopMetrics {
    pub v_out_mean: f64,
    pub v_out_ripple_pp: f64,
    pub i_lr_rms: f64,
    pub i_lr_peak: f64,
    pub zvs_all_edges: bool,
    /// Cycle-mean power drawn from the input (W).
    pub p_in: f64,
    /// Cycle-mean power delivered to the load (W).
    pub p_out: f64,
}

#[derive(Debug, Clone)]
pub struct PopResult {
    /// State at the high-side turn-on that starts the cycle.
    pub x0: SimState,
    pub fsw: f64,
    pub period: f64,
    pub residual: f64,
    /// Cycles (iteration) or Newton steps (shooting) used.
    pub iterations: usize,
    pub cycle_waveform: Waveform,
    pub zvs: ZvsReport,
    /// Energy drawn from the input over the cycle (J).
    pub e_in: f64,
    /// Energy delivered to the load over the cycle (J).
    pub e_load: f64,
    pub metrics: PopMetrics,
}

fn fixed_load(cfg: &SimConfig) -> Result<Load, PopError> {
    match cfg.load.steps() {
        [only] => Ok(only.load),
        _ => Err(PopError::Unsupported("load profile has breakpoints".into())),
    }
}

/// First-harmonic estimate of the state at a high-side turn-on, used as the
/// starting point of the search.
pub fn fha_initial_state(tank: &TankParams, vin: f64, fsw: f64, load: Load) -> [f64; 4] {
    let w = 2.0 * PI * fsw;
    let rl = match load {
        Load::Resistance(r) => r,
        Load::Current(i) if i > 0.0 => vin / (2.0 * tank.n) / i,
        Load::Current(_) => f64::INFINITY,
    };
    let re = effective_load(tank.n, rl);
    let zlm = Complex64::new(0.0, w * tank.lm);
    let zp = if re.is_finite() { zlm * re / (zlm + re) } else { zlm };
    let zin = Complex64::new(0.0, w * tank.lr - 1.0 / (w * tank.cr)) + zp;
    // vsw ≈ Vin/2 + (2 Vin / π)·sin(ωt) with the high side on over [0, T/2)
    let i = Complex64::new(2.0 * vin / PI, 0.0) / zin;
    let vc = i / Complex64::new(0.0, w * tank.cr);
    let vm = i * zp;
    let ilm = vm / zlm;
    [i.im, 0.5 * vin + vc.im, ilm.im, vm.norm() * PI / (4.0 * tank.n)]
}

struct PeriodMap<'a> {
    sim: Simulator,
    fsw: f64,
    load: LoadProfile,
    load_now: Load,
    cfg: &'a SimConfig,
}

struct MapOutput {
    next: [f64; 4],
    peaks: [f64; 4],
}

impl<'a> PeriodMap<'a> {
    fn new(cfg: &'a SimConfig) -> Result<Self, PopError> {
        cfg.validate()?;
        if cfg.soft_start.is_some() {
            return Err(PopError::Unsupported("soft start is enabled".into()));
        }
        let load_now = fixed_load(cfg)?;
        Ok(Self {
            sim: Simulator::from_config(cfg),
            fsw: cfg.fsw,
            load: LoadProfile::constant(load_now),
            load_now,
            cfg,
        })
    }

    fn start_state(&self, x: [f64; 4]) -> SimState {
        let mut s = SimState::from_vector(0.0, x);
        self.sim.resolve_mode(&mut s, SwitchPhase::HighOn, self.load_now);
        s
    }

    fn run(&self, x: [f64; 4], rec: &mut Recorder) -> Result<(SimState, PeriodSummary), SimError> {
        let mut s = self.start_state(x);
        let summary = self.sim.run_period(&mut s, self.fsw, &self.load, f64::INFINITY, rec)?;
        Ok((s, summary))
    }

    fn apply(&self, x: [f64; 4]) -> Result<MapOutput, SimError> {
        let channels = vec![Channel::ILr, Channel::VCr, Channel::ILm, Channel::VOut];
        let mut rec = Recorder::new(channels.clone(), None);
        let (s, _) = self.run(x, &mut rec)?;
        let mut peaks = [0.0; 4];
        for (k, ch) in channels.into_iter().enumerate() {
            let v = rec.waveform.channel(ch).expect("recorded");
            peaks[k] = v.iter().fold(0.0f64, |m, &a| m.max(a.abs()));
        }
        Ok(MapOutput {
            next: s.vector(),
            peaks,
        })
    }

    fn apply_fast(&self, x: [f64; 4]) -> Result<[f64; 4], SimError> {
        let mut rec = Recorder::events_only();
        Ok(self.run(x, &mut rec)?.0.vector())
    }
}

fn residuals(x: &[f64; 4], out: &MapOutput) -> [f64; 4] {
    std::array::from_fn(|i| {
        let d = (out.next[i] - x[i]).abs();
        if d == 0.0 {
            0.0
        } else {
            d / out.peaks[i].max(f64::MIN_POSITIVE)
        }
    })
}

fn residual(x: &[f64; 4], out: &MapOutput) -> f64 {
    residuals(x, out).into_iter().fold(0.0, f64::max)
}

fn norm(x: &[f64; 4], scale: &[f64; 4]) -> f64 {
    (0..4).map(|i| (x[i] / scale[i]).abs()).fold(0.0, f64::max)
}

/// Finds the periodic steady state of `cfg` (fixed `fsw`, single load).
pub fn find_pop(cfg: &SimConfig, method: PopMethod, opts: &PopOptions) -> Result<PopResult, PopError> {
    let map = PeriodMap::new(cfg)?;
    let x_init = fha_initial_state(&cfg.tank, cfg.vin, cfg.fsw, map.load_now);
    find_pop_from(&map, x_init, method, opts)
}

/// Same as [`find_pop`] but starting from a caller-supplied state vector.
pub fn find_pop_with_guess(
    cfg: &SimConfig,
    guess: [f64; 4],
    method: PopMethod,
    opts: &PopOptions,
) -> Result<PopResult, PopError> {
    let map = PeriodMap::new(cfg)?;
    find_pop_from(&map, guess, method, opts)
}

fn find_pop_from(
    map: &PeriodMap<'_>,
    x_init: [f64; 4],
    method: PopMethod,
    opts: &PopOptions,
) -> Result<PopResult, PopError> {
    let vscale = map.cfg.vin.abs().max(1.0);
    let iscale = vscale / map.cfg.tank.characteristic_impedance();
    let scale = [iscale, vscale, iscale, vscale];
    let norm0 = norm(&x_init, &scale).max(1.0);
    let diverged = |x: &[f64; 4]| norm(x, &scale) > 100.0 * norm0;

    let mut x = x_init;
    let mut out = map.apply(x)?;
    let mut res = residual(&x, &out);
    let mut iterations = 0;

    let plain_budget = match method {
        PopMethod::CycleIteration => opts.max_cycles,
        PopMethod::Shooting => opts.warm_start_cycles,
    };
    // Slowly contracting modes leave the iterate further from the fixed
    // point than one cycle's residual shows. Plain iteration stops on the
    // estimated distance `r / (1 - rate)` of each state, with the rate taken
    // over the last few cycles.
    const RATE_WINDOW: usize = 8;
    let mut history = std::collections::VecDeque::with_capacity(RATE_WINDOW + 1);
    history.push_back(residuals(&x, &out));
    let mut distance = f64::INFINITY;
    while !(res < opts.tolerance && distance < opts.tolerance) && iterations < plain_budget {
        x = out.next;
        iterations += 1;
        if diverged(&x) {
            return Err(PopError::Divergence {
                iterations,
                growth: norm(&x, &scale) / norm0,
            });
        }
        out = map.apply(x)?;
        let r = residuals(&x, &out);
        res = r.into_iter().fold(0.0, f64::max);
        history.push_back(r);
        if history.len() > RATE_WINDOW {
            let oldest = history.pop_front().unwrap_or(r);
            distance = (0..4)
                .map(|i| {
                    if r[i] == 0.0 {
                        return 0.0;
                    }
                    let rate = (r[i] / oldest[i]).powf(1.0 / RATE_WINDOW as f64).min(0.999_999);
                    r[i] / (1.0 - rate)
                })
                .fold(0.0, f64::max);
        }
        if method == PopMethod::Shooting && res < opts.tolerance {
            break;
        }
    }

    if method == PopMethod::Shooting {
        iterations = 0;
        while res >= opts.tolerance {
            if iterations >= opts.max_newton {
                return Err(PopError::NoConvergence {
                    iterations,
                    residual: res,
                });
            }
            iterations += 1;
            let f = Vector4::from_fn(|i, _| out.next[i] - x[i]);
            let mut jac = Matrix4::zeros();
            for j in 0..4 {
                let h = opts.perturbation * x[j].abs().max(out.peaks[j]).max(1e-3 * scale[j]);
                let mut xp = x;
                xp[j] += h;
                let fp = map.apply_fast(xp)?;
                for i in 0..4 {
                    jac[(i, j)] = ((fp[i] - xp[i]) - f[i]) / h;
                }
            }
            let dx = jac.lu().solve(&(-f)).ok_or(PopError::NoConvergence {
                iterations,
                residual: res,
            })?;
            // damped Newton: accept the first step length that lowers the
            // residual, else fall back to one plain cycle
            let mut lambda = 1.0;
            let mut accepted = false;
            while lambda >= 1.0 / 64.0 {
                let trial: [f64; 4] = std::array::from_fn(|i| x[i] + lambda * dx[i]);
                lambda *= 0.5;
                if diverged(&trial) {
                    continue;
                }
                let trial_out = match map.apply(trial) {
                    Ok(o) => o,
                    Err(_) => continue,
                };
                let trial_res = residual(&trial, &trial_out);
                if trial_res < res {
                    x = trial;
                    out = trial_out;
                    res = trial_res;
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                x = out.next;
                if diverged(&x) {
                    return Err(PopError::Divergence {
                        iterations,
                        growth: norm(&x, &scale) / norm0,
                    });
                }
                out = map.apply(x)?;
                res = residual(&x, &out);
            }
        }
    }

    if res >= opts.tolerance {
        return Err(PopError::NoConvergence {
            iterations,
            residual: res,
        });
    }
    finish(map, x, res, iterations)
}

fn finish(map: &PeriodMap<'_>, x: [f64; 4], residual: f64, iterations: usize) -> Result<PopResult, PopError> {
    let mut rec = Recorder::new(map.cfg.record.clone(), None);
    let start = map.start_state(x);
    let (mut end, _) = map.run(x, &mut rec)?;
    map.sim.finish_edge(&mut end, map.load_now, &mut rec);
    let period = 1.0 / map.fsw;
    let mut pop = PopResult {
        x0: start,
        fsw: map.fsw,
        period,
        residual,
        iterations,
        cycle_waveform: rec.waveform,
        zvs: rec.zvs,
        e_in: end.e_in - start.e_in,
        e_load: end.e_load - start.e_load,
        metrics: PopMetrics {
            v_out_mean: 0.0,
            v_out_ripple_pp: 0.0,
            i_lr_rms: 0.0,
            i_lr_peak: 0.0,
            zvs_all_edges: false,
            p_in: 0.0,
            p_out: 0.0,
        },
    };
    pop.metrics = pop_metrics(&pop);
    Ok(pop)
}

/// Cycle statistics over exactly one period of the POP waveform. Channels
/// that were not recorded report zero.
pub fn pop_metrics(pop: &PopResult) -> PopMetrics {
    let w = &pop.cycle_waveform;
    let t0 = pop.x0.t;
    let t1 = t0 + pop.period;
    let (v_min, v_max) = w.min_max(Channel::VOut, t0, t1).unwrap_or((0.0, 0.0));
    let (i_min, i_max) = w.min_max(Channel::ILr, t0, t1).unwrap_or((0.0, 0.0));
    PopMetrics {
        v_out_mean: w.mean(Channel::VOut, t0, t1).unwrap_or(0.0),
        v_out_ripple_pp: v_max - v_min,
        i_lr_rms: w.rms(Channel::ILr, t0, t1).unwrap_or(0.0),
        i_lr_peak: i_min.abs().max(i_max.abs()),
        zvs_all_edges: pop.zvs.all_achieved(),
        p_in: pop.e_in / pop.period,
        p_out: pop.e_load / pop.period,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::solve_frequency;
    use crate::tank::{effective_load, normalize, series_resonance};

    fn design_tank() -> TankParams {
        TankParams::from_normalized(2.05, 0.36, 100e3, effective_load(1.83, 24.0), 1.83)
    }

    fn config_at(fn_: f64) -> SimConfig {
        let tank = design_tank();
        SimConfig::new(tank, 48.0, fn_ * series_resonance(&tank), Load::Resistance(24.0), 0.0)
    }

    fn regulation_fn() -> f64 {
        let tank = design_tank();
        let p = normalize(&tank, effective_load(tank.n, 24.0), 1.0);
        solve_frequency(p.ln, p.qe, 0.915).unwrap()
    }

    #[test]
    fn zero_input_has_zero_fixed_point() {
        let mut cfg = config_at(1.1);
        cfg.vin = 0.0;
        let pop = find_pop_with_guess(&cfg, [0.0; 4], PopMethod::Shooting, &PopOptions::default()).unwrap();
        assert_eq!(pop.residual, 0.0);
        assert_eq!(pop.x0.vector(), [0.0; 4]);
        assert_eq!(pop.metrics.v_out_ripple_pp, 0.0);
    }

    #[test]
    fn shooting_at_resonance_matches_ideal_waveform() {
        // At fn = 1 the rectifier conducts for exactly half a period per
        // side: iLr is a sinusoid and iLm a triangle peaking at n·Vo/(4·Lm·f).
        let cfg = config_at(1.0);
        let pop = find_pop(&cfg, PopMethod::Shooting, &PopOptions::default()).unwrap();
        let tank = cfg.tank;
        let vo = pop.metrics.v_out_mean;
        assert!((vo / (cfg.vin / (2.0 * tank.n)) - 1.0).abs() < 1e-3, "vo {vo}");
        let i_mag = tank.n * vo / (4.0 * tank.lm * cfg.fsw);
        let i_load = PI * vo / 24.0 / (2.0 * tank.n);
        let expected = i_mag.hypot(i_load);
        assert!((pop.metrics.i_lr_peak / expected - 1.0).abs() < 5e-3);
        assert!((pop.metrics.i_lr_rms / (expected / 2f64.sqrt()) - 1.0).abs() < 5e-3);
        assert!(pop.metrics.zvs_all_edges);
    }

    #[test]
    fn methods_agree_and_balance_power() {
        let cfg = config_at(regulation_fn());
        let opts = PopOptions::default();
        let a = find_pop(&cfg, PopMethod::Shooting, &opts).unwrap();
        let b = find_pop(&cfg, PopMethod::CycleIteration, &opts).unwrap();
        assert!(a.residual < opts.tolerance && b.residual < opts.tolerance);
        let channels = [Channel::ILr, Channel::VCr, Channel::ILm, Channel::VOut];
        for (k, ch) in channels.into_iter().enumerate() {
            let (lo, hi) = a.cycle_waveform.min_max(ch, 0.0, a.period).unwrap();
            let peak = lo.abs().max(hi.abs());
            let d = (a.x0.vector()[k] - b.x0.vector()[k]).abs() / peak;
            assert!(d < 10.0 * opts.tolerance, "{ch}: {d:e}");
        }
        assert!((a.metrics.p_in / a.metrics.p_out - 1.0).abs() < 1e-6);
    }

    #[test]
    fn one_more_period_returns_to_start() {
        let mut cfg = config_at(1.05);
        let pop = find_pop(&cfg, PopMethod::Shooting, &PopOptions::default()).unwrap();
        cfg.t_end = pop.period;
        let run = crate::sim::run_transient(&cfg, pop.x0).unwrap();
        let end = run.final_state.vector();
        let x0 = pop.x0.vector();
        let channels = [Channel::ILr, Channel::VCr, Channel::ILm, Channel::VOut];
        for (k, ch) in channels.into_iter().enumerate() {
            let (lo, hi) = pop.cycle_waveform.min_max(ch, 0.0, pop.period).unwrap();
            let d = (end[k] - x0[k]).abs() / lo.abs().max(hi.abs());
            assert!(d < 2e-6, "{ch}: {d:e}");
        }
    }

    #[test]
    fn capacitive_operation_loses_zvs() {
        let pop = find_pop(&config_at(0.6), PopMethod::Shooting, &PopOptions::default()).unwrap();
        assert!(!pop.metrics.zvs_all_edges);
        assert!(pop.zvs.failures() > 0);
    }

    #[test]
    fn time_varying_configs_are_rejected() {
        let mut cfg = config_at(1.0);
        cfg.soft_start = Some(1e-3);
        assert!(matches!(
            find_pop(&cfg, PopMethod::Shooting, &PopOptions::default()),
            Err(PopError::Unsupported(_))
        ));
        let mut cfg = config_at(1.0);
        cfg.load = LoadProfile::new(vec![
            crate::sim::LoadStep {
                t_start: 0.0,
                load: Load::Current(0.5),
            },
            crate::sim::LoadStep {
                t_start: 1e-3,
                load: Load::Current(0.7),
            },
        ])
        .unwrap();
        assert!(matches!(
            find_pop(&cfg, PopMethod::CycleIteration, &PopOptions::default()),
            Err(PopError::Unsupported(_))
        ));
    }

    #[test]
    fn cycle_budget_exhaustion_reports_residual() {
        let opts = PopOptions {
            max_cycles: 3,
            ..PopOptions::default()
        };
        match find_pop(&config_at(1.1), PopMethod::CycleIteration, &opts) {
            Err(PopError::NoConvergence { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > opts.tolerance);
            }
            other => panic!("expected NoConvergence, got {:?}", other.map(|p| p.residual)),
        }
    }
}
