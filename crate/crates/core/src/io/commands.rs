use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::config::{ConfigError, ProjectConfig, ResolvedDesign};
use super::csv::write_waveform_csv;
use super::svg::{LogPlot, Series as PlotSeries};
use crate::control::{run_load_step, ControllerConfig, LoadStepReport, LoadStepScenario};
use crate::design::{check_feasibility_with, design, DesignError, DesignReport, Series};
use crate::gain::{
    classify_region, gain, gain_curve, log_grid, noload_pole, samples_for_span, short_circuit_gain, solve_frequency,
    GainError, Region, SAMPLES_PER_DECADE,
};
use crate::sim::{run_transient, Load, LoadProfile, LoadStep, SimConfig, SimState, Waveform};
use crate::steady_state::{find_pop, PopError, PopMethod, PopMetrics, PopOptions};
use crate::tank::{effective_load, load_resistance, series_resonance, NormalizedPoint, TankParams};

pub const ENV_OUT: &str = "LLC_OUT";
/// Default transient length (s).
pub const DEFAULT_T_END: f64 = 5e-3;
/// Default spacing of recorded samples for long runs (s).
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 2e-7;
const GAIN_FN_RANGE: (f64, f64) = (0.3, 3.0);
const GAIN_QE_FACTORS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("design is not feasible: {0}")]
    Infeasible(String),
    #[error("operating point unreachable: {0}")]
    Unreachable(String),
    #[error("numerical failure{}: {message}", .t.map(|t| format!(" at t = {t:e} s")).unwrap_or_default())]
    Numerical { message: String, t: Option<f64> },
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => 1,
            CliError::Infeasible(_) | CliError::Unreachable(_) => 2,
            CliError::Numerical { .. } => 3,
        }
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        CliError::Config(ConfigError::Invalid(e.to_string()))
    }
}

impl From<PopError> for CliError {
    fn from(e: PopError) -> Self {
        let t = match &e {
            PopError::Sim(s) => s.time(),
            _ => None,
        };
        CliError::Numerical {
            message: e.to_string(),
            t,
        }
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    /// Text for standard output.
    pub message: String,
    pub files: Vec<PathBuf>,
}

/// `--out`, then the config's `output_dir`, then `$LLC_OUT`, then `.`.
pub fn output_dir(cli: Option<&Path>, cfg: &ProjectConfig) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(ENV_OUT).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_file(dir: &Path, name: &str, contents: &[u8], files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let path = dir.join(name);
    let err = |source| CliError::Output {
        path: path.display().to_string(),
        source,
    };
    fs::create_dir_all(dir).map_err(err)?;
    fs::write(&path, contents).map_err(err)?;
    files.push(path);
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s.into_bytes()
}

fn waveform_csv(w: &Waveform) -> Vec<u8> {
    let mut buf = Vec::new();
    write_waveform_csv(w, &mut buf).expect("writing to memory");
    buf
}

/// Design report for the config, using `series` over the config's choice.
pub fn build_report(cfg: &ProjectConfig, series: Option<Series>) -> Result<DesignReport, CliError> {
    let series = series.or(cfg.series).unwrap_or(Series::E12);
    let report = match cfg.resolve_design()? {
        ResolvedDesign::Normalized { n, ln, qe } => design(&cfg.requirements, n, ln, qe, series)?,
        ResolvedDesign::Tank(t) => check_feasibility_with(&t, &cfg.requirements, t.n, series)?,
    };
    Ok(report)
}

#[derive(Serialize)]
struct DesignDocument<'a> {
    schema_version: u32,
    #[serde(flatten)]
    report: &'a DesignReport,
}

fn trim_number(v: f64) -> String {
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Gain curves for the design's `Ln` at multiples of its full-load `Qe`,
/// plus the shorted-output curve. Returns `(labels, fn grid, columns)`.
pub fn design_gain_curves(report: &DesignReport) -> (Vec<String>, Vec<f64>, Vec<Vec<f64>>) {
    let (lo, hi) = GAIN_FN_RANGE;
    let samples = samples_for_span(lo, hi, SAMPLES_PER_DECADE);
    let grid = log_grid(lo, hi, samples);
    let mut labels = Vec::new();
    let mut columns = Vec::new();
    for k in GAIN_QE_FACTORS {
        let qe = k * report.qe;
        labels.push(format!("qe_{}", trim_number(qe)));
        let curve = gain_curve(report.ln, qe, lo, hi, samples).expect("valid grid");
        columns.push(curve.points.iter().map(|p| p.magnitude).collect());
    }
    labels.push("short_circuit".into());
    columns.push(
        grid.iter()
            .map(|&f| short_circuit_gain(report.ln, f).unwrap_or(f64::INFINITY))
            .collect(),
    );
    (labels, grid, columns)
}

/// `llc design`: writes `design.json`, `gain_curves.csv`, `gain_curves.svg`.
pub fn cmd_design(cfg: &ProjectConfig, series: Option<Series>, out: &Path) -> Result<Outcome, CliError> {
    let report = build_report(cfg, series)?;
    let mut files = Vec::new();
    let doc = DesignDocument {
        schema_version: super::config::SCHEMA_VERSION,
        report: &report,
    };
    write_file(out, "design.json", &to_json(&doc), &mut files)?;

    let (labels, grid, columns) = design_gain_curves(&report);
    let mut csv = String::from("fn");
    for l in &labels {
        csv.push(',');
        csv.push_str(l);
    }
    csv.push('\n');
    for (i, f) in grid.iter().enumerate() {
        csv.push_str(&f.to_string());
        for c in &columns {
            csv.push(',');
            csv.push_str(&c[i].to_string());
        }
        csv.push('\n');
    }
    write_file(out, "gain_curves.csv", csv.as_bytes(), &mut files)?;

    let point_sets: Vec<Vec<(f64, f64)>> = columns
        .iter()
        .map(|c| grid.iter().copied().zip(c.iter().copied()).collect())
        .collect();
    let plot = LogPlot {
        title: &format!("Gain curves, Ln = {}", trim_number(report.ln)),
        x_label: "normalized frequency fn",
        y_label: "gain Mg",
        x_range: GAIN_FN_RANGE,
        y_range: (0.0, 3.0),
        series: labels
            .iter()
            .zip(&point_sets)
            .map(|(l, p)| PlotSeries { label: l, points: p })
            .collect(),
        levels: vec![
            (
                report.band.mg_max,
                format!("Mg_max {}", trim_number(report.band.mg_max)),
            ),
            (
                report.band.mg_min,
                format!("Mg_min {}", trim_number(report.band.mg_min)),
            ),
        ],
    };
    write_file(out, "gain_curves.svg", plot.render().as_bytes(), &mut files)?;

    let t = &report.tank_rounded;
    let mut message = format!(
        "n = {:.4}, Ln = {:.4}, Qe = {:.4}\nCr = {:.2} nF, Lr = {:.3} uH, Lm = {:.3} uH ({:?})\n",
        report.n,
        report.ln,
        report.qe,
        t.cr * 1e9,
        t.lr * 1e6,
        t.lm * 1e6,
        report.series
    );
    if let Some((a, b)) = report.fsw_band {
        message.push_str(&format!("regulation band {:.2} .. {:.2} kHz\n", a / 1e3, b / 1e3));
    }
    for w in &report.warnings {
        message.push_str(&format!("warning: {w}\n"));
    }
    message.push_str(if report.feasible {
        "feasible\n"
    } else {
        "NOT feasible\n"
    });
    Ok(Outcome {
        exit_code: if report.feasible { 0 } else { 2 },
        message,
        files,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    Transient,
    Pop,
    Step,
}

impl SimMode {
    pub fn name(self) -> &'static str {
        match self {
            SimMode::Transient => "transient",
            SimMode::Pop => "pop",
            SimMode::Step => "step",
        }
    }
}

impl std::str::FromStr for SimMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transient" => Ok(SimMode::Transient),
            "pop" => Ok(SimMode::Pop),
            "step" => Ok(SimMode::Step),
            other => Err(format!("unknown mode `{other}` (expected transient, pop or step)")),
        }
    }
}

fn qe_for(tank: &TankParams, load: Load, vout: f64) -> f64 {
    let rl = match load {
        Load::Resistance(r) => r,
        Load::Current(i) => load_resistance(vout, i),
    };
    let re = effective_load(tank.n, rl);
    if re.is_finite() {
        tank.characteristic_impedance() / re
    } else {
        0.0
    }
}

/// Frequency from the config, or the first-harmonic solution for the
/// nominal output at the initial load.
pub fn operating_frequency(cfg: &ProjectConfig, tank: &TankParams, load: Load) -> Result<f64, CliError> {
    if let Some(f) = cfg.sim.fsw {
        return Ok(f);
    }
    let vout = cfg.requirements.vout_nom;
    let mg = 2.0 * tank.n * vout / cfg.vin();
    let fn_ =
        solve_frequency(tank.ln(), qe_for(tank, load, vout), mg).map_err(|e| CliError::Unreachable(e.to_string()))?;
    Ok(fn_ * series_resonance(tank))
}

#[derive(Serialize)]
struct TransientMetrics {
    mode: &'static str,
    vin: f64,
    fsw: f64,
    t_end: f64,
    samples: usize,
    periods: usize,
    events: usize,
    v_out_final: f64,
    i_lr_peak: f64,
    zvs_edges: usize,
    zvs_failures: usize,
}

#[derive(Serialize)]
struct PopSummary {
    mode: &'static str,
    method: PopMethod,
    vin: f64,
    fsw: f64,
    #[serde(rename = "fn")]
    fn_: f64,
    residual: f64,
    iterations: usize,
    x0: [f64; 4],
    metrics: PopMetrics,
    zvs_failures: usize,
}

#[derive(Serialize)]
struct StepSummary<'a> {
    mode: &'static str,
    vin: f64,
    controller: ControllerConfig,
    load: &'a LoadProfile,
    report: &'a LoadStepReport,
}

fn numerical(e: impl std::fmt::Display, t: Option<f64>) -> CliError {
    CliError::Numerical {
        message: e.to_string(),
        t,
    }
}

/// `llc simulate`: writes `wave_<mode>.csv` and `metrics_<mode>.json`.
pub fn cmd_simulate(
    cfg: &ProjectConfig,
    mode: SimMode,
    scenario: Option<Vec<LoadStep>>,
    out: &Path,
) -> Result<Outcome, CliError> {
    let report = build_report(cfg, None)?;
    let tank = report.tank_rounded;
    let vin = cfg.vin();
    let mut files = Vec::new();
    let (waveform, metrics, message) = match mode {
        SimMode::Transient => {
            let load = cfg.load_profile();
            let fsw = operating_frequency(cfg, &tank, load.at(0.0))?;
            let t_end = cfg.sim.t_end.unwrap_or(DEFAULT_T_END);
            let mut sc = SimConfig::new(tank, vin, fsw, load.at(0.0), t_end);
            sc.load = load;
            sc.soft_start = match cfg.sim.soft_start {
                Some(r) if r <= 0.0 => None,
                Some(r) => Some(r),
                None => Some(crate::sim::DEFAULT_SOFT_START),
            };
            sc.dt_max = cfg.sim.dt_max;
            sc.sample_interval = Some(cfg.sim.sample_interval.unwrap_or(DEFAULT_SAMPLE_INTERVAL));
            let run = run_transient(&sc, SimState::zero()).map_err(|e| numerical(&e, e.time()))?;
            let m = TransientMetrics {
                mode: "transient",
                vin,
                fsw,
                t_end,
                samples: run.waveform.len(),
                periods: run.periods.len(),
                events: run.events.len(),
                v_out_final: run.final_state.v_out,
                i_lr_peak: run.periods.iter().map(|p| p.i_lr_peak).fold(0.0, f64::max),
                zvs_edges: run.zvs.edges.len(),
                zvs_failures: run.zvs.failures(),
            };
            let msg = format!(
                "transient {:.3} ms at {:.2} kHz: vOut(end) = {:.4} V, {} ZVS failures\n",
                t_end * 1e3,
                fsw / 1e3,
                m.v_out_final,
                m.zvs_failures
            );
            (run.waveform, to_json(&m), msg)
        }
        SimMode::Pop => {
            let load = cfg.load_profile();
            let fsw = operating_frequency(cfg, &tank, load.at(0.0))?;
            let mut sc = SimConfig::new(tank, vin, fsw, load.at(0.0), 0.0);
            sc.load = load;
            sc.dt_max = cfg.sim.dt_max;
            let method = cfg.sim.method.unwrap_or(PopMethod::Shooting);
            let pop = find_pop(&sc, method, &PopOptions::default())?;
            let m = PopSummary {
                mode: "pop",
                method,
                vin,
                fsw,
                fn_: fsw / series_resonance(&tank),
                residual: pop.residual,
                iterations: pop.iterations,
                x0: pop.x0.vector(),
                metrics: pop.metrics,
                zvs_failures: pop.zvs.failures(),
            };
            let msg = format!(
                "POP at {:.2} kHz: vOut mean {:.4} V, ripple {:.4} V, iLr rms {:.4} A, ZVS {}\n",
                fsw / 1e3,
                pop.metrics.v_out_mean,
                pop.metrics.v_out_ripple_pp,
                pop.metrics.i_lr_rms,
                if pop.metrics.zvs_all_edges {
                    "on all edges"
                } else {
                    "lost"
                }
            );
            (pop.cycle_waveform, to_json(&m), msg)
        }
        SimMode::Step => {
            if !report.feasible {
                return Err(CliError::Infeasible(report.warnings.join("; ")));
            }
            let controller = cfg.controller.unwrap_or_else(|| ControllerConfig::for_design(&report));
            let mut sc = LoadStepScenario::reference(&report);
            sc.controller = controller;
            sc.vin = vin;
            if let Some(s) = &cfg.scenario {
                sc.load = s.load_profile()?;
                sc.t_end = s.t_end;
                sc.vin = s.vin.unwrap_or(vin);
            }
            if let Some(steps) = scenario {
                sc.load = LoadProfile::new(steps).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            }
            sc.sample_interval = Some(cfg.sim.sample_interval.unwrap_or(DEFAULT_SAMPLE_INTERVAL));
            let run = run_load_step(&report, &sc).map_err(|e| {
                let t = e.time();
                numerical(e, t)
            })?;
            let m = StepSummary {
                mode: "step",
                vin: sc.vin,
                controller: sc.controller,
                load: &sc.load,
                report: &run.report,
            };
            let r = &run.report;
            let mut msg = format!(
                "load step: max deviation {:.4} V, fsw {:.2} .. {:.2} kHz{}\n",
                r.max_deviation,
                r.fsw_min_seen / 1e3,
                r.fsw_max_seen / 1e3,
                if r.override_engaged {
                    ", current override engaged"
                } else {
                    ""
                }
            );
            for rec in &r.recoveries {
                msg.push_str(&format!(
                    "  change at {:.3} ms: deviation {:.4} V, recovery {}\n",
                    rec.t_change * 1e3,
                    rec.max_deviation,
                    rec.recovery_time
                        .map_or("not reached".to_string(), |t| format!("{:.3} ms", t * 1e3))
                ));
            }
            (run.waveform, to_json(&m), msg)
        }
    };
    write_file(
        out,
        &format!("wave_{}.csv", mode.name()),
        &waveform_csv(&waveform),
        &mut files,
    )?;
    write_file(out, &format!("metrics_{}.json", mode.name()), &metrics, &mut files)?;
    Ok(Outcome {
        exit_code: 0,
        message,
        files,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveRequest {
    pub target_vout: Option<f64>,
    pub vin: Option<f64>,
    pub iout: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveResult {
    pub fsw: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub mg: f64,
    pub qe: f64,
    pub f0: f64,
    pub region: Region,
}

/// First-harmonic switching frequency for an output target on the design's
/// rounded tank.
pub fn solve_operating_point(cfg: &ProjectConfig, req: SolveRequest) -> Result<SolveResult, CliError> {
    let report = build_report(cfg, None)?;
    let tank = report.tank_rounded;
    let r = &cfg.requirements;
    let vout = req.target_vout.unwrap_or(r.vout_nom);
    let vin = req.vin.unwrap_or(r.vin_nom);
    let iout = req.iout.unwrap_or(r.iout_max);
    let mut mg = 2.0 * tank.n * vout / vin;
    if (mg - 1.0).abs() <= 4.0 * f64::EPSILON {
        // unity requested up to rounding of n·Vout/Vin
        mg = 1.0;
    }
    let qe = qe_for(&tank, Load::Current(iout), vout);
    let fn_ = solve_frequency(tank.ln(), qe, mg).map_err(|e| match e {
        GainError::Unreachable { target, peak, fn_peak } => CliError::Unreachable(format!(
            "gain {target:.4} needed, peak gain is {peak:.4} at fn = {fn_peak:.4}"
        )),
        other => CliError::Unreachable(other.to_string()),
    })?;
    let region = if qe > 0.0 {
        classify_region(NormalizedPoint::new(tank.ln(), qe, fn_)).map_err(|e| numerical(e, None))?
    } else if fn_ > noload_pole(tank.ln()) {
        Region::Inductive
    } else {
        Region::Capacitive
    };
    let f0 = series_resonance(&tank);
    Ok(SolveResult {
        fsw: fn_ * f0,
        fn_,
        mg,
        qe,
        f0,
        region,
    })
}

/// `llc solve`: prints the solved frequency and its region.
pub fn cmd_solve(cfg: &ProjectConfig, req: SolveRequest, json: bool) -> Result<Outcome, CliError> {
    let s = solve_operating_point(cfg, req)?;
    let message = if json {
        String::from_utf8(to_json(&s)).expect("json is utf-8")
    } else {
        format!(
            "fsw = {:.1} Hz (fn = {:.6}, Mg = {:.6}, Qe = {:.4}), region {:?}\n",
            s.fsw, s.fn_, s.mg, s.qe, s.region
        )
    };
    Ok(Outcome {
        exit_code: 0,
        message,
        files: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRequest {
    pub fn_lo: f64,
    pub fn_hi: f64,
    pub points: usize,
}

impl Default for SweepRequest {
    fn default() -> Self {
        Self {
            fn_lo: 0.8,
            fn_hi: 1.3,
            points: 11,
        }
    }
}

/// `llc sweep`: periodic operating points over a frequency grid next to the
/// first-harmonic prediction, written to `sweep.csv`.
pub fn cmd_sweep(cfg: &ProjectConfig, req: SweepRequest, out: &Path) -> Result<Outcome, CliError> {
    if !(req.fn_lo > 0.0 && req.fn_lo <= req.fn_hi && req.points >= 1) {
        return Err(ConfigError::Invalid("sweep needs 0 < from <= to and at least one point".into()).into());
    }
    let report = build_report(cfg, None)?;
    let tank = report.tank_rounded;
    let vin = cfg.vin();
    let load = cfg.load_profile().at(0.0);
    let f0 = series_resonance(&tank);
    let qe = qe_for(&tank, load, cfg.requirements.vout_nom);
    let grid = crate::design::linear_grid(req.fn_lo, req.fn_hi, req.points);
    let rows: Vec<String> = grid
        .par_iter()
        .map(|&fn_| {
            let fsw = fn_ * f0;
            let mg = gain(NormalizedPoint::new(tank.ln(), qe, fn_)).map_or(f64::NAN, |g| g.magnitude);
            let v_fha = mg * vin / (2.0 * tank.n);
            let cfg = SimConfig::new(tank, vin, fsw, load, 0.0);
            match find_pop(&cfg, PopMethod::Shooting, &PopOptions::default()) {
                Ok(p) => {
                    let m = p.metrics;
                    format!(
                        "{fn_},{fsw},{mg},{v_fha},{},{},{},{},{},{},{},ok",
                        m.v_out_mean, m.v_out_ripple_pp, m.i_lr_rms, m.i_lr_peak, m.zvs_all_edges, m.p_in, m.p_out
                    )
                }
                Err(e) => format!("{fn_},{fsw},{mg},{v_fha},,,,,,,,{}", e.to_string().replace(',', ";")),
            }
        })
        .collect();
    let failed = rows.iter().filter(|r| !r.ends_with(",ok")).count();
    let mut csv = String::from(
        "fn,fsw,mg_fha,v_out_fha,v_out_mean,v_out_ripple_pp,i_lr_rms,i_lr_peak,zvs_all_edges,p_in,p_out,status\n",
    );
    for r in rows {
        csv.push_str(&r);
        csv.push('\n');
    }
    let mut files = Vec::new();
    write_file(out, "sweep.csv", csv.as_bytes(), &mut files)?;
    if failed > 0 {
        return Err(numerical(
            format!("{failed} of {} sweep points failed (see sweep.csv)", grid.len()),
            None,
        ));
    }
    Ok(Outcome {
        exit_code: 0,
        message: format!("{} operating points written\n", grid.len()),
        files,
    })
}
