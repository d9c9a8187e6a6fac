//! Acceptance criteria, one test each. Every test writes a single verdict
//! line to stderr (bypassing output capture) before asserting.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::RngExt;
use proptest::test_runner::TestRunner;

use llc_toolkit::control::{run_load_step, LoadStepScenario};
use llc_toolkit::design::{design, quality_factor, synthesize_tank, DesignReport, Series};
use llc_toolkit::gain::{gain, short_circuit_gain, solve_frequency};
use llc_toolkit::sim::{fha_tank_current, fundamental_component, run_transient, Channel, Load, SimConfig};
use llc_toolkit::steady_state::{find_pop, PopMethod, PopOptions, PopResult};
use llc_toolkit::tank::{series_resonance, DesignRequirements, NormalizedPoint, TankParams};

const N: f64 = 1.83;
const LN: f64 = 2.05;
const QE: f64 = 0.36;
/// Full load: 12 V at 0.5 A.
const RL: f64 = 24.0;

fn verdict(id: u32, name: &str, pass: bool, detail: String, elapsed: Duration) -> bool {
    let line = format!(
        "ACCEPTANCE #{id:<2} {:<4} {name}: {detail} [{:.2} s]\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    pass
}

fn requirements() -> DesignRequirements {
    DesignRequirements::reference_48v_to_12v()
}

fn report() -> DesignReport {
    design(&requirements(), N, LN, QE, Series::E12).unwrap()
}

fn relative(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn c01_component_reproduction() {
    let start = Instant::now();
    let tank = synthesize_tank(&requirements(), N, LN, QE).unwrap();
    let errs = [
        relative(tank.cr, 68e-9),
        relative(tank.lr, 37e-6),
        relative(tank.lm, 75e-6),
    ];
    let elapsed = start.elapsed();
    let worst = errs.iter().copied().fold(0.0, f64::max);
    let pass = worst < 0.10 && elapsed < Duration::from_secs(1);
    let detail = format!(
        "Cr {:.2} nF, Lr {:.3} uH, Lm {:.3} uH; worst deviation {:.2}% (limit 10%)",
        tank.cr * 1e9,
        tank.lr * 1e6,
        tank.lm * 1e6,
        worst * 100.0
    );
    assert!(verdict(1, "component reproduction", pass, detail, elapsed));
}

#[test]
fn c02_unity_at_resonance() {
    let start = Instant::now();
    let mut runner = TestRunner::deterministic();
    let rng = runner.rng();
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let ln = rng.random_range(0.2..20.0);
        let qe = rng.random_range(0.0..5.0);
        let mg = gain(NormalizedPoint::new(ln, qe, 1.0)).unwrap().magnitude;
        worst = worst.max((mg - 1.0).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-12 && elapsed < Duration::from_secs(1);
    let detail = format!("max |Mg(1) - 1| = {worst:.1e} over 10^4 draws (limit 1e-12)");
    assert!(verdict(2, "unity gain at resonance", pass, detail, elapsed));
}

#[test]
fn c03_quality_factor_consistency() {
    let start = Instant::now();
    let tank = TankParams::new(37e-6, 68e-9, 75e-6, N);
    let qe = quality_factor(&tank, 12.0, 0.5);
    let elapsed = start.elapsed();
    let pass = (0.35..=0.37).contains(&qe) && elapsed < Duration::from_secs(1);
    let detail = format!("Qe = {qe:.4} from 37 uH / 68 nF into 24 ohm (range [0.35, 0.37])");
    assert!(verdict(3, "quality factor", pass, detail, elapsed));
}

#[test]
fn c04_regulation_band() {
    let start = Instant::now();
    let r = report();
    let (lo, hi) = r.fsw_band_all_loads.expect("band solves");
    let elapsed = start.elapsed();
    let pass = (lo - 90e3).abs() <= 3e3 && (hi - 110e3).abs() <= 3e3 && elapsed < Duration::from_secs(1);
    let detail = format!(
        "band {:.2} .. {:.2} kHz over 39-48 V and 0-0.5 A (edges 90 / 110 kHz +/- 3 kHz)",
        lo / 1e3,
        hi / 1e3
    );
    assert!(verdict(4, "regulation band", pass, detail, elapsed));
}

/// Settled tank-current fundamental from a run started at the periodic
/// operating point.
fn simulated_fundamental(tank: &TankParams, fsw: f64) -> f64 {
    let cfg = SimConfig::new(*tank, 48.0, fsw, Load::Resistance(RL), 0.0);
    let pop = find_pop(&cfg, PopMethod::Shooting, &PopOptions::default()).unwrap();
    let mut run_cfg = cfg.clone();
    run_cfg.t_end = 6.0 / fsw;
    run_cfg.record = vec![Channel::ILr];
    let run = run_transient(&run_cfg, pop.x0).unwrap();
    fundamental_component(&run.waveform, Channel::ILr, fsw).unwrap().0
}

#[test]
fn c05_fha_time_domain_cross_oracle() {
    let start = Instant::now();
    let tank = synthesize_tank(&requirements(), N, LN, QE).unwrap();
    let f0 = series_resonance(&tank);
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    for fn_ in [1.0, 1.1] {
        let fsw = fn_ * f0;
        let sim = simulated_fundamental(&tank, fsw);
        let fha = fha_tank_current(&tank, 48.0, fsw, RL);
        let err = relative(sim, fha);
        worst = worst.max(err);
        parts.push(format!(
            "fn {fn_}: sim {sim:.4} A vs FHA {fha:.4} A ({:+.1}%)",
            (sim / fha - 1.0) * 100.0
        ));
    }
    let elapsed = start.elapsed();
    let pass = worst < 0.05 && elapsed < Duration::from_secs(60);
    let detail = format!("{} (limit 5%)", parts.join("; "));
    assert!(verdict(5, "FHA / time-domain tank current", pass, detail, elapsed));
}

/// Largest state difference, each relative to its channel's cycle peak.
fn state_distance(a: &PopResult, b: &PopResult) -> f64 {
    let channels = [Channel::ILr, Channel::VCr, Channel::ILm, Channel::VOut];
    let (xa, xb) = (a.x0.vector(), b.x0.vector());
    let (t0, t1) = (a.x0.t, a.x0.t + a.period);
    channels
        .iter()
        .enumerate()
        .map(|(i, &ch)| {
            let (lo, hi) = a.cycle_waveform.min_max(ch, t0, t1).unwrap();
            (xa[i] - xb[i]).abs() / lo.abs().max(hi.abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn c06_c07_periodic_operating_point_and_energy() {
    let start = Instant::now();
    let tank = synthesize_tank(&requirements(), N, LN, QE).unwrap();
    let fn_ = solve_frequency(LN, QE, 0.915).unwrap();
    let cfg = SimConfig::new(tank, 48.0, fn_ * series_resonance(&tank), Load::Resistance(RL), 0.0);
    let opts = PopOptions::default();
    let cycle = find_pop(&cfg, PopMethod::CycleIteration, &opts);
    let shoot = find_pop(&cfg, PopMethod::Shooting, &opts);
    let elapsed = start.elapsed();

    let (cycle, shoot) = match (cycle, shoot) {
        (Ok(c), Ok(s)) => (c, s),
        (c, s) => {
            let detail = format!("no fixed point: cycle {:?}, shooting {:?}", c.err(), s.err());
            verdict(6, "periodic operating point", false, detail.clone(), elapsed);
            verdict(7, "energy balance", false, detail, elapsed);
            panic!("periodic operating point not found");
        }
    };
    let converged = cycle.residual < opts.tolerance && shoot.residual < opts.tolerance;
    let v = shoot.metrics.v_out_mean;
    let v_ok = relative(v, 12.0) <= 0.02;
    let distance = state_distance(&shoot, &cycle);
    let agree = distance <= 10.0 * opts.tolerance;
    let pass6 = converged && v_ok && agree && elapsed < Duration::from_secs(120);
    let detail6 = format!(
        "fn {fn_:.4}: residuals {:.1e} / {:.1e} (tol {:.0e}); vOut mean {v:.4} V ({:+.2}%, limit 12 V +/- 2%); methods differ by {distance:.1e} (limit {:.0e})",
        cycle.residual,
        shoot.residual,
        opts.tolerance,
        (v / 12.0 - 1.0) * 100.0,
        10.0 * opts.tolerance
    );

    let m = shoot.metrics;
    let imbalance = relative(m.p_out, m.p_in);
    let pass7 = imbalance < 5e-3;
    let detail7 = format!(
        "Pin {:.4} W, Pout {:.4} W, imbalance {:.1e} (limit 0.5%)",
        m.p_in, m.p_out, imbalance
    );
    let ok6 = verdict(6, "periodic operating point", pass6, detail6, elapsed);
    let ok7 = verdict(7, "energy balance", pass7, detail7, elapsed);
    assert!(ok6 && ok7);
}

#[test]
fn c08_zvs_classification() {
    let start = Instant::now();
    let tank = synthesize_tank(&requirements(), N, LN, QE).unwrap();
    let f0 = series_resonance(&tank);
    let zvs_at = |fn_: f64| {
        let cfg = SimConfig::new(tank, 48.0, fn_ * f0, Load::Resistance(RL), 0.0);
        find_pop(&cfg, PopMethod::Shooting, &PopOptions::default()).unwrap().zvs
    };
    let (above, below) = (zvs_at(1.1), zvs_at(0.6));
    let elapsed = start.elapsed();
    let pass = above.all_achieved() && below.failures() > 0 && elapsed < Duration::from_secs(60);
    let detail = format!(
        "fn 1.1: {} of {} edges hard; fn 0.6: {} of {} edges hard",
        above.failures(),
        above.edges.len(),
        below.failures(),
        below.edges.len()
    );
    assert!(verdict(8, "ZVS classification", pass, detail, elapsed));
}

#[test]
fn c09_load_step() {
    let start = Instant::now();
    let r = report();
    let mut scenario = LoadStepScenario::reference(&r);
    scenario.sample_interval = Some(1e-5);
    let ctl = scenario.controller;
    let run = run_load_step(&r, &scenario).unwrap();
    let elapsed = start.elapsed();
    let rep = &run.report;
    let recovered = rep.recoveries[1..].iter().all(|x| x.recovery_time.is_some());
    let last_in_band = (rep.v_out_final - 12.0).abs() <= 0.12;
    let in_range = rep.fsw_min_seen >= r.fp.max(ctl.fsw_min) && rep.fsw_max_seen <= (1.3 * r.f0).min(ctl.fsw_max);
    let pass = recovered && last_in_band && in_range && elapsed < Duration::from_secs(180);
    let detail = format!(
        "max deviation {:.4} V, back within 12 V +/- 1% after {}, final {:.4} V; fsw {:.2} .. {:.2} kHz (allowed {:.2} .. {:.2} kHz)",
        rep.max_deviation,
        rep.recoveries[1..]
            .iter()
            .map(|x| x.recovery_time.map_or("never".into(), |t| format!("{:.3} ms", t * 1e3)))
            .collect::<Vec<_>>()
            .join(" / "),
        rep.v_out_final,
        rep.fsw_min_seen / 1e3,
        rep.fsw_max_seen / 1e3,
        r.fp / 1e3,
        1.3 * r.f0 / 1e3
    );
    assert!(verdict(9, "load step", pass, detail, elapsed));
}

#[test]
fn c10_short_circuit_law() {
    let start = Instant::now();
    let grid: Vec<f64> = (1..=1000).map(|k| 1.0 + 4.0 * k as f64 / 1000.0).collect();
    let values: Vec<f64> = grid.iter().map(|&f| short_circuit_gain(LN, f).unwrap()).collect();
    let rises = values.windows(2).filter(|w| w[1] >= w[0]).count();
    let elapsed = start.elapsed();
    let pass = rises == 0 && elapsed < Duration::from_secs(1);
    let detail = format!(
        "{rises} non-decreasing steps on 1000 points over fn (1, 5]; Mg {:.3e} -> {:.3e}",
        values[0], values[999]
    );
    assert!(verdict(10, "short-circuit gain", pass, detail, elapsed));
}

#[test]
fn c11_determinism() {
    let start = Instant::now();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        for mode in ["transient", "pop"] {
            let status = Command::new(env!("CARGO_BIN_EXE_llc"))
                .args(["simulate", "--mode", mode, "--out"])
                .arg(dir.path())
                .env_remove("LLC_OUT")
                .output()
                .unwrap()
                .status;
            assert!(status.success());
        }
    }
    let files = [
        "wave_transient.csv",
        "metrics_transient.json",
        "wave_pop.csv",
        "metrics_pop.json",
    ];
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    let same = files
        .iter()
        .filter(|f| read(dirs[0].path(), f) == read(dirs[1].path(), f))
        .count();
    let bytes: usize = files.iter().map(|f| read(dirs[0].path(), f).len()).sum();
    let elapsed = start.elapsed();
    let detail = format!(
        "{same} of {} output files byte-identical across two runs ({bytes} bytes)",
        files.len()
    );
    assert!(verdict(11, "determinism", same == files.len(), detail, elapsed));
}
