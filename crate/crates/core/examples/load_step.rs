//! Closed-loop load step: 500 mA with a 10 ms step to 700 mA, regulated by
//! switching-frequency modulation.
//!
//! ```text
//! cargo run --release --example load_step
//! ```

use llc_toolkit::control::{run_load_step, LoadStepScenario};
use llc_toolkit::design::{design, Series};
use llc_toolkit::tank::DesignRequirements;

fn main() {
    let req = DesignRequirements::reference_48v_to_12v();
    let report = design(&req, 1.83, 2.05, 0.36, Series::E12).unwrap();
    let mut scenario = LoadStepScenario::reference(&report);
    scenario.sample_interval = Some(1e-6);

    let run = run_load_step(&report, &scenario).expect("reference scenario runs");
    for s in run.trace.iter().step_by(100) {
        println!(
            "t = {:7.3} ms  vOut = {:7.4} V  fsw = {:8.0} Hz  |iLr| peak = {:.3} A",
            s.t * 1e3,
            s.v_out,
            s.fsw,
            s.i_lr_peak
        );
    }
    let r = &run.report;
    println!(
        "start at {:.0} Hz, range seen {:.0} .. {:.0} Hz",
        r.fsw_start, r.fsw_min_seen, r.fsw_max_seen
    );
    for rec in &r.recoveries {
        println!(
            "change at {:.1} ms: max deviation {:.1} mV, within 1% after {}, within 0.2% after {}",
            rec.t_change * 1e3,
            rec.max_deviation * 1e3,
            fmt_time(rec.recovery_time),
            fmt_time(rec.settling_time)
        );
    }
    println!(
        "final vOut {:.4} V, {} edges without ZVS",
        r.v_out_final, r.zvs_failures
    );
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or("never".into(), |t| format!("{:.3} ms", t * 1e3))
}
