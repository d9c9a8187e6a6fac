//! Overload protection: the shorted-output gain falls above resonance, so
//! pushing the switching frequency up limits the tank current. Runs a step
//! to ten times the rated load and shows the controller override.
//!
//! ```text
//! cargo run --release --example short_circuit
//! ```

use llc_toolkit::control::{run_load_step, ControllerConfig, LoadStepScenario};
use llc_toolkit::design::{design, Series};
use llc_toolkit::gain::short_circuit_gain;
use llc_toolkit::tank::DesignRequirements;

fn main() {
    for fn_ in [1.05, 1.1, 1.2, 1.3, 1.5, 2.0] {
        println!(
            "shorted output, fn {fn_:.2}: Mg = {:.3e}",
            short_circuit_gain(2.05, fn_).unwrap()
        );
    }

    let req = DesignRequirements::reference_48v_to_12v();
    let report = design(&req, 1.83, 2.05, 0.36, Series::E12).unwrap();
    let ctl = ControllerConfig::for_design(&report);
    println!("current limit {:.3} A, ramp {:.0e} Hz/s", ctl.i_limit, ctl.f_shift_rate);
    let scenario = LoadStepScenario::pulse(48.0, 0.5, 5.0, 0.5e-3, 3e-3, 5e-3, ctl).unwrap();
    let run = run_load_step(&report, &scenario).expect("overload scenario runs");

    for s in run.trace.iter().step_by(25) {
        println!(
            "t = {:6.3} ms  vOut = {:7.3} V  |iLr| peak = {:.3} A  fsw = {:7.0} Hz{}",
            s.t * 1e3,
            s.v_out,
            s.i_lr_peak,
            s.fsw,
            if s.overriding { "  override" } else { "" }
        );
    }
    println!(
        "override engaged: {}, highest fsw {:.0} Hz",
        run.report.override_engaged, run.report.fsw_max_seen
    );
}
