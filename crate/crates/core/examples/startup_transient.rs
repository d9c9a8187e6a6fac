//! Soft start of the reference converter from rest: the switching frequency
//! ramps down from twice the resonance to the operating point.
//!
//! ```text
//! cargo run --release --example startup_transient [out.csv]
//! ```

use std::fs::File;

use llc_toolkit::design::{design, Series};
use llc_toolkit::io::write_waveform_csv;
use llc_toolkit::sim::{run_transient, Load, SimConfig, SimState};
use llc_toolkit::tank::{series_resonance, DesignRequirements};

fn main() {
    let req = DesignRequirements::reference_48v_to_12v();
    let tank = design(&req, 1.83, 2.05, 0.36, Series::E12).unwrap().tank_rounded;
    let fsw = 1.1 * series_resonance(&tank);

    let mut cfg = SimConfig::new(tank, 48.0, fsw, Load::Resistance(24.0), 5e-3);
    cfg.soft_start = Some(2e-3);
    cfg.sample_interval = Some(2e-7);
    let run = run_transient(&cfg, SimState::zero()).expect("reference start-up is well posed");

    for p in run.periods.iter().step_by(50) {
        println!(
            "t = {:6.3} ms  fsw = {:7.0} Hz  vOut = {:7.4} V  |iLr| peak = {:.3} A",
            p.t_start * 1e3,
            p.fsw,
            p.v_out,
            p.i_lr_peak
        );
    }
    println!(
        "{} periods, {} events, {} of {} turn-on edges without ZVS",
        run.periods.len(),
        run.events.len(),
        run.zvs.failures(),
        run.zvs.edges.len()
    );

    if let Some(path) = std::env::args().nth(1) {
        write_waveform_csv(&run.waveform, File::create(&path).unwrap()).unwrap();
        println!("wrote {} samples to {path}", run.waveform.len());
    }
}
