//! Periodic steady state of the reference design by cycle iteration and by
//! shooting, compared with the first-harmonic estimate.
//!
//! Without an argument the frequency is the first-harmonic solution for the
//! nominal 48 V input. Near `fn = 1` cycle iteration contracts slowly and may
//! run out of cycles; shooting does not.
//!
//! ```text
//! cargo run --release --example periodic_operating_point [fn]
//! ```

use std::time::Instant;

use llc_toolkit::design::{design, Series};
use llc_toolkit::gain::solve_frequency;
use llc_toolkit::sim::{fha_tank_current, Load, SimConfig};
use llc_toolkit::steady_state::{find_pop, PopMethod, PopOptions};
use llc_toolkit::tank::{series_resonance, DesignRequirements};

fn main() {
    let req = DesignRequirements::reference_48v_to_12v();
    let report = design(&req, 1.83, 2.05, 0.36, Series::E12).unwrap();
    let tank = report.tank_rounded;
    let fn_: f64 = match std::env::args().nth(1) {
        Some(s) => s.parse().expect("fn is a number"),
        None => solve_frequency(report.ln, report.qe, report.band.mg_min).unwrap(),
    };
    println!("fn = {fn_:.5}");
    let fsw = fn_ * series_resonance(&tank);
    let cfg = SimConfig::new(tank, 48.0, fsw, Load::Resistance(24.0), 0.0);

    let mut x0 = None;
    for method in [PopMethod::CycleIteration, PopMethod::Shooting] {
        let started = Instant::now();
        let pop = match find_pop(&cfg, method, &PopOptions::default()) {
            Ok(pop) => pop,
            Err(e) => {
                println!("{method:?}: {e}");
                continue;
            }
        };
        let m = pop.metrics;
        println!(
            "{method:?}: {} iterations, residual {:.1e}, {:?}",
            pop.iterations,
            pop.residual,
            started.elapsed()
        );
        println!(
            "  vOut {:.4} V (ripple {:.2} mV), iLr rms {:.4} A, peak {:.4} A, Pin {:.3} W, Pout {:.3} W, ZVS {}",
            m.v_out_mean,
            m.v_out_ripple_pp * 1e3,
            m.i_lr_rms,
            m.i_lr_peak,
            m.p_in,
            m.p_out,
            m.zvs_all_edges
        );
        let v = pop.x0.vector();
        if let Some(prev) = x0.replace(v) {
            let diff: Vec<String> = v.iter().zip(prev).map(|(a, b)| format!("{:.1e}", a - b)).collect();
            println!("  start-state difference to cycle iteration: [{}]", diff.join(", "));
        }
    }
    println!(
        "first-harmonic tank current amplitude {:.4} A (rms {:.4} A)",
        fha_tank_current(&tank, 48.0, fsw, 24.0),
        fha_tank_current(&tank, 48.0, fsw, 24.0) / 2f64.sqrt()
    );
}
