//! Zero-voltage switching across frequency: below the zero-phase frequency
//! the tank looks capacitive and the switch node is not swung before turn-on.
//!
//! ```text
//! cargo run --release --example zvs_regions
//! ```

use llc_toolkit::design::{design, Series};
use llc_toolkit::gain::{classify_region, zero_phase_frequency};
use llc_toolkit::sim::{Load, SimConfig};
use llc_toolkit::steady_state::{find_pop, PopMethod, PopOptions};
use llc_toolkit::tank::{effective_load, normalize, series_resonance, DesignRequirements};

fn main() {
    let req = DesignRequirements::reference_48v_to_12v();
    let tank = design(&req, 1.83, 2.05, 0.36, Series::E12).unwrap().tank_rounded;
    let f0 = series_resonance(&tank);
    let re = effective_load(tank.n, 24.0);
    let qe = normalize(&tank, re, f0).qe;
    println!(
        "zero-phase frequency at full load: fn = {:.4}",
        zero_phase_frequency(tank.ln(), qe).unwrap()
    );

    for fn_ in [0.55, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.3] {
        let region = classify_region(normalize(&tank, re, fn_ * f0)).unwrap();
        let cfg = SimConfig::new(tank, 48.0, fn_ * f0, Load::Resistance(24.0), 0.0);
        match find_pop(&cfg, PopMethod::Shooting, &PopOptions::default()) {
            Ok(pop) => {
                let hs = pop.zvs.edges.iter().map(|e| {
                    format!(
                        "{:?} {:+.3} A {}",
                        e.switch,
                        e.i_lr,
                        if e.achieved { "ok" } else { "HARD" }
                    )
                });
                println!(
                    "fn {fn_:.2} {region:?}: vOut {:6.3} V  {}",
                    pop.metrics.v_out_mean,
                    hs.collect::<Vec<_>>().join(", ")
                );
            }
            Err(e) => println!("fn {fn_:.2} {region:?}: {e}"),
        }
    }
}
