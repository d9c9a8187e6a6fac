//! Switching frequency needed for a given output on the reference design,
//! across input voltage and load.
//!
//! ```text
//! cargo run --example solve_operating_point
//! ```

use llc_toolkit::io::{solve_operating_point, ProjectConfig, SolveRequest};

fn main() {
    let cfg = ProjectConfig::reference();
    println!(
        "{:>6} {:>6} {:>11} {:>8} {:>8}  region",
        "vin", "iout", "fsw (Hz)", "fn", "Mg"
    );
    for vin in [39.0, 44.0, 48.0] {
        for iout in [0.05, 0.25, 0.5] {
            let req = SolveRequest {
                target_vout: Some(12.0),
                vin: Some(vin),
                iout: Some(iout),
            };
            match solve_operating_point(&cfg, req) {
                Ok(s) => println!(
                    "{vin:>6.1} {iout:>6.2} {:>11.1} {:>8.4} {:>8.4}  {:?}",
                    s.fsw, s.fn_, s.mg, s.region
                ),
                Err(e) => println!("{vin:>6.1} {iout:>6.2}  {e}"),
            }
        }
    }

    let too_much = SolveRequest {
        target_vout: Some(30.0),
        vin: Some(48.0),
        iout: Some(3.0),
    };
    if let Err(e) = solve_operating_point(&cfg, too_much) {
        println!("30 V at 3 A: {e} (exit code {})", e.exit_code());
    }
}
