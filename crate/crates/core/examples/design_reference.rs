//! Synthesizes the 48 V to 12 V reference tank, snaps it to preferred values
//! and checks the regulation band.
//!
//! ```text
//! cargo run --example design_reference [e12|e24|none]
//! ```

use llc_toolkit::design::{design, Series};
use llc_toolkit::tank::DesignRequirements;

fn main() {
    let series: Series = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("series is e12, e24 or none"))
        .unwrap_or(Series::E12);
    let req = DesignRequirements::reference_48v_to_12v();
    let r = design(&req, 1.83, 2.05, 0.36, series).expect("reference inputs are valid");

    let show = |label: &str, t: &llc_toolkit::tank::TankParams| {
        println!(
            "{label:<8} Cr = {:7.3} nF  Lr = {:7.3} uH  Lm = {:7.3} uH",
            t.cr * 1e9,
            t.lr * 1e6,
            t.lm * 1e6
        );
    };
    show("exact", &r.tank);
    show(&format!("{series:?}"), &r.tank_rounded);
    println!("f0 = {:.1} Hz, fp = {:.1} Hz, Qe = {:.4}", r.f0, r.fp, r.qe);
    println!(
        "gain window [{:.4}, {:.4}], no-load asymptote {:.4}",
        r.band.mg_min, r.band.mg_max, r.band.mg_inf
    );
    if let Some(p) = r.peak {
        println!("full-load peak Mg = {:.4} at fn = {:.4}", p.mg, p.fn_);
    }
    if let Some((lo, hi)) = r.fsw_band {
        println!("full-load band {:.0} .. {:.0} Hz", lo, hi);
    }
    if let Some((lo, hi)) = r.fsw_band_all_loads {
        println!("all loads      {:.0} .. {:.0} Hz", lo, hi);
    }
    println!("feasible: {}", r.feasible);
    for w in &r.warnings {
        println!("warning: {w}");
    }
}
