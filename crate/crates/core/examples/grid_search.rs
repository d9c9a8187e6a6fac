//! Picks the inductance ratio and quality factor from a grid: the narrowest
//! full-load frequency band among designs with 20% gain headroom.
//!
//! ```text
//! cargo run --release --example grid_search
//! ```

use llc_toolkit::design::{choose_turns_ratio, design, linear_grid, search_design, Centering, Series};
use llc_toolkit::tank::DesignRequirements;

fn main() {
    let req = DesignRequirements::reference_48v_to_12v();
    let n = choose_turns_ratio(&req, Centering::AtResonance);
    println!("turns ratio for unity gain at nominal input: {n:.4}");

    let ln_grid = linear_grid(1.5, 8.0, 27);
    let qe_grid = linear_grid(0.1, 1.0, 19);
    let result = search_design(&req, n, &ln_grid, &qe_grid);
    let feasible = result.candidates.iter().filter(|c| c.feasible).count();
    println!("{} of {} grid points feasible", feasible, result.candidates.len());

    let Some(best) = result.best else {
        println!("no candidate with enough headroom");
        return;
    };
    println!(
        "best: Ln = {:.3}, Qe = {:.3}, band {:.0} Hz, headroom {:.1}%",
        best.ln,
        best.qe,
        best.band_width,
        best.headroom * 100.0
    );
    let r = design(&req, n, best.ln, best.qe, Series::E12).unwrap();
    println!(
        "tank (E12): Cr = {:.1} nF, Lr = {:.2} uH, Lm = {:.2} uH",
        r.tank_rounded.cr * 1e9,
        r.tank_rounded.lr * 1e6,
        r.tank_rounded.lm * 1e6
    );
}
