//! Voltage-gain curves of the reference tank for a few load levels, plus the
//! peak, the zero-phase boundary and the shorted-output curve.
//!
//! ```text
//! cargo run --example gain_curves
//! ```

use llc_toolkit::gain::{
    gain_curve, high_frequency_asymptote, noload_pole, peak_gain, short_circuit_gain, zero_phase_frequency,
};

fn main() {
    let ln = 2.05;
    let qes = [0.0, 0.18, 0.36, 0.72, 1.44];
    let probes = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.5, 2.0, 3.0];

    print!("{:>6}", "fn");
    for qe in qes {
        print!("{:>10}", format!("Qe={qe}"));
    }
    println!("{:>10}", "short");
    for fn_ in probes {
        print!("{fn_:>6.2}");
        for qe in qes {
            let c = gain_curve(ln, qe, fn_, fn_ * 1.0001, 2).unwrap();
            let p = c.points[0];
            if p.pole {
                print!("{:>10}", "pole");
            } else {
                print!("{:>10.4}", p.magnitude);
            }
        }
        match short_circuit_gain(ln, fn_) {
            Ok(g) => println!("{g:>10.2e}"),
            Err(_) => println!("{:>10}", "-"),
        }
    }

    println!();
    println!("no-load pole at fn = {:.4}", noload_pole(ln));
    println!("high-frequency asymptote Mg = {:.4}", high_frequency_asymptote(ln));
    for qe in &qes[1..] {
        let (fp, mg) = peak_gain(ln, *qe).unwrap();
        let z = zero_phase_frequency(ln, *qe).unwrap();
        println!("Qe = {qe:<5} peak Mg = {mg:.4} at fn = {fp:.4}, inductive above fn = {z:.4}");
    }
}
