//! The command layer without the binary: loads the shipped reference config
//! and writes the design files into a directory.
//!
//! ```text
//! cargo run --example cli_pipeline [out_dir]
//! ```

use std::path::{Path, PathBuf};

use llc_toolkit::io::{cmd_design, cmd_solve, load_config, SolveRequest};

fn main() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/reference.json");
    let cfg = load_config(&config).expect("shipped config parses");
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("llc-example"));
    std::fs::create_dir_all(&out).unwrap();

    let design = cmd_design(&cfg, None, &out).expect("design writes");
    print!("{}", design.message);
    for f in &design.files {
        println!("  {}", f.display());
    }
    let solve = SolveRequest {
        target_vout: None,
        vin: None,
        iout: None,
    };
    print!("{}", cmd_solve(&cfg, solve, false).unwrap().message);
}
