//! Builds a δ-lattice of the disc, verifies it and prints it as JSON lines.
//!
//! `cargo run --release --example lattice_dump -- 0.5 2.0 > lattice.jsonl`

use std::io::Write;
use tentlab::lattice::{build_lattice, verify_lattice};
use tentlab::Result;

fn main() -> Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let delta = args.first().copied().unwrap_or(0.5);
    let r_max = args.get(1).copied().unwrap_or(2.0);
    let lattice = build_lattice(1, delta, r_max, 11)?;
    let report = verify_lattice(&lattice, 5000, 12);
    eprintln!(
        "{} points, covering {}, min separation {:.4} (δ/2 = {:.4}), overlap {} ≤ {}",
        lattice.len(),
        report.covering_ok,
        report.min_separation,
        delta / 2.0,
        report.max_overlap,
        lattice.overlap_bound()
    );
    let mut out = std::io::BufWriter::new(std::io::stdout().lock());
    for a in lattice.points() {
        let z = a.coords()[0];
        if writeln!(out, "{{\"re\":{},\"im\":{}}}", z.re, z.im).is_err() {
            break;
        }
    }
    Ok(())
}
