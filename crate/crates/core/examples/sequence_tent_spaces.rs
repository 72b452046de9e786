//! Sequence tent norms on a lattice and the duality pairing.

use tentlab::lattice::build_lattice;
use tentlab::norms::{pairing, seq_tent_norm, Exponent};
use tentlab::{Result, C64};

fn label(e: Exponent) -> String {
    match e {
        Exponent::Finite(x) => x.to_string(),
        Exponent::Infinite => "∞".into(),
    }
}

fn main() -> Result<()> {
    let lattice = build_lattice(1, 0.5, 3.0, 21)?;
    let c: Vec<C64> = lattice.points().iter().map(|a| C64::new(a.defect().powf(0.75), 0.0)).collect();
    let d: Vec<C64> = lattice.points().iter().map(|a| C64::new(0.0, a.defect().powf(0.25))).collect();
    println!("{} lattice points", lattice.len());
    for (p, q) in [
        (Exponent::Finite(2.0), Exponent::Finite(2.0)),
        (Exponent::Finite(1.0), Exponent::Infinite),
        (Exponent::Infinite, Exponent::Finite(2.0)),
    ] {
        let e = seq_tent_norm(&c, &lattice, p, q, 20_000, 22)?;
        println!("‖c‖ in T^{}_{}: {:.5} ± {:.1e}", label(p), label(q), e.value, e.std_error);
    }
    println!("⟨c, d⟩ = {:.5}", pairing(&c, &d, &lattice)?);
    Ok(())
}
