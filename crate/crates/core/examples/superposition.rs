//! Largest polynomial degree of a superposition operator, with the
//! monomial inclusions that decide it.

use tentlab::criteria::{bergman_superposition_degree, monomial_inclusion, superposition_degree};
use tentlab::Result;

fn main() -> Result<()> {
    for (p, q, a, t, s, b) in [(2.0, 1.0, 0.0, 1.0, 1.0, 0.0), (4.0, 2.0, 0.0, 1.0, 1.0, 0.0), (3.0, 2.0, 1.0, 1.0, 2.0, 0.0)] {
        let d = superposition_degree(p, q, a, t, s, b, 1)?;
        let table: Vec<String> = (1..=6).map(|k| format!("{k}:{}", monomial_inclusion(p, q, a, t, s, b, 1, k).unwrap())).collect();
        println!(
            "(p,q,α,t,s,β) = {:?}: max N = {} (case {:?}, bound {:.4}{}); {}",
            (p, q, a, t, s, b),
            d.max_degree,
            d.case,
            d.bound,
            if d.strict { ", strict" } else { "" },
            table.join(" ")
        );
    }
    let d = bergman_superposition_degree(2.0, 0.0, 1.0, 0.0, 1)?;
    println!("A^2_0 → A^1_0: max N = {} (bound {})", d.max_degree, d.bound);
    Ok(())
}
