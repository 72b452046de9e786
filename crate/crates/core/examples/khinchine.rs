//! Rademacher averages on the dyadic grid against the ℓ² norm.

use tentlab::functions::{khinchine_ratio, rademacher};
use tentlab::{Result, C64};

fn main() -> Result<()> {
    println!("r_1..r_4 at τ = 0.3: {:?}", (1..=4).map(|k| rademacher(k, 0.3)).collect::<Vec<_>>());
    let c: Vec<C64> = (1..=8).map(|k| C64::new(1.0 / k as f64, 0.5 / k as f64)).collect();
    for p in [0.5, 1.0, 2.0, 3.0, 4.0] {
        println!("p = {p}: (avg |Σ c_k r_k|^p)^(1/p) / ‖c‖₂ = {:.6}", khinchine_ratio(&c, p, 8)?);
    }
    println!("p = 4, c = (1, 1): {}", khinchine_ratio(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)], 4.0, 2)?);
    Ok(())
}
