//! ASCII phase diagram of the inclusion HT^2_{2,0} ⊂ HT^t_{s,β} over (s, t).

use tentlab::criteria::{compact_inclusion_region, inclusion_region};
use tentlab::Result;

fn main() -> Result<()> {
    let (p, q, alpha, n) = (2.0, 2.0, 0.0, 1);
    for beta in [-0.5, 0.0, 1.0] {
        println!("β = {beta}   (# compact, + bounded, . none; s → right, t ↓)");
        for i in 0..16 {
            let t = 4.0 - 3.5 * i as f64 / 15.0;
            let row: String = (0..32)
                .map(|j| {
                    let s = 0.5 + 3.5 * j as f64 / 31.0;
                    match (compact_inclusion_region(p, q, alpha, t, s, beta, n), inclusion_region(p, q, alpha, t, s, beta, n)) {
                        (Ok(true), _) => '#',
                        (_, Ok(true)) => '+',
                        _ => '.',
                    }
                })
                .collect();
            println!("  t={t:4.2} {row}");
        }
    }
    Ok(())
}
