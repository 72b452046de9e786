//! The Forelli–Rudin integral against its closed-form size along a radius.

use tentlab::geometry::BallPoint;
use tentlab::norms::forelli_rudin_check;
use tentlab::{Result, C64};

fn main() -> Result<()> {
    for r in [0.0, 0.5, 0.8, 0.9, 0.95] {
        let u = BallPoint::new(vec![C64::from_polar(r, 0.3)])?;
        let z = BallPoint::new(vec![C64::from_polar(r, 0.3 + 0.2 * r)])?;
        let rep = forelli_rudin_check(&u, &z, 0.0, 1.6, 1.6, 100_000, 8)?;
        println!(
            "|u| = |z| = {r}: integral {:.4e} ± {:.1e}, bound {:.4e}, ratio {:.4}",
            rep.integral.value, rep.integral.std_error, rep.bound, rep.ratio
        );
    }
    Ok(())
}
