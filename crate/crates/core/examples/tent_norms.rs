//! Tent norms of a polynomial and of the kernels f_a: the direct estimator,
//! the area-operator route, and the Bergman norm at p = q.

use tentlab::functions::HoloFunction;
use tentlab::geometry::BallPoint;
use tentlab::measures::MeasureSpec;
use tentlab::norms::{area_operator_lt_norm, bergman_norm, tent_norm};
use tentlab::Result;

fn main() -> Result<()> {
    let mu = MeasureSpec::weighted_volume(1.0);
    let f = HoloFunction::Polynomial { terms: vec![(vec![0], [1.0, 0.0]), (vec![3], [0.0, 2.0])] };

    let direct = tent_norm(&f, &mu, 2.0, 2.0, 2.0, 200_000, 1)?;
    let area = area_operator_lt_norm(&f, &mu, 2.0, 2.0, 2.0, 256, 256_000, 2)?;
    let bergman = bergman_norm(&f, 2.0, 1.0, 1, 200_000, 3)?;
    println!("polynomial: tent {:.5} ± {:.1e}, area route {:.5} ± {:.1e}", direct.value, direct.std_error, area.value, area.std_error);
    println!("            A^2_1 {:.5}, tent/bergman {:.4}", bergman.value, direct.value / bergman.value);

    println!("f_a in HT^1_(2,0), θ = 2:");
    for r in [0.0, 0.5, 0.9, 0.99, 0.999] {
        let fa = HoloFunction::kernel_fa(BallPoint::real(&[r])?, 2.0, 1.0, 2.0, 0.0);
        let e = tent_norm(&fa, &MeasureSpec::weighted_volume(1.0), 1.0, 2.0, 2.0, 100_000, 4)?;
        println!("  |a| = {r:<6} ‖f_a‖ = {:.5} ± {:.1e}", e.value, e.std_error);
    }
    Ok(())
}
