//! Carleson constants and embedding verdicts for weighted volume measures,
//! one parameter point per case of the criterion.

use tentlab::criteria::{carleson_constant, embedding_verdict, inclusion_region, FunctionalOptions};
use tentlab::geometry::BallPoint;
use tentlab::measures::{Atom, MeasureSpec};
use tentlab::norms::TentParams;
use tentlab::Result;

fn main() -> Result<()> {
    let opts = FunctionalOptions::new(4000, 5);
    let volume = carleson_constant(&MeasureSpec::weighted_volume(0.0), 1, &opts)?;
    println!("‖v_0‖_CM: box {:.4}, integral {:.4}", volume.box_constant.value, volume.integral_constant);
    let atoms = MeasureSpec::PointMasses {
        atoms: [0.3, 0.9, 0.99].iter().map(|&r| Atom { point: BallPoint::real(&[r]).unwrap(), mass: 1.0 - r * r }).collect(),
    };
    let c = carleson_constant(&atoms, 1, &opts)?;
    println!("three atoms: box {:.4}, integral {:.4}", c.box_constant.value, c.integral_constant);

    // (p, q, α, t, s, β); μ = v_{β+n} puts A_{μ,s} on HT^t_{s,β}.
    for (p, q, a, t, s, b) in
        [(1.0, 2.0, 0.0, 2.0, 2.0, 2.0), (2.0, 2.0, 0.0, 2.0, 1.0, -1.5), (3.0, 2.0, 0.0, 2.0, 1.0, 0.5), (3.0, 1.0, 0.0, 2.0, 2.0, -0.5)]
    {
        let params = TentParams::new(p, q, s, t, a, b, 1)?;
        let v = embedding_verdict(&MeasureSpec::weighted_volume(b + 1.0), &params, &opts)?;
        println!(
            "(p,q,α,t,s,β) = {:?}: {:?} {} (statistic {:.3e}), inclusion region says {}",
            (p, q, a, t, s, b),
            v.case,
            v.bounded,
            v.functional_value,
            inclusion_region(p, q, a, t, s, b, 1)?
        );
    }
    Ok(())
}
