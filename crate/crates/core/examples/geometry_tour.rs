//! Möbius involutions, the Bergman metric, Korányi regions and cap measures.

use tentlab::geometry::{bergman_metric, cap_measure, in_region, involution, BallPoint, RegionSpec, SpherePoint};
use tentlab::{Result, C64};

fn main() -> Result<()> {
    let a = BallPoint::new(vec![C64::new(0.5, 0.2), C64::new(0.0, -0.3)])?;
    let z = BallPoint::new(vec![C64::new(-0.1, 0.4), C64::new(0.6, 0.0)])?;
    let w = BallPoint::real(&[0.3, -0.3])?;

    let back = involution(&a, &involution(&a, &z)?)?;
    println!("φ_a(φ_a(z)) − z = {:.2e}", back.coords().iter().zip(z.coords()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max));

    let before = bergman_metric(&z, &w)?;
    let after = bergman_metric(&involution(&a, &z)?, &involution(&a, &w)?)?;
    println!("β(z, w) = {before:.12}, β(φ_a z, φ_a w) = {after:.12}");

    let xi = SpherePoint::e1(2)?;
    for r in [0.5, 0.9, 0.99] {
        let on_axis = BallPoint::on_ray(&xi, r)?;
        let tilted = BallPoint::real(&[r, 0.5 * (1.0 - r * r)])?;
        let cone = RegionSpec::koranyi(xi.clone(), 2.0);
        let cap = cap_measure(&on_axis, 200_000, 7)?;
        println!(
            "|z| = {r}: on-axis in Γ(ξ) {}, tilted in Γ(ξ) {}, σ(I(z)) = {:.4e} ± {:.1e}, σ/(1−|z|²)² = {:.3}",
            in_region(&on_axis, &cone)?,
            in_region(&tilted, &cone)?,
            cap.value,
            cap.std_error,
            cap.value / (1.0 - r * r).powi(2),
        );
    }
    Ok(())
}
