//! Truncated case functionals as ϱ → 1, inside and on the edge of the
//! compact inclusion region.

use tentlab::criteria::{compact_inclusion_region, compactness_evaluators, FunctionalOptions};
use tentlab::measures::MeasureSpec;
use tentlab::norms::TentParams;
use tentlab::Result;

fn main() -> Result<()> {
    let rhos = [0.9, 0.99, 0.999];
    let opts = FunctionalOptions::new(4000, 3);
    for (p, q, a, t, s, b) in
        [(1.0, 2.0, 0.0, 2.0, 2.0, 2.0), (1.0, 2.0, 0.0, 2.0, 2.0, 1.0), (2.0, 2.0, 0.0, 2.0, 1.0, 0.5), (3.0, 2.0, 0.0, 2.0, 1.0, 1.0)]
    {
        let params = TentParams::new(p, q, s, t, a, b, 1)?;
        let r = compactness_evaluators(&MeasureSpec::weighted_volume(b + 1.0), &params, &rhos, &opts)?;
        println!(
            "{:?} {:?}: values {:?} → {} (compact region: {})",
            (p, q, a, t, s, b),
            r.case,
            r.values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
            r.trend,
            compact_inclusion_region(p, q, a, t, s, b, 1)?
        );
    }
    Ok(())
}
