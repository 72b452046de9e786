//! Truncated case functionals whose limits as `ϱ → 1` decide compactness.

use super::functionals::{decreasing_by, g_sup_over, nu_carleson, u_norm, v_norm, FunctionalOptions};
use super::{case_dispatch, CaseTag};
use crate::error::{ensure, Result};
use crate::measures::MeasureSpec;
use crate::norms::TentParams;
use serde::{Deserialize, Serialize};

/// Behaviour of a truncated statistic as `ϱ → 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    /// Divided by at least 2 at every step (zeros included).
    Decreasing,
    Flat,
    /// Multiplied by at least 2 at every step.
    Growing,
}

impl std::fmt::Display for Trend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Trend::Decreasing => "decreasing",
            Trend::Flat => "flat",
            Trend::Growing => "growing",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactnessReport {
    pub case: CaseTag,
    pub rhos: Vec<f64>,
    /// Case 1: `sup_{|z|>ϱ} G_μ`; Case 2: `‖χ_{(ϱ𝔹ₙ)^c}ν_μ‖_CM`; Cases 3, 4:
    /// `‖U_{μ,ϱ}‖` and `‖V_{μ,ϱ}‖` in `L^{pt/(s(p−t))}(𝕊ₙ)`.
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub trend: Trend,
}

pub(crate) fn trend_of(values: &[f64]) -> Trend {
    if decreasing_by(values, 2.0) {
        Trend::Decreasing
    } else if values.windows(2).all(|w| w[1] > 0.0 && w[1] >= 2.0 * w[0]) {
        Trend::Growing
    } else {
        Trend::Flat
    }
}

/// Dyadic radii `1 − (1−ϱ)2^{−m}` filling the annulus `|z| > ϱ`.
fn annulus_radii(rho: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|m| 1.0 - (1.0 - rho) * 0.5f64.powi(m as i32)).filter(|&r| r < 1.0).collect()
}

/// The truncated case functional at each `ϱ`, with its trend.
pub fn compactness_evaluators(mu: &MeasureSpec, params: &TentParams, rhos: &[f64], opts: &FunctionalOptions) -> Result<CompactnessReport> {
    params.validate()?;
    mu.validate()?;
    opts.validate()?;
    ensure(!rhos.is_empty() && rhos.iter().all(|&r| r > 0.0 && r < 1.0) && rhos.windows(2).all(|w| w[0] < w[1]), || {
        "ϱ values must increase within (0, 1)".into()
    })?;
    let case = case_dispatch(params.p, params.q, params.s, params.t)?;
    let mut values = Vec::with_capacity(rhos.len());
    let mut std_errors = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let (v, se) = match case {
            CaseTag::Case1 => {
                let radii = annulus_radii(rho, 12);
                (g_sup_over(mu, params, opts, &radii)?.value, 0.0)
            }
            CaseTag::Case2 => {
                let c = nu_carleson(mu, params, rho, opts)?.box_constant;
                (c.value, c.std_error)
            }
            CaseTag::Case3 => {
                let u = u_norm(mu, params, rho, opts)?;
                (u.value, u.std_error)
            }
            CaseTag::Case4 => {
                let v = v_norm(mu, params, rho, opts)?;
                (v.value, v.std_error)
            }
        };
        values.push(v);
        std_errors.push(se);
    }
    Ok(CompactnessReport { case, rhos: rhos.to_vec(), trend: trend_of(&values), values, std_errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::compact_inclusion_region;
    use crate::lattice::build_lattice;

    const RHOS: [f64; 3] = [0.9, 0.99, 0.999];

    #[test]
    fn trend_rule() {
        assert_eq!(trend_of(&[8.0, 4.0, 1.0]), Trend::Decreasing);
        assert_eq!(trend_of(&[0.0, 0.0, 0.0]), Trend::Decreasing);
        assert_eq!(trend_of(&[1.0, 2.0, 5.0]), Trend::Growing);
        assert_eq!(trend_of(&[1.0, 1.01, 1.02]), Trend::Flat);
        assert_eq!(trend_of(&[1.0, 0.9, 0.8]), Trend::Flat);
    }

    #[test]
    fn compact_support_gives_zeros() {
        // D(z, r) misses the support once |z| > tanh(atanh 0.5 + r) ≈ 0.78.
        let lattice = build_lattice(1, 0.5, 2.0, 1).unwrap();
        let mu = MeasureSpec::LatticeMasses { lattice, exponent: 1.0, coefficient: 1.0 }.restrict_radial(0.0, 0.5);
        let opts = FunctionalOptions::new(2000, 2);
        for params in [
            TentParams::new(1.0, 2.0, 2.0, 2.0, 0.0, 0.0, 1).unwrap(),
            TentParams::new(2.0, 2.0, 1.0, 2.0, 0.0, 0.0, 1).unwrap(),
            TentParams::new(3.0, 2.0, 1.0, 2.0, 0.0, 0.0, 1).unwrap(),
            TentParams::new(3.0, 1.0, 2.0, 2.0, 0.0, 0.0, 1).unwrap(),
        ] {
            let r = compactness_evaluators(&mu, &params, &RHOS, &opts).unwrap();
            assert!(r.values.iter().all(|&v| v == 0.0), "{r:?}");
            assert_eq!(r.trend, Trend::Decreasing);
        }
    }

    #[test]
    fn volume_inside_compact_region_decreases() {
        let cases = [
            (1.0, 2.0, 0.0, 2.0, 2.0, 2.0),
            (2.0, 2.0, 0.0, 2.0, 1.0, 0.5),
            (3.0, 2.0, 0.0, 2.0, 1.0, 1.0),
            (3.0, 1.0, 0.0, 2.0, 2.0, 3.0),
        ];
        for (p, q, a, t, s, b) in cases {
            assert!(compact_inclusion_region(p, q, a, t, s, b, 1).unwrap());
            let params = TentParams::new(p, q, s, t, a, b, 1).unwrap();
            let mu = MeasureSpec::weighted_volume(b + 1.0);
            let r = compactness_evaluators(&mu, &params, &RHOS, &FunctionalOptions::new(4000, 3)).unwrap();
            assert_eq!(r.trend, Trend::Decreasing, "{:?}: {r:?}", (p, q, a, t, s, b));
        }
    }

    #[test]
    fn equality_case_is_flat() {
        // p < t with equality in the inclusion condition: bounded, not compact.
        let params = TentParams::new(1.0, 2.0, 2.0, 2.0, 0.0, 1.0, 1).unwrap();
        assert!(!compact_inclusion_region(1.0, 2.0, 0.0, 2.0, 2.0, 1.0, 1).unwrap());
        let mu = MeasureSpec::weighted_volume(2.0);
        let r = compactness_evaluators(&mu, &params, &RHOS, &FunctionalOptions::new(1000, 4)).unwrap();
        assert_eq!(r.trend, Trend::Flat, "{r:?}");
    }

    #[test]
    fn rejects_bad_rhos() {
        let params = TentParams::new(1.0, 2.0, 2.0, 2.0, 0.0, 1.0, 1).unwrap();
        let opts = FunctionalOptions::new(1000, 4);
        assert!(compactness_evaluators(&MeasureSpec::zero(), &params, &[0.9, 0.5], &opts).is_err());
        assert!(compactness_evaluators(&MeasureSpec::zero(), &params, &[1.0], &opts).is_err());
    }
}
