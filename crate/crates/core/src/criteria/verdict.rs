//! Boundedness verdicts for `A_{μ,s} : 𝓗𝓣^p_{q,α} → L^t(𝕊ₙ)`.

use super::functionals::{g_sup, nu_carleson, u_norm, v_norm, CarlesonReport, FunctionalOptions, RefinedStatistic};
use super::{case_dispatch, CaseTag, Decision};
use crate::error::Result;
use crate::measures::{MeasureSpec, MuHat};
use crate::norms::TentParams;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// `true`, `false` or `"inconclusive"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bounded {
    Yes,
    No,
    Inconclusive,
}

impl Serialize for Bounded {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bounded::Yes => s.serialize_bool(true),
            Bounded::No => s.serialize_bool(false),
            Bounded::Inconclusive => s.serialize_str("inconclusive"),
        }
    }
}

impl<'de> Deserialize<'de> for Bounded {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Bounded, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Bool(true) => Ok(Bounded::Yes),
            serde_json::Value::Bool(false) => Ok(Bounded::No),
            serde_json::Value::String(s) if s == "inconclusive" => Ok(Bounded::Inconclusive),
            other => Err(serde::de::Error::custom(format!("expected a boolean or \"inconclusive\", got {other}"))),
        }
    }
}

impl std::fmt::Display for Bounded {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Bounded::Yes => "bounded",
            Bounded::No => "unbounded",
            Bounded::Inconclusive => "inconclusive",
        })
    }
}

/// Relative standard error above which a finite statistic is not trusted.
pub(crate) const DECISION_MARGIN: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub bounded: Bounded,
    pub functional_value: f64,
    pub std_error: f64,
    pub case: CaseTag,
    /// The case statistic with its refinement sequence.
    pub statistic: RefinedStatistic,
    /// Both Carleson statistics of `ν_μ` (Case 2 only).
    pub carleson: Option<CarlesonReport>,
}

pub(crate) fn decide(stat: &RefinedStatistic) -> Bounded {
    match stat.decision {
        Decision::Infinite => Bounded::No,
        Decision::Inconclusive => Bounded::Inconclusive,
        Decision::Finite if stat.diverged || stat.std_error > DECISION_MARGIN * stat.value => Bounded::Inconclusive,
        Decision::Finite => Bounded::Yes,
    }
}

/// Dispatches on the case of `(p, q, s, t)` and decides whether the case
/// functional is finite: `sup G_μ`, `‖ν_μ‖_CM`, `‖U_μ‖_{L^L}` or `‖V_μ‖_{L^L}`
/// with `L = pt/(s(p−t))`.
pub fn embedding_verdict(mu: &MeasureSpec, params: &TentParams, opts: &FunctionalOptions) -> Result<Verdict> {
    params.validate()?;
    mu.validate()?;
    opts.validate()?;
    let case = case_dispatch(params.p, params.q, params.s, params.t)?;
    if MuHat::new(mu, params.n, params.r, params.alpha)?.is_zero() {
        let statistic = RefinedStatistic::zero(&opts.radii);
        return Ok(Verdict { bounded: Bounded::Yes, functional_value: 0.0, std_error: 0.0, case, statistic, carleson: None });
    }
    let (statistic, carleson) = match case {
        CaseTag::Case1 => (g_sup(mu, params, opts)?, None),
        CaseTag::Case2 => {
            let report = nu_carleson(mu, params, 0.0, opts)?;
            (report.box_constant.clone(), Some(report))
        }
        CaseTag::Case3 => (u_norm(mu, params, 0.0, opts)?, None),
        CaseTag::Case4 => (v_norm(mu, params, 0.0, opts)?, None),
    };
    Ok(Verdict {
        bounded: decide(&statistic),
        functional_value: statistic.value,
        std_error: statistic.std_error,
        case,
        statistic,
        carleson,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::inclusion_region;

    fn volume_verdict(p: f64, q: f64, alpha: f64, t: f64, s: f64, beta: f64) -> Verdict {
        let params = TentParams::new(p, q, s, t, alpha, beta, 1).unwrap();
        let mu = MeasureSpec::weighted_volume(beta + 1.0);
        embedding_verdict(&mu, &params, &FunctionalOptions::new(4000, 11)).unwrap()
    }

    #[test]
    fn zero_measure_is_bounded() {
        let params = TentParams::new(3.0, 2.0, 1.0, 2.0, 0.0, 0.0, 1).unwrap();
        let v = embedding_verdict(&MeasureSpec::zero(), &params, &FunctionalOptions::new(1000, 1)).unwrap();
        assert_eq!(v.bounded, Bounded::Yes);
        assert_eq!(v.functional_value, 0.0);
        assert_eq!(v.case, CaseTag::Case3);
    }

    #[test]
    fn bounded_serializes_as_bool_or_string() {
        assert_eq!(serde_json::to_string(&Bounded::Yes).unwrap(), "true");
        assert_eq!(serde_json::to_string(&Bounded::Inconclusive).unwrap(), "\"inconclusive\"");
        let back: Bounded = serde_json::from_str("false").unwrap();
        assert_eq!(back, Bounded::No);
        assert!(serde_json::from_str::<Bounded>("1").is_err());
    }

    #[test]
    fn agrees_with_the_inclusion_region_in_each_case() {
        // (p, q, α, t, s, β) pairs strictly inside and strictly outside.
        let cases = [
            ((1.0, 2.0, 0.0, 2.0, 2.0, 2.0), true),
            ((1.0, 2.0, 0.0, 2.0, 2.0, -0.5), false),
            ((2.0, 2.0, 0.0, 2.0, 1.0, 0.0), true),
            ((2.0, 2.0, 0.0, 2.0, 1.0, -1.5), false),
            ((3.0, 2.0, 0.0, 2.0, 1.0, 0.5), true),
            ((3.0, 2.0, 0.0, 2.0, 1.0, -1.7), false),
            ((3.0, 1.0, 0.0, 2.0, 2.0, 2.5), true),
            ((3.0, 1.0, 0.0, 2.0, 2.0, -0.5), false),
        ];
        for ((p, q, a, t, s, b), inside) in cases {
            assert_eq!(inclusion_region(p, q, a, t, s, b, 1).unwrap(), inside, "{:?}", (p, q, a, t, s, b));
            let v = volume_verdict(p, q, a, t, s, b);
            let want = if inside { Bounded::Yes } else { Bounded::No };
            assert_eq!(v.bounded, want, "{:?}: {:?}", (p, q, a, t, s, b), v.statistic);
        }
    }
}
