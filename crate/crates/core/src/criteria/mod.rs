//! Characterization functionals of the embedding `𝓗𝓣^p_{q,α} → T^t_s(μ)`,
//! their boundedness verdicts, the compactness trends, and the closed-form
//! inclusion and superposition predicates.
//!
//! "Bounded" is decided by boundary refinement: a running supremum (or a
//! truncated norm) is declared finite when each of its last two refinement
//! steps changes it by less than 2×, and infinite when it grows
//! monotonically by at least 10× across the refinement.

mod compactness;
mod discretization;
mod functionals;
mod predicates;
mod verdict;

pub use compactness::{compactness_evaluators, CompactnessReport, Trend};
pub use discretization::{
    discretization_check, eta_sequence, necessity_test, CarlesonDiscretization, ConeComparison, DiscretizationReport, EtaSequence,
    NecessityReport,
};
pub use functionals::{
    carleson_constant, g_functional, g_sup, nu_density, u_functional, u_norm, v_functional, v_norm, vanishing_carleson, CarlesonReport,
    FunctionalOptions, RefinedStatistic, VanishingReport,
};
pub use predicates::{
    bergman_superposition_degree, compact_inclusion_region, inclusion_condition, inclusion_region, monomial_inclusion,
    superposition_degree, InclusionCondition, SuperpositionCase, SuperpositionDegree,
};
pub use verdict::{embedding_verdict, Bounded, Verdict};

use crate::error::{ensure, Result};
use serde::{Deserialize, Serialize};

/// The four parameter regimes of the embedding theorem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseTag {
    /// `p < t`, or `p = t` and `q ≤ s`.
    Case1,
    /// `p = t` and `q > s`.
    Case2,
    /// `p > t` and `q > s`.
    Case3,
    /// `p > t` and `q ≤ s`.
    Case4,
}

/// The regime of `(p, q, s, t)`.
pub fn case_dispatch(p: f64, q: f64, s: f64, t: f64) -> Result<CaseTag> {
    for (name, v) in [("p", p), ("q", q), ("s", s), ("t", t)] {
        ensure(v > 0.0 && v.is_finite(), || format!("{name} = {v} must be positive and finite"))?;
    }
    Ok(if p < t || (p == t && q <= s) {
        CaseTag::Case1
    } else if p == t {
        CaseTag::Case2
    } else if q > s {
        CaseTag::Case3
    } else {
        CaseTag::Case4
    })
}

/// Outcome of the refinement rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Finite,
    Infinite,
    Inconclusive,
}

/// Step factor below which a refinement step counts as stable.
pub const STABLE_STEP: f64 = 2.0;
/// Total monotone growth that counts as divergence.
pub const DIVERGENT_GROWTH: f64 = 10.0;

/// Applies the refinement rule to a sequence of values ordered from the
/// coarsest to the finest refinement.
pub fn refinement_decision(values: &[f64]) -> Decision {
    if values.iter().any(|v| v.is_nan()) {
        return Decision::Inconclusive;
    }
    if values.iter().any(|v| v.is_infinite()) {
        return Decision::Infinite;
    }
    let k = values.len();
    if k >= 2 {
        let monotone = values.windows(2).all(|w| w[1] >= w[0]);
        if monotone && values[0] >= 0.0 && values[k - 1] >= DIVERGENT_GROWTH * values[0] && values[k - 1] > 0.0 {
            return Decision::Infinite;
        }
    }
    if values.iter().all(|&v| v == 0.0) {
        return Decision::Finite;
    }
    if k >= 3 {
        let step = |a: f64, b: f64| {
            if a > 0.0 && b > 0.0 {
                (b / a).max(a / b)
            } else if a == b {
                1.0
            } else {
                f64::INFINITY
            }
        };
        if step(values[k - 3], values[k - 2]) < STABLE_STEP && step(values[k - 2], values[k - 1]) < STABLE_STEP {
            return Decision::Finite;
        }
    }
    Decision::Inconclusive
}

/// Running maxima of a sequence.
pub(crate) fn running_max(values: &[f64]) -> Vec<f64> {
    let mut acc = f64::NEG_INFINITY;
    values
        .iter()
        .map(|&v| {
            acc = if v.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(v) };
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dispatch_examples() {
        assert_eq!(case_dispatch(2.0, 2.0, 1.0, 2.0).unwrap(), CaseTag::Case2);
        assert_eq!(case_dispatch(1.0, 1.0, 1.0, 2.0).unwrap(), CaseTag::Case1);
        assert_eq!(case_dispatch(2.0, 1.0, 2.0, 1.0).unwrap(), CaseTag::Case4);
        assert_eq!(case_dispatch(3.0, 2.0, 1.0, 2.0).unwrap(), CaseTag::Case3);
        assert_eq!(case_dispatch(2.0, 1.0, 1.0, 2.0).unwrap(), CaseTag::Case1);
        assert!(case_dispatch(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn decision_rule() {
        assert_eq!(refinement_decision(&[1.0, 1.5, 1.6, 1.61]), Decision::Finite);
        assert_eq!(refinement_decision(&[1.0, 4.0, 16.0, 64.0]), Decision::Infinite);
        assert_eq!(refinement_decision(&[1.0, 3.0, 1.0, 3.0]), Decision::Inconclusive);
        assert_eq!(refinement_decision(&[0.0, 0.0, 0.0]), Decision::Finite);
        assert_eq!(refinement_decision(&[1.0, f64::INFINITY]), Decision::Infinite);
        assert_eq!(refinement_decision(&[1.0, f64::NAN, 1.0]), Decision::Inconclusive);
    }

    fn predicate(p: f64, q: f64, s: f64, t: f64) -> [bool; 4] {
        [p < t || (p == t && q <= s), p == t && q > s, p > t && q > s, p > t && q <= s]
    }

    proptest! {
        #[test]
        fn dispatch_is_a_partition(
            p in prop_oneof![Just(1.0f64), Just(2.0), 0.1f64..5.0],
            q in prop_oneof![Just(1.0f64), Just(2.0), 0.1f64..5.0],
            s in prop_oneof![Just(1.0f64), Just(2.0), 0.1f64..5.0],
            t in prop_oneof![Just(1.0f64), Just(2.0), 0.1f64..5.0],
        ) {
            let hits = predicate(p, q, s, t);
            prop_assert_eq!(hits.iter().filter(|&&h| h).count(), 1);
            let tag = case_dispatch(p, q, s, t).unwrap();
            let index = [CaseTag::Case1, CaseTag::Case2, CaseTag::Case3, CaseTag::Case4].iter().position(|c| *c == tag).unwrap();
            prop_assert!(hits[index]);
        }
    }
}
