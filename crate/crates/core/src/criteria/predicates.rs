//! Closed-form inclusion and superposition predicates.
//!
//! Each input is read as the shortest decimal that round-trips to it and
//! converted to an exact rational, so equality cases such as
//! `0.1 + 2 = 2.6 − 0.5` are decided as written.

use crate::error::{ensure, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

type Q = BigRational;

fn rat(x: f64) -> Q {
    let text = format!("{x}");
    let (sign, digits) = match text.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, text.as_str()),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    let numer: BigInt = format!("{whole}{frac}").parse().expect("decimal digits");
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    Q::new(numer * sign, denom)
}

fn int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

fn check(p: f64, qq: f64, alpha: f64, t: f64, s: f64, beta: f64, n: usize) -> Result<()> {
    for (name, v) in [("p", p), ("q", qq), ("t", t), ("s", s)] {
        ensure(v > 0.0 && v.is_finite(), || format!("{name} = {v} must be positive and finite"))?;
    }
    ensure(n >= 1, || "n must be at least 1".into())?;
    let floor = -(n as f64) - 1.0;
    ensure(alpha > floor && alpha.is_finite(), || format!("α = {alpha} must exceed −n−1"))?;
    ensure(beta > floor && beta.is_finite(), || format!("β = {beta} must exceed −n−1"))
}

/// Exact parameters of a pair of Hardy type tent spaces `𝓗𝓣^p_{q,α}`,
/// `𝓗𝓣^t_{s,β}`.
#[derive(Clone, Debug)]
struct Pair {
    p: Q,
    q: Q,
    t: Q,
    s: Q,
    a: Q,
    b: Q,
    n: Q,
}

impl Pair {
    fn new(p: f64, qq: f64, alpha: f64, t: f64, s: f64, beta: f64, n: usize) -> Result<Pair> {
        check(p, qq, alpha, t, s, beta, n)?;
        let nn = int(n as i64);
        Ok(Pair { p: rat(p), q: rat(qq), t: rat(t), s: rat(s), a: &nn + Q::one() + rat(alpha), b: &nn + Q::one() + rat(beta), n: nn })
    }

    /// The target space scaled to `𝓗𝓣^{Nt}_{Ns,β}`.
    fn scaled_target(&self, degree: u64) -> Pair {
        let d = int(degree as i64);
        Pair { t: &self.t * &d, s: &self.s * &d, ..self.clone() }
    }

    fn inclusion(&self) -> Option<InclusionCondition> {
        let lhs = &self.a / &self.q;
        let rhs = &self.b / &self.s;
        if self.p >= self.t {
            if self.q > self.s && lhs < rhs {
                return Some(InclusionCondition::I);
            }
            if self.q <= self.s && lhs <= rhs {
                return Some(InclusionCondition::II);
            }
            None
        } else {
            (lhs + &self.n / &self.p <= rhs + &self.n / &self.t).then_some(InclusionCondition::III)
        }
    }

    fn compact(&self) -> bool {
        let lhs = &self.a / &self.q;
        let rhs = &self.b / &self.s;
        if self.p >= self.t {
            lhs < rhs
        } else {
            lhs + &self.n / &self.p < rhs + &self.n / &self.t
        }
    }
}

/// Which condition of the inclusion criterion holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InclusionCondition {
    /// `p ≥ t`, `q > s`, `(n+1+α)/q < (n+1+β)/s`.
    I,
    /// `p ≥ t`, `q ≤ s`, `(n+1+α)/q ≤ (n+1+β)/s`.
    II,
    /// `p < t`, `(n+1+α)/q + n/p ≤ (n+1+β)/s + n/t`.
    III,
}

/// The condition under which `𝓗𝓣^p_{q,α} ⊂ 𝓗𝓣^t_{s,β}` holds, or `None`.
pub fn inclusion_condition(p: f64, q: f64, alpha: f64, t: f64, s: f64, beta: f64, n: usize) -> Result<Option<InclusionCondition>> {
    Ok(Pair::new(p, q, alpha, t, s, beta, n)?.inclusion())
}

/// Whether `𝓗𝓣^p_{q,α} ⊂ 𝓗𝓣^t_{s,β}`.
pub fn inclusion_region(p: f64, q: f64, alpha: f64, t: f64, s: f64, beta: f64, n: usize) -> Result<bool> {
    Ok(inclusion_condition(p, q, alpha, t, s, beta, n)?.is_some())
}

/// Whether the inclusion `𝓗𝓣^p_{q,α} ⊂ 𝓗𝓣^t_{s,β}` is compact.
pub fn compact_inclusion_region(p: f64, q: f64, alpha: f64, t: f64, s: f64, beta: f64, n: usize) -> Result<bool> {
    Ok(Pair::new(p, q, alpha, t, s, beta, n)?.compact())
}

/// Whether `𝓗𝓣^p_{q,α} ⊂ 𝓗𝓣^{Nt}_{Ns,β}`, the inclusion equivalent to
/// `u ↦ u^N` mapping `𝓗𝓣^p_{q,α}` into `𝓗𝓣^t_{s,β}`.
#[allow(clippy::too_many_arguments)]
pub fn monomial_inclusion(p: f64, q: f64, alpha: f64, t: f64, s: f64, beta: f64, n: usize, degree: u64) -> Result<bool> {
    let pair = Pair::new(p, q, alpha, t, s, beta, n)?;
    Ok(degree == 0 || pair.scaled_target(degree).inclusion().is_some())
}

/// Regime of the superposition criterion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuperpositionCase {
    /// `p(n+1+α)/q < t(n+1+β)/s`.
    I,
    /// `p(n+1+α)/q ≥ t(n+1+β)/s` and `α ≤ β`.
    II,
    /// `p(n+1+α)/q ≥ t(n+1+β)/s` and `α > β` (strict bound).
    III,
}

/// Largest degree of a polynomial `φ` for which `S_φ` maps one space into
/// the other.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionDegree {
    pub max_degree: u64,
    /// Whether the bound on `N` is strict.
    pub strict: bool,
    pub case: SuperpositionCase,
    /// The bound on `N`, rounded to `f64`.
    pub bound: f64,
}

/// Degree bound for `S_φ : 𝓗𝓣^p_{q,α} → 𝓗𝓣^t_{s,β}`.
pub fn superposition_degree(p: f64, q: f64, alpha: f64, t: f64, s: f64, beta: f64, n: usize) -> Result<SuperpositionDegree> {
    Ok(degree_bound(&Pair::new(p, q, alpha, t, s, beta, n)?))
}

fn degree_bound(x: &Pair) -> SuperpositionDegree {
    let (case, bound, strict) = if &x.p * &x.a / &x.q < &x.t * &x.b / &x.s {
        let num = &x.p * &x.q * (&x.t * &x.b + &x.n * &x.s);
        let den = &x.s * &x.t * (&x.p * &x.a + &x.n * &x.q);
        (SuperpositionCase::I, num / den, false)
    } else {
        let bound = &x.q * &x.b / (&x.s * &x.a);
        if x.a <= x.b {
            (SuperpositionCase::II, bound, false)
        } else {
            (SuperpositionCase::III, bound, true)
        }
    };
    SuperpositionDegree { max_degree: largest_degree(&bound, strict), strict, case, bound: bound.to_f64().unwrap_or(f64::NAN) }
}

/// Largest integer `N ≥ 0` with `N ≤ bound`, or `N < bound` when strict.
fn largest_degree(bound: &Q, strict: bool) -> u64 {
    if !bound.is_positive() {
        return 0;
    }
    let floor = bound.floor();
    let mut n = floor.to_integer();
    if strict && floor == *bound {
        n -= BigInt::one();
    }
    if n < BigInt::zero() {
        0
    } else {
        n.to_u64().unwrap_or(u64::MAX)
    }
}

/// Degree bound for `S_φ : A^p_α → A^q_β`, `α, β > −1`, through
/// `A^p_α = 𝓗𝓣^p_{p,α−n}`.
pub fn bergman_superposition_degree(p: f64, alpha: f64, q: f64, beta: f64, n: usize) -> Result<SuperpositionDegree> {
    ensure(alpha > -1.0 && beta > -1.0, || format!("Bergman weights need α, β > −1, got {alpha}, {beta}"))?;
    let mut pair = Pair::new(p, p, 0.0, q, q, 0.0, n)?;
    pair.a = Q::one() + rat(alpha);
    pair.b = Q::one() + rat(beta);
    Ok(degree_bound(&pair))
}
