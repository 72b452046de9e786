//! Symbolic holomorphic functions on 𝔹ⁿ.
//!
//! Kernel powers `(1 − w)^{−e}` use the principal branch
//! `exp(−e·Log(1 − w))`, which is single valued because `Re(1 − w) > 0`
//! whenever `|w| < 1`.

use crate::error::{ensure, Error, Result};
use crate::geometry::{dot, BallPoint, SpherePoint};
use crate::lattice::Lattice;
use crate::C64;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Lattice kernel sum `S^θ_Z(λ)(z) = Σ λ_k (1−|a_k|²)^θ/(1−⟨z,a_k⟩)^{θ+(n+1+α)/q}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSumSpec {
    pub lattice: Lattice,
    pub lambda: Vec<C64>,
    pub theta: f64,
    pub alpha: f64,
    pub q: f64,
}

impl LatticeSumSpec {
    /// Exponent `θ + (n+1+α)/q` of the kernels.
    pub fn exponent(&self) -> f64 {
        self.theta + (self.lattice.n() as f64 + 1.0 + self.alpha) / self.q
    }
}

/// Where a function concentrates: near `point`, at boundary distance
/// comparable to `scale` (0 for a boundary singularity).
#[derive(Clone, Debug, PartialEq)]
pub struct Focus {
    pub point: SpherePoint,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum HoloFunction {
    /// `Σ c_m z^m` with terms `[[m₁, …, mₙ], [re, im]]`.
    Polynomial {
        terms: Vec<(Vec<u32>, [f64; 2])>,
    },
    /// `f_a(z) = (1−|a|²)^θ/(1−⟨z,a⟩)^exponent`.
    KernelPowerFa {
        a: BallPoint,
        theta: f64,
        exponent: f64,
    },
    /// `g_ζ(z) = (1−⟨z,ζ⟩)^{−θ}`.
    BoundaryKernelG {
        zeta: SpherePoint,
        theta: f64,
    },
    LatticeSum(LatticeSumSpec),
    /// `F_τ = Σ λ_k r_{k+1}(τ) f_k`: lattice index `k` (from 0) carries the
    /// Rademacher function `r_{k+1}`.
    RademacherSum {
        sum: LatticeSumSpec,
        tau: f64,
    },
    /// `φ ∘ f` with `φ(u) = Σ outer[j] u^j`.
    Composed {
        outer: Vec<C64>,
        inner: Box<HoloFunction>,
    },
}

impl HoloFunction {
    pub fn constant(n: usize, c: C64) -> HoloFunction {
        HoloFunction::Polynomial { terms: vec![(vec![0; n], [c.re, c.im])] }
    }

    /// `f_a` with the exponent `θ + (n+1+α)/q + n/p` of the test family.
    pub fn kernel_fa(a: BallPoint, theta: f64, p: f64, q: f64, alpha: f64) -> HoloFunction {
        let n = a.n() as f64;
        HoloFunction::KernelPowerFa { a, theta, exponent: theta + (n + 1.0 + alpha) / q + n / p }
    }

    pub fn boundary_kernel(zeta: SpherePoint, theta: f64) -> HoloFunction {
        HoloFunction::BoundaryKernelG { zeta, theta }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            HoloFunction::Polynomial { terms } => terms.first().map(|t| t.0.len()),
            HoloFunction::KernelPowerFa { a, .. } => Some(a.n()),
            HoloFunction::BoundaryKernelG { zeta, .. } => Some(zeta.n()),
            HoloFunction::LatticeSum(s) | HoloFunction::RademacherSum { sum: s, .. } => Some(s.lattice.n()),
            HoloFunction::Composed { inner, .. } => inner.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            HoloFunction::Polynomial { terms } => {
                let n = terms.first().map(|t| t.0.len());
                ensure(terms.iter().all(|t| Some(t.0.len()) == n), || "polynomial multi-indices must share one length".into())?;
                ensure(n != Some(0), || "polynomial multi-indices need n ≥ 1 entries".into())?;
                ensure(terms.iter().all(|t| t.1[0].is_finite() && t.1[1].is_finite()), || "polynomial coefficients must be finite".into())
            }
            HoloFunction::KernelPowerFa { theta, exponent, .. } => {
                ensure(*theta > 0.0, || format!("θ = {theta} must be positive"))?;
                ensure(exponent.is_finite(), || "exponent must be finite".into())
            }
            HoloFunction::BoundaryKernelG { theta, .. } => ensure(*theta > 0.0, || format!("θ = {theta} must be positive")),
            HoloFunction::LatticeSum(s) => validate_sum(s),
            HoloFunction::RademacherSum { sum, tau } => {
                ensure((0.0..1.0).contains(tau), || format!("τ = {tau} must lie in [0, 1)"))?;
                validate_sum(sum)
            }
            HoloFunction::Composed { inner, .. } => inner.validate(),
        }
    }

    /// Boundary point the function concentrates at, if any.
    pub fn focus(&self) -> Option<Focus> {
        match self {
            HoloFunction::KernelPowerFa { a, .. } => (a.norm() > 0.0)
                .then(|| Focus { point: SpherePoint::from_raw(a.coords().iter().map(|c| c / a.norm()).collect()), scale: a.defect() }),
            HoloFunction::BoundaryKernelG { zeta, .. } => Some(Focus { point: zeta.clone(), scale: 0.0 }),
            HoloFunction::Composed { inner, .. } => inner.focus(),
            _ => None,
        }
    }

    /// Evaluation without overflow checks.
    pub(crate) fn eval_raw(&self, z: &[C64]) -> C64 {
        match self {
            HoloFunction::Polynomial { terms } => terms
                .iter()
                .map(|(m, c)| {
                    let mono: C64 = z.iter().zip(m).map(|(zi, &e)| zi.powu(e)).product();
                    C64::new(c[0], c[1]) * mono
                })
                .sum(),
            HoloFunction::KernelPowerFa { a, theta, exponent } => {
                let w = dot(z, a.coords());
                a.defect().powf(*theta) * kernel_power(w, *exponent)
            }
            HoloFunction::BoundaryKernelG { zeta, theta } => kernel_power(dot(z, zeta.coords()), *theta),
            HoloFunction::LatticeSum(s) => lattice_sum(s, z, |_| 1.0),
            HoloFunction::RademacherSum { sum, tau } => lattice_sum(sum, z, |k| rademacher(k as u32 + 1, *tau)),
            HoloFunction::Composed { outer, inner } => {
                let u = inner.eval_raw(z);
                outer.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * u + c)
            }
        }
    }
}

fn validate_sum(s: &LatticeSumSpec) -> Result<()> {
    ensure(s.lambda.len() == s.lattice.len(), || format!("{} coefficients for {} lattice points", s.lambda.len(), s.lattice.len()))?;
    ensure(s.theta > 0.0, || format!("θ = {} must be positive", s.theta))?;
    ensure(s.q > 0.0, || format!("q = {} must be positive", s.q))
}

/// `(1 − w)^{−e}` on the principal branch.
pub(crate) fn kernel_power(w: C64, e: f64) -> C64 {
    (-(C64::new(1.0, 0.0) - w).ln() * e).exp()
}

fn lattice_sum(s: &LatticeSumSpec, z: &[C64], sign: impl Fn(usize) -> f64) -> C64 {
    let e = s.exponent();
    s.lattice
        .points()
        .iter()
        .zip(&s.lambda)
        .enumerate()
        .filter(|(_, (_, l))| !l.is_zero())
        .map(|(k, (a, l))| l * sign(k) * a.defect().powf(s.theta) * kernel_power(dot(z, a.coords()), e))
        .sum()
}

/// `f(z)`, failing with [`Error::Overflow`] when the value is not finite.
pub fn evaluate(f: &HoloFunction, z: &BallPoint) -> Result<C64> {
    if let Some(n) = f.dim() {
        if n != z.n() {
            return Err(Error::Dimension { expected: n, got: z.n() });
        }
    }
    let v = f.eval_raw(z.coords());
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!("function value at {:?}", z.coords())))
    }
}

/// `S_φ f = φ ∘ f` for a polynomial `φ(u) = Σ phi[j] u^j`.
pub fn superpose(phi: &[C64], f: HoloFunction) -> HoloFunction {
    HoloFunction::Composed { outer: phi.to_vec(), inner: Box::new(f) }
}

/// `u ↦ u^N`.
pub fn monomial_power(degree: usize) -> Vec<C64> {
    let mut c = vec![C64::new(0.0, 0.0); degree + 1];
    c[degree] = C64::new(1.0, 0.0);
    c
}

/// Rademacher function `r_k(τ) = sign sin(2^k π τ)`, with `+1` at zeros.
///
/// `sin(2^k πτ) < 0` exactly when the fractional part of `2^{k−1}τ` lies in
/// `(1/2, 1)`; multiplying by a power of two is exact in floating point.
pub fn rademacher(k: u32, tau: f64) -> f64 {
    let x = tau * 2f64.powi(k as i32 - 1);
    if x - x.floor() > 0.5 {
        -1.0
    } else {
        1.0
    }
}

/// Dyadic grid `τ_m = (2m+1)/2^{K+2}`, `m < 2^{K+1}`, on which averages of
/// products of `r_1, …, r_K` are exact.
pub fn dyadic_grid(k: u32) -> Vec<f64> {
    let denom = 2f64.powi(k as i32 + 2);
    (0..(1u64 << (k + 1))).map(|m| (2 * m + 1) as f64 / denom).collect()
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite coefficient")
}

/// `avg_τ |Σ_k c_k r_k(τ)|^p / (Σ|c_k|²)^{p/2}` over the dyadic grid of
/// order `k_max` (`c.len() ≤ k_max ≤ 16`).
///
/// Even integer `p` is evaluated in exact rational arithmetic.
pub fn khinchine_ratio(c: &[C64], p: f64, k_max: u32) -> Result<f64> {
    ensure(k_max <= 16, || format!("K = {k_max} exceeds 16"))?;
    ensure(c.len() <= k_max as usize, || format!("{} coefficients exceed K = {k_max}", c.len()))?;
    ensure(p > 0.0, || format!("p = {p} must be positive"))?;
    let l2: f64 = c.iter().map(|x| x.norm_sqr()).sum();
    if l2 == 0.0 {
        return Ok(0.0);
    }
    // Sign patterns on the grid with their multiplicities.
    let grid = dyadic_grid(k_max);
    let mut patterns: BTreeMap<Vec<bool>, u64> = BTreeMap::new();
    for &tau in &grid {
        let key: Vec<bool> = (1..=c.len() as u32).map(|k| rademacher(k, tau) < 0.0).collect();
        *patterns.entry(key).or_default() += 1;
    }
    let total = grid.len() as u64;
    if p.fract() == 0.0 && (p as u64).is_multiple_of(2) && p <= 64.0 {
        let half = (p as u64 / 2) as usize;
        let cs: Vec<(BigRational, BigRational)> = c.iter().map(|x| (rational(x.re), rational(x.im))).collect();
        let mut acc = BigRational::zero();
        for (signs, count) in &patterns {
            let mut re = BigRational::zero();
            let mut im = BigRational::zero();
            for ((cr, ci), &neg) in cs.iter().zip(signs) {
                if neg {
                    re -= cr;
                    im -= ci;
                } else {
                    re += cr;
                    im += ci;
                }
            }
            let m2 = &re * &re + &im * &im;
            acc += num_traits::pow(m2, half) * BigRational::from_integer(BigInt::from(*count));
        }
        let norm2: BigRational = cs.iter().fold(BigRational::zero(), |s, (a, b)| s + a * a + b * b);
        let ratio = acc / (num_traits::pow(norm2, half) * BigRational::from_integer(BigInt::from(total)));
        return ratio.to_f64().ok_or_else(|| Error::Internal("ratio out of range".into()));
    }
    let mut acc = 0.0;
    for (signs, count) in &patterns {
        let s: C64 = c.iter().zip(signs).map(|(x, &neg)| if neg { -x } else { *x }).sum();
        acc += s.norm().powf(p) * *count as f64;
    }
    Ok(acc / total as f64 / l2.powf(p / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::involution_raw;
    use crate::rng::{stream, tag};
    use crate::sampling::uniform_sphere;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn constant_polynomial() {
        let f = HoloFunction::constant(2, C64::new(1.0, 0.0));
        let z = BallPoint::new(vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.5)]).unwrap();
        assert_eq!(evaluate(&f, &z).unwrap(), C64::new(1.0, 0.0));
    }

    #[test]
    fn polynomial_json_shape() {
        let f = HoloFunction::Polynomial { terms: vec![(vec![1, 2], [0.5, -1.0])] };
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"variant":"polynomial","terms":[[[1,2],[0.5,-1.0]]]}"#);
        assert_eq!(serde_json::from_str::<HoloFunction>(&s).unwrap(), f);
    }

    #[test]
    fn fa_at_its_centre() {
        let a = BallPoint::new(vec![C64::new(0.6, 0.2), C64::new(0.1, -0.3)]).unwrap();
        let f = HoloFunction::kernel_fa(a.clone(), 1.0, 2.0, 2.0, 0.0);
        let HoloFunction::KernelPowerFa { exponent, .. } = f else { unreachable!() };
        let v = evaluate(&f, &a).unwrap();
        let exact = a.defect().powf(1.0 - exponent);
        assert!((v - C64::new(exact, 0.0)).norm() < 1e-12 * exact);
    }

    #[test]
    fn fa_is_comparable_on_bergman_balls() {
        // 1 − ⟨φ_a(x), a⟩ = (1−|a|²)/(1 − ⟨x,a⟩), so on D(a, r)
        // |f_a|·(1−|a|²)^{e−θ} = |1 − ⟨x,a⟩|^e ∈ [(1−R|a|)^e, (1+R|a|)^e].
        let (p, q, alpha, theta, big_r) = (2.0, 2.0, 0.0, 1.0, 0.5f64.tanh());
        let mut rng = stream(1, tag::EXPERIMENT, 0);
        for n in 1..=2 {
            for &rho in &[0.5, 0.9, 0.99, 0.999] {
                let a = BallPoint::on_ray(&SpherePoint::e1(n).unwrap(), rho).unwrap();
                let f = HoloFunction::kernel_fa(a.clone(), theta, p, q, alpha);
                let HoloFunction::KernelPowerFa { exponent: e, .. } = f else { unreachable!() };
                let scale = a.defect().powf(theta - e);
                let (lo, hi) = ((1.0 - big_r * rho).powf(e), (1.0 + big_r * rho).powf(e));
                for _ in 0..500 {
                    let x: Vec<C64> = uniform_sphere(n, &mut rng).into_iter().map(|c| c * big_r * rng.gen::<f64>()).collect();
                    let z = involution_raw(a.coords(), &x);
                    let ratio = f.eval_raw(&z).norm() / scale;
                    assert!(ratio >= lo * (1.0 - 1e-9) && ratio <= hi * (1.0 + 1e-9), "n={n} ρ={rho}: {ratio}");
                }
            }
        }
    }

    #[test]
    fn overflow_is_reported() {
        let zeta = SpherePoint::e1(1).unwrap();
        let g = HoloFunction::boundary_kernel(zeta, 40.0);
        let z = BallPoint::real(&[1.0 - 1e-14]).unwrap();
        assert!(matches!(evaluate(&g, &z), Err(Error::Overflow(_))));
    }

    #[test]
    fn rademacher_examples_and_orthonormality() {
        assert_eq!(rademacher(1, 0.25), 1.0);
        assert_eq!(rademacher(1, 0.75), -1.0);
        assert_eq!(rademacher(3, 0.0), 1.0);
        for j in 1..=6u32 {
            for k in 1..=6u32 {
                let panels = 1u64 << (k.max(j) + 2);
                let s: f64 = (0..panels)
                    .map(|m| {
                        let t = (m as f64 + 0.5) / panels as f64;
                        rademacher(j, t) * rademacher(k, t)
                    })
                    .sum::<f64>()
                    / panels as f64;
                assert_eq!(s, if j == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn rademacher_agrees_with_sine() {
        let mut rng = stream(2, tag::EXPERIMENT, 0);
        for _ in 0..10_000 {
            let tau: f64 = rng.gen();
            let k = rng.gen_range(1..12u32);
            let s = (2f64.powi(k as i32) * std::f64::consts::PI * tau).sin();
            if s.abs() > 1e-9 {
                assert_eq!(rademacher(k, tau), s.signum());
            }
        }
    }

    #[test]
    fn superposition_identities() {
        let zeta = SpherePoint::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let g = HoloFunction::boundary_kernel(zeta.clone(), 0.7);
        let id = superpose(&monomial_power(1), g.clone());
        let cube = superpose(&monomial_power(3), g.clone());
        let g3 = HoloFunction::boundary_kernel(zeta, 2.1);
        let sq_const = superpose(&monomial_power(2), HoloFunction::constant(2, C64::new(0.5, 1.0)));
        let mut rng = stream(3, tag::EXPERIMENT, 0);
        for _ in 0..100 {
            let z: Vec<C64> = uniform_sphere(2, &mut rng).into_iter().map(|c| c * 0.95 * rng.gen::<f64>()).collect();
            assert_eq!(id.eval_raw(&z), g.eval_raw(&z));
            let (a, b) = (cube.eval_raw(&z), g3.eval_raw(&z));
            assert!((a - b).norm() <= 1e-12 * b.norm());
            assert!((sq_const.eval_raw(&z) - C64::new(0.5, 1.0).powu(2)).norm() < 1e-15);
        }
    }

    #[test]
    fn cauchy_riemann_residual() {
        let a = BallPoint::new(vec![C64::new(0.5, 0.3), C64::new(-0.1, 0.4)]).unwrap();
        let l = Lattice::from_points(2, 0.5, 1.0, vec![a.clone(), BallPoint::real(&[0.2, 0.1]).unwrap()]).unwrap();
        let fs = vec![
            HoloFunction::Polynomial { terms: vec![(vec![2, 1], [1.0, 0.5]), (vec![0, 3], [-0.3, 0.0])] },
            HoloFunction::kernel_fa(a, 0.8, 2.0, 2.0, 0.0),
            HoloFunction::LatticeSum(LatticeSumSpec {
                lattice: l,
                lambda: vec![C64::new(1.0, 0.0), C64::new(0.0, 2.0)],
                theta: 1.0,
                alpha: 0.0,
                q: 2.0,
            }),
        ];
        let mut rng = stream(4, tag::EXPERIMENT, 0);
        let h = 1e-5;
        for f in &fs {
            for _ in 0..50 {
                let z: Vec<C64> = uniform_sphere(2, &mut rng).into_iter().map(|c| c * 0.8 * rng.gen::<f64>()).collect();
                let v = uniform_sphere(2, &mut rng);
                let shift = |s: C64| -> Vec<C64> { z.iter().zip(&v).map(|(a, b)| a + b * s).collect() };
                let dr = (f.eval_raw(&shift(C64::new(h, 0.0))) - f.eval_raw(&shift(C64::new(-h, 0.0)))) / (2.0 * h);
                let di = (f.eval_raw(&shift(C64::new(0.0, h))) - f.eval_raw(&shift(C64::new(0.0, -h)))) / C64::new(0.0, 2.0 * h);
                assert!((dr - di).norm() < 1e-6 * (1.0 + dr.norm()), "{dr} vs {di}");
            }
        }
    }

    #[test]
    fn kernel_branch_is_continuous_along_radii() {
        let mut rng = stream(5, tag::EXPERIMENT, 0);
        for _ in 0..20 {
            let zeta = SpherePoint::from_raw(uniform_sphere(2, &mut rng));
            let xi = uniform_sphere(2, &mut rng);
            let g = HoloFunction::boundary_kernel(zeta, 2.7);
            let steps = 20_000;
            let mut prev = g.eval_raw(&[C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
            for i in 1..=steps {
                let t = 0.999 * i as f64 / steps as f64;
                let z: Vec<C64> = xi.iter().map(|c| c * t).collect();
                let cur = g.eval_raw(&z);
                // |g'| ≤ θ|1−w|^{−θ−1} ≤ θ·(1−t)^{−θ−1}
                let bound = 2.7 * (1.0 - t).powf(-3.7) * 0.999 / steps as f64;
                assert!((cur - prev).norm() <= 2.0 * bound, "jump at t = {t}");
                prev = cur;
            }
        }
    }

    #[test]
    fn khinchine_examples() {
        assert_eq!(khinchine_ratio(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)], 4.0, 2).unwrap(), 2.0);
        assert_eq!(khinchine_ratio(&[C64::new(0.0, 3.0)], 3.7, 4).unwrap(), 1.0);
        assert!(khinchine_ratio(&[C64::new(1.0, 0.0)], 2.0, 17).is_err());
    }

    proptest! {
        #[test]
        fn khinchine_p2_is_exactly_one(c in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..=12)) {
            let c: Vec<C64> = c.into_iter().map(|(a, b)| C64::new(a, b)).collect();
            prop_assume!(c.iter().any(|x| x.norm() > 0.0));
            prop_assert_eq!(khinchine_ratio(&c, 2.0, 12).unwrap(), 1.0);
        }
    }
}
