//! Cross-module invariants: quasi-norm axioms, aperture and weight
//! consistency, verdicts against the closed-form region, scaling laws.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tentlab::criteria::{embedding_verdict, inclusion_region, refinement_decision, Bounded, Decision, FunctionalOptions};
use tentlab::functions::HoloFunction;
use tentlab::geometry::BallPoint;
use tentlab::measures::MeasureSpec;
use tentlab::norms::{bergman_norm, tent_norm, weighted_lp_integral, TentParams};
use tentlab::C64;

fn polynomial(n: usize, terms: &[(Vec<u32>, f64, f64)]) -> HoloFunction {
    assert!(terms.iter().all(|t| t.0.len() == n));
    HoloFunction::Polynomial { terms: terms.iter().map(|(m, re, im)| (m.clone(), [*re, *im])).collect() }
}

fn random_polynomial(rng: &mut ChaCha8Rng, n: usize, max_degree: u32) -> HoloFunction {
    let count = rng.gen_range(1..=4);
    let terms: Vec<_> = (0..count)
        .map(|_| {
            let m = (0..n).map(|_| rng.gen_range(0..=max_degree / n as u32)).collect();
            (m, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
        .collect();
    polynomial(n, &terms)
}

fn spread(xs: &[f64]) -> f64 {
    let hi = xs.iter().cloned().fold(f64::MIN, f64::max);
    let lo = xs.iter().cloned().fold(f64::MAX, f64::min);
    hi / lo
}

fn sum(f: &HoloFunction, g: &HoloFunction) -> HoloFunction {
    match (f, g) {
        (HoloFunction::Polynomial { terms: a }, HoloFunction::Polynomial { terms: b }) => {
            HoloFunction::Polynomial { terms: a.iter().chain(b).cloned().collect() }
        }
        _ => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // With common sample points the estimator is a discrete mixed norm, so
    // the m-triangle inequality holds with constant 1.
    #[test]
    fn quasi_triangle_with_unit_constant(seed in 0u64..1_000, n in 1usize..=2, p in 0.5f64..4.0, q in 0.5f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_polynomial(&mut rng, n, 6);
        let g = random_polynomial(&mut rng, n, 6);
        let mu = MeasureSpec::weighted_volume(n as f64);
        let norm = |h: &HoloFunction| tent_norm(h, &mu, p, q, 2.0, 4000, seed).unwrap().value;
        let m = 1f64.min(p).min(q);
        let lhs = norm(&sum(&f, &g)).powf(m);
        let rhs = norm(&f).powf(m) + norm(&g).powf(m);
        prop_assert!(lhs <= rhs * (1.0 + 1e-9), "{lhs} > {rhs}");
    }

    #[test]
    fn homogeneity(seed in 0u64..1_000, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_polynomial(&mut rng, 1, 8);
        let c = C64::new(re, im);
        let scaled = match &f {
            HoloFunction::Polynomial { terms } => HoloFunction::Polynomial {
                terms: terms.iter().map(|(m, v)| {
                    let w = C64::new(v[0], v[1]) * c;
                    (m.clone(), [w.re, w.im])
                }).collect(),
            },
            _ => unreachable!(),
        };
        let mu = MeasureSpec::weighted_volume(1.0);
        let a = tent_norm(&f, &mu, 1.5, 2.5, 2.0, 4000, seed).unwrap().value;
        let b = tent_norm(&scaled, &mu, 1.5, 2.5, 2.0, 4000, seed).unwrap().value;
        prop_assert!((b - c.norm() * a).abs() <= 1e-9 * b.max(1e-300), "{b} vs {}", c.norm() * a);
    }
}

#[test]
fn apertures_two_and_four_are_comparable() {
    let mu = MeasureSpec::weighted_volume(1.0);
    let mut family = vec![
        polynomial(1, &[(vec![0], 1.0, 0.0)]),
        polynomial(1, &[(vec![5], 1.0, 0.0)]),
        polynomial(1, &[(vec![1], 0.3, 0.0), (vec![9], -1.0, 0.5)]),
    ];
    for r in [0.5, 0.9, 0.99] {
        family.push(HoloFunction::kernel_fa(BallPoint::real(&[r]).unwrap(), 2.0, 2.0, 2.0, 0.0));
    }
    for f in &family {
        let narrow = tent_norm(f, &mu, 2.0, 2.0, 2.0, 100_000, 5).unwrap().value;
        let wide = tent_norm(f, &mu, 2.0, 2.0, 4.0, 100_000, 5).unwrap().value;
        let ratio = wide / narrow;
        assert!((1.0..=10.0).contains(&ratio), "{f:?}: γ=4 / γ=2 = {ratio}");
    }
}

#[test]
fn tent_norm_with_p_equal_q_is_a_bergman_norm() {
    // HT^p_{p,α} = A^p_{n+α}; here n = 1, α = 0, p = 3.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mu = MeasureSpec::weighted_volume(1.0);
    let ratios: Vec<f64> = (0..20)
        .map(|k| {
            let f = random_polynomial(&mut rng, 1, 12);
            let tent = tent_norm(&f, &mu, 3.0, 3.0, 2.0, 40_000, k).unwrap().value.powi(3);
            let bergman = weighted_lp_integral(&f, 3.0, 1.0, 1, 40_000, k).unwrap().value;
            tent / bergman
        })
        .collect();
    assert!(spread(&ratios) <= 10.0, "{ratios:?}");
}

#[test]
fn forward_inclusion_into_bergman_space_is_bounded() {
    // p = 1 < t = 2, q = 2, α = 0, n = 1: HT^1_{2,0} ⊂ A^2_w with
    // w = (t/p − 1)n − 1 + t(n+1+α)/q = 2.
    let (p, q, alpha, t, n) = (1.0, 2.0, 0.0, 2.0, 1usize);
    let w = (t / p - 1.0) * n as f64 - 1.0 + t * (n as f64 + 1.0 + alpha) / q;
    let mu = MeasureSpec::weighted_volume(n as f64 + alpha);
    let ratios: Vec<f64> = [0.0, 0.5, 0.9, 0.99]
        .iter()
        .map(|&r| {
            let f = HoloFunction::kernel_fa(BallPoint::real(&[r]).unwrap(), 2.0, p, q, alpha);
            let target = bergman_norm(&f, t, w, n, 100_000, 3).unwrap().value;
            let source = tent_norm(&f, &mu, p, q, 2.0, 100_000, 3).unwrap().value;
            target / source
        })
        .collect();
    assert_ne!(refinement_decision(&ratios), Decision::Infinite, "{ratios:?}");
    assert!(spread(&ratios) <= 10.0, "{ratios:?}");
}

/// Random `(p, q, α, t, s, β)` with `n = 1` whose defining inequality holds
/// or fails by at least `margin`.
fn random_exponents(rng: &mut ChaCha8Rng, margin: f64) -> (f64, f64, f64, f64, f64, f64) {
    let grid = |rng: &mut ChaCha8Rng| -> f64 { [0.5, 1.0, 1.5, 2.0, 3.0, 4.0][rng.gen_range(0..6)] };
    loop {
        let (p, q, t, s) = (grid(rng), grid(rng), grid(rng), grid(rng));
        let alpha = rng.gen_range(-1.5..1.5);
        let beta = rng.gen_range(-1.5..3.0);
        let (a, b) = (2.0 + alpha, 2.0 + beta);
        let gap = if p >= t { b / s - a / q } else { b / s + 1.0 / t - a / q - 1.0 / p };
        if gap.abs() >= margin {
            return (p, q, alpha, t, s, beta);
        }
    }
}

#[test]
fn verdict_agrees_with_the_region_for_weighted_volume() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut inconclusive, mut mismatches) = (0, Vec::new());
    let total = 200;
    for k in 0..total {
        let (p, q, alpha, t, s, beta) = random_exponents(&mut rng, 0.3);
        let params = TentParams::new(p, q, s, t, alpha, beta, 1).unwrap();
        let mu = MeasureSpec::weighted_volume(beta + 1.0);
        let opts = FunctionalOptions { sphere_points: 16, ..FunctionalOptions::new(1000, k) };
        let v = embedding_verdict(&mu, &params, &opts).unwrap();
        let inside = inclusion_region(p, q, alpha, t, s, beta, 1).unwrap();
        match v.bounded {
            Bounded::Inconclusive => inconclusive += 1,
            b if (b == Bounded::Yes) != inside => mismatches.push(((p, q, alpha, t, s, beta), v.statistic.refinement)),
            _ => {}
        }
    }
    assert!(mismatches.is_empty(), "{mismatches:?}");
    assert!(inconclusive * 10 <= total, "{inconclusive} inconclusive of {total}");
}

#[test]
fn case_statistics_scale_as_their_formulas_force() {
    let c: f64 = 3.5;
    let opts = FunctionalOptions::new(2000, 9);
    let volume = MeasureSpec::weighted_volume(1.0);
    let scaled = volume.scaled(c);
    let ratio = |params: &TentParams| {
        let a = embedding_verdict(&volume, params, &opts).unwrap();
        let b = embedding_verdict(&scaled, params, &opts).unwrap();
        (a, b)
    };
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * y.abs().max(1e-300);

    // Case 1: G is linear in μ.
    let (a, b) = ratio(&TentParams::new(1.0, 2.0, 2.0, 2.0, 0.0, 0.0, 1).unwrap());
    assert!(close(b.functional_value, c * a.functional_value), "{} vs {}", b.functional_value, a.functional_value);

    // Case 2: ν_{cμ} = c^{q/(q−s)} ν_μ.
    let params = TentParams::new(2.0, 2.0, 1.0, 2.0, 0.0, 0.0, 1).unwrap();
    let (a, b) = ratio(&params);
    let (ca, cb) = (a.carleson.unwrap(), b.carleson.unwrap());
    let k = c.powf(params.q_ratio().unwrap());
    assert!(close(cb.box_constant.value, k * ca.box_constant.value));
    assert!(close(cb.integral_constant, k * ca.integral_constant));

    // Cases 3 and 4: U and V are linear in μ.
    for params in [TentParams::new(3.0, 2.0, 1.0, 2.0, 0.0, 0.0, 1).unwrap(), TentParams::new(3.0, 1.0, 2.0, 2.0, 0.0, 0.0, 1).unwrap()] {
        let (a, b) = ratio(&params);
        assert!(close(b.functional_value, c * a.functional_value), "{:?}: {} vs {}", a.case, b.functional_value, a.functional_value);
    }
}
