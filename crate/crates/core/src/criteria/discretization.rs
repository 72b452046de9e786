//! The sequences `η^{(δ)}`, the discretization comparisons and the empirical
//! necessity test.

use super::functionals::{cone_exponent, nu_carleson, nu_value, ConeSampler, FunctionalOptions};
use crate::error::{ensure, Result};
use crate::functions::{HoloFunction, LatticeSumSpec};
use crate::geometry::{widen_aperture, RegionSpec, SpherePoint};
use crate::index::ConeIndex;
use crate::lattice::Lattice;
use crate::measures::{integrate, sample_sphere, IntegrationOptions, MeasureSpec, MuHat};
use crate::norms::{carleson_constant_atomic, seq_tent_norm, tent_norm, Exponent, TentParams};
use crate::rng::{child_seed, tag};
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `η_k^{(δ)} = μ̂_δ(a_k)(1−|a_k|²)^{(q−s)(n+1+α)/q}` along a lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaSequence {
    pub delta: f64,
    pub values: Vec<f64>,
}

pub fn eta_sequence(mu: &MeasureSpec, lattice: &Lattice, delta: f64, params: &TentParams) -> Result<EtaSequence> {
    params.validate()?;
    ensure(lattice.n() == params.n, || format!("lattice has n = {}, parameters have n = {}", lattice.n(), params.n))?;
    let h = MuHat::with_radius(mu, params.n, delta, params.alpha)?;
    let e = cone_exponent(params);
    let values = lattice
        .points()
        .par_iter()
        .map(|a| {
            let m = h.eval(a.coords());
            if m == 0.0 {
                0.0
            } else {
                m * a.defect().powf(e)
            }
        })
        .collect();
    Ok(EtaSequence { delta, values })
}

/// `‖c‖_{T^∞_Q(Z)} = ‖Σ |c_k|^Q (1−|a_k|²)ⁿ δ_{a_k}‖_CM^{1/Q}`, exact in δ.
fn t_infinity_norm(c: &[f64], lattice: &Lattice, exponent: f64, seed: u64) -> Result<f64> {
    let n = lattice.n();
    let atoms: Vec<(Vec<C64>, f64)> = lattice
        .points()
        .iter()
        .zip(c)
        .filter(|(_, &x)| x > 0.0)
        .map(|(a, &x)| (a.coords().to_vec(), x.powf(exponent) * a.defect().powi(n as i32)))
        .collect();
    if atoms.is_empty() {
        return Ok(0.0);
    }
    Ok(carleson_constant_atomic(n, &atoms, 256, seed)?.value.powf(1.0 / exponent))
}

/// The three quantities of the `T^∞` discretization of `‖ν_μ‖_CM`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonDiscretization {
    /// `‖η^{(r/2)}‖_{T^∞_{q/(q−s)}(Z)}`.
    pub eta_small: f64,
    /// `‖ν_μ‖_CM^{(q−s)/q}`.
    pub nu: f64,
    /// `‖η^{(2r)}‖_{T^∞_{q/(q−s)}(Z)}`.
    pub eta_large: f64,
    /// `eta_small / nu`.
    pub lower_ratio: f64,
    /// `nu / eta_large`.
    pub upper_ratio: f64,
}

/// One boundary point of the cone-versus-lattice comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeComparison {
    pub xi: SpherePoint,
    /// `∫_{Γ(ξ)} μ̂_r^P dv_α` against `Σ_{a_k∈Γ'(ξ)} μ̂_{2r}(a_k)^P (1−|a_k|²)^{n+1+α}`.
    pub integral: Option<(f64, f64)>,
    /// `sup_{Γ(ξ)} μ̂_r (1−|z|²)^E` against `max_{a_k∈Γ'(ξ)} μ̂_{2r}(a_k)(1−|a_k|²)^E`.
    pub sup: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationReport {
    /// Present when `q > s`.
    pub carleson: Option<CarlesonDiscretization>,
    /// Aperture of the lattice cones `Γ'(ξ)`.
    pub wide_aperture: f64,
    pub cones: Vec<ConeComparison>,
    /// `max_ξ` of integral LHS/RHS, and the ratio of their σ-averages.
    pub integral_ratio_max: Option<f64>,
    pub integral_ratio_mean: Option<f64>,
    /// `max_ξ` of sup LHS/RHS, and the ratio of their σ-averages.
    pub sup_ratio_max: f64,
    pub sup_ratio_mean: f64,
}

/// Boundary points of the cone comparison.
const CONE_POINTS: usize = 20;

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if b == 0.0 {
        f64::INFINITY
    } else {
        a / b
    }
}

/// Compares `‖ν_μ‖_CM` with the `T^∞` norms of `η^{(r/2)}`, `η^{(2r)}`, and
/// for 20 sampled ξ compares the cone integral and the cone supremum of
/// `μ̂_r` with their lattice sums over a widened cone, with exponents
/// `P = q/(q−s)` (integral, weight `v_α`) and `E = (q−s)(n+1+α)/q` (sup).
///
/// The continuous sides are restricted to the Bergman ball of radius
/// `R_max − δ` on which the lattice covering is verified.
pub fn discretization_check(
    mu: &MeasureSpec,
    lattice: &Lattice,
    params: &TentParams,
    opts: &FunctionalOptions,
) -> Result<DiscretizationReport> {
    params.validate()?;
    opts.validate()?;
    let n = params.n;
    ensure(lattice.n() == n, || format!("lattice has n = {}, parameters have n = {n}", lattice.n()))?;
    let r = params.r;
    let small = eta_sequence(mu, lattice, r / 2.0, params)?;
    let large = eta_sequence(mu, lattice, 2.0 * r, params)?;
    let carleson = if params.q > params.s {
        let expo = params.q_ratio()?;
        let eta_small = t_infinity_norm(&small.values, lattice, expo, child_seed(opts.seed, tag::CARLESON, 1))?;
        let eta_large = t_infinity_norm(&large.values, lattice, expo, child_seed(opts.seed, tag::CARLESON, 2))?;
        let nu = nu_carleson(mu, params, 0.0, opts)?.box_constant.value.powf(1.0 / expo);
        Some(CarlesonDiscretization { eta_small, nu, eta_large, lower_ratio: ratio(eta_small, nu), upper_ratio: ratio(nu, eta_large) })
    } else {
        None
    };

    let wide = widen_aperture(n, params.gamma, lattice.delta(), 2000, child_seed(opts.seed, tag::APERTURE, 0))?;
    let coords: Vec<Vec<C64>> = lattice.points().iter().map(|a| a.coords().to_vec()).collect();
    let cones = ConeIndex::new(coords, wide);
    let h = MuHat::new(mu, n, r, params.alpha)?;
    let h2 = MuHat::with_radius(mu, n, 2.0 * r, params.alpha)?;
    let e = cone_exponent(params);
    let a_exp = params.a();
    let hi = (lattice.r_max() - lattice.delta()).max(0.0).tanh();
    let power = if params.q > params.s { Some(params.q_ratio()?) } else { None };
    let xis = sample_sphere(n, CONE_POINTS, child_seed(opts.seed, tag::SPHERE, 3))?;
    let k_max = ((1.0 / (1.0 - hi)).log2().ceil() as usize + 1).min(60);
    let dv = MeasureSpec::weighted_volume(0.0);
    let comparisons: Vec<Result<ConeComparison>> = xis
        .par_iter()
        .enumerate()
        .map(|(i, xi)| {
            let members = cones.members(xi.coords());
            let points = lattice.points();
            let integral = match power {
                Some(pw) => {
                    let alpha = params.alpha;
                    let integrand = |z: &[C64]| nu_value(&h, z, pw, alpha);
                    let region = RegionSpec::Koranyi { xi: xi.clone(), gamma: params.gamma };
                    let io = IntegrationOptions::new(opts.budget, child_seed(opts.seed, tag::EXPERIMENT, i as u64)).with_max_radius(hi);
                    let lhs = integrate(&dv, &region, &integrand, &io)?.value;
                    let rhs: f64 = members
                        .iter()
                        .map(|&k| {
                            let m = h2.eval(points[k].coords());
                            if m == 0.0 {
                                0.0
                            } else {
                                m.powf(pw) * points[k].defect().powf(a_exp)
                            }
                        })
                        .sum();
                    Some((lhs, rhs))
                }
                None => None,
            };
            let sampler = ConeSampler { gamma: params.gamma, lo: 0.0, hi, draws: opts.cone_draws, seed: opts.seed };
            let value = |z: &[C64]| {
                let m = h.eval(z);
                if m == 0.0 {
                    0.0
                } else {
                    m * (1.0 - crate::geometry::norm_sqr(z)).powf(e)
                }
            };
            let lhs = sampler.per_depth(xi.coords(), k_max, 100 + i as u64, value).into_iter().fold(0.0, f64::max);
            let origin_term = value(&vec![C64::new(0.0, 0.0); n]);
            let rhs = members
                .iter()
                .map(|&k| {
                    let m = h2.eval(points[k].coords());
                    if m == 0.0 {
                        0.0
                    } else {
                        m * points[k].defect().powf(e)
                    }
                })
                .fold(0.0, f64::max);
            Ok(ConeComparison { xi: xi.clone(), integral, sup: (lhs.max(origin_term), rhs) })
        })
        .collect();
    let cones: Vec<ConeComparison> = comparisons.into_iter().collect::<Result<_>>()?;
    let (integral_ratio_max, integral_ratio_mean) = if power.is_some() {
        let pairs: Vec<(f64, f64)> = cones.iter().filter_map(|c| c.integral).collect();
        let max = pairs.iter().map(|&(a, b)| ratio(a, b)).fold(0.0, f64::max);
        let (sa, sb) = pairs.iter().fold((0.0, 0.0), |acc, &(a, b)| (acc.0 + a, acc.1 + b));
        (Some(max), Some(ratio(sa, sb)))
    } else {
        (None, None)
    };
    let sup_ratio_max = cones.iter().map(|c| ratio(c.sup.0, c.sup.1)).fold(0.0, f64::max);
    let (sa, sb) = cones.iter().fold((0.0, 0.0), |acc, c| (acc.0 + c.sup.0, acc.1 + c.sup.1));
    Ok(DiscretizationReport {
        carleson,
        wide_aperture: wide,
        cones,
        integral_ratio_max,
        integral_ratio_mean,
        sup_ratio_max,
        sup_ratio_mean: ratio(sa, sb),
    })
}

/// Both sides of the sequence necessity inequality for one `λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NecessityReport {
    /// `∫_{𝕊ₙ} (Σ_{a_k∈Γ(ξ)} |λ_k|^s η_k^{(2r)})^{t/s} dσ(ξ)`.
    pub lhs: f64,
    /// `‖λ‖_{T^p_q(Z)}`.
    pub lambda_norm: f64,
    /// `max_τ ‖A_{μ,s}F_τ‖_{L^t}/‖F_τ‖_{𝓗𝓣^p_{q,α}}` over the sampled τ.
    pub operator_norm: f64,
    /// `operator_norm^t · lambda_norm^t`.
    pub rhs: f64,
    pub ratio: f64,
    /// The θ of the kernels `f_k`.
    pub theta: f64,
}

/// The smallest admissible `θ` plus one: `n·max{1, q/p, 1/p, 1/q} + 1`.
fn kernel_theta(params: &TentParams) -> f64 {
    let n = params.n as f64;
    n * 1f64.max(params.q / params.p).max(1.0 / params.p).max(1.0 / params.q) + 1.0
}

/// Evaluates both sides of the necessity inequality. The operator norm is
/// estimated on `F_τ = Σ λ_k r_{k+1}(τ) f_k` at `taus` points of the dyadic
/// grid; `opts.budget` is the evaluation budget of each tent norm.
pub fn necessity_test(
    mu: &MeasureSpec,
    lattice: &Lattice,
    lambda: &[C64],
    params: &TentParams,
    taus: usize,
    opts: &FunctionalOptions,
) -> Result<NecessityReport> {
    params.validate()?;
    opts.validate()?;
    ensure(lambda.len() == lattice.len(), || format!("{} coefficients for {} lattice points", lambda.len(), lattice.len()))?;
    ensure(lambda.iter().all(|x| x.re.is_finite() && x.im.is_finite()), || "λ must be finite".into())?;
    ensure(taus >= 1, || "taus must be positive".into())?;
    let theta = kernel_theta(params);
    let eta = eta_sequence(mu, lattice, 2.0 * params.r, params)?;
    let c: Vec<C64> = lambda.iter().zip(&eta.values).map(|(l, e)| C64::new(l.norm().powf(params.s) * e, 0.0)).collect();
    let sphere_budget = opts.budget.max(4096);
    let ts = params.t / params.s;
    let lhs = if c.iter().all(|x| x.re == 0.0) {
        0.0
    } else {
        seq_tent_norm(&c, lattice, Exponent::Finite(ts), Exponent::Finite(1.0), sphere_budget, opts.seed)?.value.powf(ts)
    };
    if lambda.iter().all(|x| x.norm() == 0.0) {
        return Ok(NecessityReport { lhs, lambda_norm: 0.0, operator_norm: 0.0, rhs: 0.0, ratio: 0.0, theta });
    }
    let lambda_norm =
        seq_tent_norm(lambda, lattice, Exponent::Finite(params.p), Exponent::Finite(params.q), sphere_budget, opts.seed)?.value;
    let sum = LatticeSumSpec { lattice: lattice.clone(), lambda: lambda.to_vec(), theta, alpha: params.alpha, q: params.q };
    let grid_order = (taus.next_power_of_two().trailing_zeros()).max(1);
    let grid = crate::functions::dyadic_grid(grid_order);
    let step = (grid.len() / taus).max(1);
    let source = MeasureSpec::weighted_volume(params.alpha + params.n as f64);
    let mut operator_norm = 0.0f64;
    for (j, &tau) in grid.iter().step_by(step).take(taus).enumerate() {
        let f = HoloFunction::RademacherSum { sum: sum.clone(), tau };
        let seed = child_seed(opts.seed, tag::RADEMACHER, j as u64);
        let image = tent_norm(&f, mu, params.t, params.s, params.gamma, opts.budget, seed)?.value;
        let norm = tent_norm(&f, &source, params.p, params.q, params.gamma, opts.budget, seed)?.value;
        if norm > 0.0 {
            operator_norm = operator_norm.max(image / norm);
        }
    }
    let rhs = operator_norm.powf(params.t) * lambda_norm.powf(params.t);
    Ok(NecessityReport { lhs, lambda_norm, operator_norm, rhs, ratio: ratio(lhs, rhs), theta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cap_measure;
    use crate::lattice::build_lattice;

    fn params() -> TentParams {
        TentParams::new(2.0, 2.0, 1.0, 2.0, 0.0, 0.0, 1).unwrap()
    }

    fn lattice_mass(lattice: &Lattice, exponent: f64) -> MeasureSpec {
        MeasureSpec::LatticeMasses { lattice: lattice.clone(), exponent, coefficient: 1.0 }
    }

    #[test]
    fn zero_measure() {
        let lattice = build_lattice(1, 0.5, 1.5, 1).unwrap();
        let eta = eta_sequence(&MeasureSpec::zero(), &lattice, 1.0, &params()).unwrap();
        assert!(eta.values.iter().all(|&v| v == 0.0));
        let opts = FunctionalOptions::new(1000, 1);
        let d = discretization_check(&MeasureSpec::zero(), &lattice, &params(), &opts).unwrap();
        let c = d.carleson.unwrap();
        assert_eq!((c.eta_small, c.nu, c.eta_large), (0.0, 0.0, 0.0));
        let lambda = vec![C64::new(1.0, 0.0); lattice.len()];
        let nt = necessity_test(&MeasureSpec::zero(), &lattice, &lambda, &params(), 1, &opts).unwrap();
        assert_eq!(nt.lhs, 0.0);
    }

    #[test]
    fn eta_matches_mu_hat() {
        let lattice = build_lattice(1, 0.5, 2.0, 2).unwrap();
        let mu = lattice_mass(&lattice, 3.0);
        let p = params();
        let eta = eta_sequence(&mu, &lattice, 1.0, &p).unwrap();
        for (a, &v) in lattice.points().iter().zip(&eta.values).step_by(17) {
            let direct = MuHat::with_radius(&mu, 1, 1.0, 0.0).unwrap().eval(a.coords()) * a.defect().powf(cone_exponent(&p));
            assert!((v - direct).abs() <= 1e-12 * direct.max(1e-300));
            assert!(v > 0.0);
        }
    }

    #[test]
    fn single_coefficient_reduces_to_a_cap() {
        let lattice = build_lattice(1, 0.5, 1.5, 3).unwrap();
        let mu = lattice_mass(&lattice, 3.0);
        let p = params();
        let j = lattice.points().iter().position(|a| a.norm() > 0.5).unwrap();
        let mut lambda = vec![C64::new(0.0, 0.0); lattice.len()];
        lambda[j] = C64::new(2.0, 0.0);
        let opts = FunctionalOptions::new(20_000, 4);
        let report = necessity_test(&mu, &lattice, &lambda, &p, 1, &opts).unwrap();
        let eta = eta_sequence(&mu, &lattice, 2.0 * p.r, &p).unwrap().values[j];
        let cap = cap_measure(&lattice.points()[j], 200_000, 5).unwrap();
        let expected = 2f64.powf(p.t) * eta.powf(p.t / p.s) * cap.value;
        assert!((report.lhs / expected - 1.0).abs() < 0.05, "{} vs {expected}", report.lhs);
        assert!(report.ratio > 0.0 && report.ratio.is_finite());
    }

    #[test]
    fn lattice_mass_orderings() {
        let lattice = build_lattice(1, 0.5, 2.0, 6).unwrap();
        let mu = lattice_mass(&lattice, 3.0);
        let d = discretization_check(&mu, &lattice, &params(), &FunctionalOptions::new(4000, 7)).unwrap();
        let c = d.carleson.clone().unwrap();
        assert!(c.eta_small > 0.0 && c.nu > 0.0 && c.eta_large > 0.0, "{c:?}");
        assert!(c.eta_small <= c.eta_large);
        assert!(d.wide_aperture > params().gamma);
        assert!(d.sup_ratio_max.is_finite() && d.sup_ratio_max > 0.0, "{d:?}");
        assert!(d.integral_ratio_max.unwrap().is_finite());
        // μ̂_r ≤ μ̂_{2r}·(y_a/y_z)^{2n+1+α} pointwise, so the sup ratio is O(1).
        assert!(d.sup_ratio_max < 100.0, "{}", d.sup_ratio_max);
    }
}
