//! The functionals `G_μ`, `ν_μ`, `U_μ`, `V_μ` and Carleson constants.

use super::{case_dispatch, refinement_decision, running_max, CaseTag, Decision};
use crate::error::{ensure, Result};
use crate::functions::Focus;
use crate::geometry::{norm_sqr, BallPoint, RegionSpec, SpherePoint};
use crate::measures::{
    integrate, integrate_traced, sample_sphere, IntegralEstimate, IntegralTrace, Integrand, IntegrationOptions, MeasureSpec, MuHat,
    DEFAULT_SHELLS,
};
use crate::norms::{atomic_box_levels, cone_functional, focused_integral, outer_sample, TentOptions, TentParams};
use crate::rng::{child_seed, stream, tag};
use crate::sampling::{sample_slice, Frame};
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Knobs shared by the functionals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalOptions {
    /// Evaluations per region integral.
    pub budget: usize,
    pub seed: u64,
    /// Boundary points ξ for sphere suprema and outer `L`-norms.
    pub sphere_points: usize,
    /// Radii `|z|` of the `G` supremum, coarsest first.
    pub radii: Vec<f64>,
    /// Truncation levels `k` (radius `1 − 2^{−k}`) of the `U`, `V` and
    /// Carleson refinements.
    pub levels: Vec<usize>,
    /// Exponents `j` of the Carleson grid `δ = 2^{−j}`.
    pub delta_levels: usize,
    /// Draws per depth when maximizing over a cone.
    pub cone_draws: usize,
}

impl FunctionalOptions {
    pub fn new(budget: usize, seed: u64) -> FunctionalOptions {
        FunctionalOptions {
            budget,
            seed,
            sphere_points: 64,
            radii: vec![0.5, 0.9, 0.99, 0.999],
            levels: vec![5, 10, 15, 20],
            delta_levels: 13,
            cone_draws: 16,
        }
    }

    fn max_level(&self) -> usize {
        self.levels.iter().copied().max().unwrap_or(DEFAULT_SHELLS)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        ensure(self.budget >= 100, || "budget must be at least 100".into())?;
        ensure(self.sphere_points >= 2, || "sphere_points must be at least 2".into())?;
        ensure(!self.radii.is_empty() && self.radii.iter().all(|r| (0.0..1.0).contains(r)), || "radii must lie in [0, 1)".into())?;
        ensure(self.radii.windows(2).all(|w| w[0] < w[1]), || "radii must increase".into())?;
        ensure(!self.levels.is_empty() && self.levels.iter().all(|&k| (1..=60).contains(&k)), || "levels must lie in 1..=60".into())?;
        ensure(self.levels.windows(2).all(|w| w[0] < w[1]), || "levels must increase".into())?;
        ensure((1..=40).contains(&self.delta_levels), || "delta_levels must lie in 1..=40".into())?;
        ensure(self.cone_draws >= 1, || "cone_draws must be positive".into())
    }
}

/// A statistic with its values along a boundary refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinedStatistic {
    pub value: f64,
    pub std_error: f64,
    /// `(refinement parameter, value)`, coarsest first.
    pub refinement: Vec<(f64, f64)>,
    pub decision: Decision,
    /// Whether an underlying quadrature declared divergence.
    pub diverged: bool,
}

impl RefinedStatistic {
    fn from_sequence(refinement: Vec<(f64, f64)>, std_error: f64, diverged: bool) -> RefinedStatistic {
        let values: Vec<f64> = refinement.iter().map(|r| r.1).collect();
        RefinedStatistic {
            value: values.last().copied().unwrap_or(0.0),
            std_error,
            decision: refinement_decision(&values),
            refinement,
            diverged,
        }
    }

    pub(crate) fn zero(levels: &[f64]) -> RefinedStatistic {
        RefinedStatistic::from_sequence(levels.iter().map(|&l| (l, 0.0)).collect(), 0.0, false)
    }
}

fn require_case(params: &TentParams, allowed: &[CaseTag], what: &str) -> Result<CaseTag> {
    params.validate()?;
    let case = case_dispatch(params.p, params.q, params.s, params.t)?;
    ensure(allowed.contains(&case), || format!("{what} is defined for {allowed:?}, parameters are in {case:?}"))?;
    Ok(case)
}

fn hat(mu: &MeasureSpec, params: &TentParams) -> Result<MuHat> {
    MuHat::new(mu, params.n, params.r, params.alpha)
}

/// `(q−s)(n+1+α)/q`.
pub(crate) fn cone_exponent(params: &TentParams) -> f64 {
    (params.q - params.s) * params.a() / params.q
}

/// Exponent of `(1−|z|²)` in `G_μ`.
fn g_exponent(params: &TentParams) -> f64 {
    cone_exponent(params) + params.n as f64 * params.s * (1.0 / params.t - 1.0 / params.p)
}

/// `G_μ(z) = μ̂_r(z)(1−|z|²)^{(q−s)(n+1+α)/q + ns(1/t − 1/p)}`.
pub fn g_functional(mu: &MeasureSpec, z: &BallPoint, params: &TentParams) -> Result<f64> {
    require_case(params, &[CaseTag::Case1], "G_μ")?;
    ensure(z.n() == params.n, || format!("z has n = {}, parameters have n = {}", z.n(), params.n))?;
    let h = hat(mu, params)?;
    Ok(g_value(&h, z.coords(), g_exponent(params)))
}

fn g_value(h: &MuHat, z: &[C64], exponent: f64) -> f64 {
    let m = h.eval(z);
    if m == 0.0 {
        0.0
    } else {
        m * (1.0 - norm_sqr(z)).powf(exponent)
    }
}

/// Directions over which suprema on spheres `|z| = ρ` are taken: sampled
/// points, plus the directions of the atoms nearest to radius `ρ`.
fn directions(mu: &MeasureSpec, n: usize, rho: f64, opts: &FunctionalOptions, salt: u64) -> Result<Vec<Vec<C64>>> {
    if !mu.is_atomic() {
        return Ok(vec![SpherePoint::e1(n)?.coords().to_vec()]);
    }
    let mut out: Vec<Vec<C64>> =
        sample_sphere(n, opts.sphere_points, child_seed(opts.seed, tag::SPHERE, salt))?.iter().map(|x| x.coords().to_vec()).collect();
    let mut atoms: Vec<(f64, Vec<C64>)> = mu
        .atoms()
        .unwrap_or_default()
        .into_iter()
        .filter(|a| a.point.norm() > 0.0)
        .map(|a| ((a.point.norm() - rho).abs(), a.point.coords().iter().map(|c| c / a.point.norm()).collect()))
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.extend(atoms.into_iter().take(4 * opts.sphere_points).map(|a| a.1));
    Ok(out)
}

/// `sup G_μ` over the spheres `|z| ∈ radii`, with the running supremum as
/// refinement sequence.
pub fn g_sup(mu: &MeasureSpec, params: &TentParams, opts: &FunctionalOptions) -> Result<RefinedStatistic> {
    require_case(params, &[CaseTag::Case1], "G_μ")?;
    opts.validate()?;
    g_sup_over(mu, params, opts, &opts.radii)
}

pub(crate) fn g_sup_over(mu: &MeasureSpec, params: &TentParams, opts: &FunctionalOptions, radii: &[f64]) -> Result<RefinedStatistic> {
    let h = hat(mu, params)?;
    if h.is_zero() {
        return Ok(RefinedStatistic::zero(radii));
    }
    let e = g_exponent(params);
    let mut sups = Vec::with_capacity(radii.len());
    for (i, &rho) in radii.iter().enumerate() {
        let dirs = directions(mu, params.n, rho, opts, i as u64)?;
        let best = dirs.par_iter().map(|d| g_value(&h, &d.iter().map(|c| c * rho).collect::<Vec<_>>(), e)).reduce(|| 0.0, f64::max);
        sups.push(best);
    }
    let running = running_max(&sups);
    Ok(RefinedStatistic::from_sequence(radii.iter().copied().zip(running).collect(), 0.0, false))
}

/// `μ̂_r(z)^{q/(q−s)}(1−|z|²)^{α+n}`, the density of `ν_μ` against `dv`.
pub fn nu_density(mu: &MeasureSpec, z: &BallPoint, params: &TentParams) -> Result<f64> {
    let expo = params.q_ratio()?;
    let h = hat(mu, params)?;
    Ok(nu_value(&h, z.coords(), expo, params.alpha + params.n as f64))
}

pub(crate) fn nu_value(h: &MuHat, z: &[C64], expo: f64, weight: f64) -> f64 {
    let m = h.eval(z);
    if m == 0.0 {
        0.0
    } else {
        m.powf(expo) * (1.0 - norm_sqr(z)).powf(weight)
    }
}

/// A measure `density·dμ`, for Carleson constants of derived measures.
struct Weighted<'a> {
    base: &'a MeasureSpec,
    density: Option<&'a Integrand<'a>>,
    /// Invariant under unitary maps, so one ξ suffices.
    radial: bool,
    /// Only `|z| > min_radius` counts.
    min_radius: f64,
}

/// Both Carleson statistics of a measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonReport {
    /// `sup μ(B_δ(ξ))/δⁿ` over the (ξ, δ) grid, refined by truncating the
    /// measure at `|z| < 1 − 2^{−k}` (continuous measures) or by lowering
    /// the smallest δ (atomic measures).
    pub box_constant: RefinedStatistic,
    /// `sup_a ∫ (1−|a|²)/|1−⟨z,a⟩|^{n+1} dμ(z)` over `a = ρξ`.
    pub integral_constant: f64,
    /// `box_constant / integral_constant`.
    pub ratio: f64,
    pub witness_xi: Option<SpherePoint>,
    pub witness_delta: f64,
}

/// `‖μ‖_CM` by the box and the integral characterizations.
pub fn carleson_constant(mu: &MeasureSpec, n: usize, opts: &FunctionalOptions) -> Result<CarlesonReport> {
    mu.validate()?;
    opts.validate()?;
    if let Some(d) = mu.dim() {
        ensure(d == n, || format!("measure has n = {d}, requested n = {n}"))?;
    }
    carleson_of(&Weighted { base: mu, density: None, radial: !mu.is_atomic(), min_radius: 0.0 }, n, opts)
}

fn carleson_of(w: &Weighted<'_>, n: usize, opts: &FunctionalOptions) -> Result<CarlesonReport> {
    let deltas: Vec<f64> = (0..opts.delta_levels).map(|j| 0.5f64.powi(j as i32)).collect();
    let xis: Vec<Vec<C64>> = if w.radial {
        vec![SpherePoint::e1(n)?.coords().to_vec()]
    } else {
        sample_sphere(n, opts.sphere_points, child_seed(opts.seed, tag::CARLESON, 1))?.iter().map(|x| x.coords().to_vec()).collect()
    };
    if w.density.is_none() && w.base.is_atomic() {
        return atomic_carleson(w.base, n, &deltas, xis, opts);
    }
    let k_max = opts.max_level();
    let jobs: Vec<(usize, usize)> = (0..xis.len()).flat_map(|i| (0..deltas.len()).map(move |j| (i, j))).collect();
    let traces: Vec<Result<IntegralTrace>> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let region = RegionSpec::NonisotropicBall { xi: SpherePoint::from_raw(xis[i].clone()), delta: deltas[j] };
            let io = IntegrationOptions::new(opts.budget, child_seed(opts.seed, tag::CARLESON, (i * 64 + j) as u64 + 2))
                .with_shells(k_max)
                .with_min_radius(w.min_radius);
            let one = |_: &[C64]| 1.0;
            integrate_traced(w.base, &region, w.density.unwrap_or(&one), &io)
        })
        .collect();
    let traces: Vec<IntegralTrace> = traces.into_iter().collect::<Result<_>>()?;
    let diverged = traces.iter().any(|t| t.estimate.diverged);
    let mut refinement = Vec::new();
    let mut witness = 0usize;
    for &k in &opts.levels {
        let mut best = (0.0, 0usize);
        for (idx, (t, &(_, j))) in traces.iter().zip(&jobs).enumerate() {
            let r = t.cumulative(k) / deltas[j].powi(n as i32);
            if r > best.0 {
                best = (r, idx);
            }
        }
        witness = best.1;
        refinement.push((1.0 - 0.5f64.powi(k as i32), best.0));
    }
    let (wi, wj) = jobs[witness];
    let se = traces[witness].cumulative_error(k_max) / deltas[wj].powi(n as i32);
    let box_constant = RefinedStatistic::from_sequence(refinement, se, diverged);
    let integral_constant = integral_statistic(w, n, &xis, opts)?;
    Ok(CarlesonReport {
        ratio: if integral_constant > 0.0 { box_constant.value / integral_constant } else { 0.0 },
        witness_xi: (box_constant.value > 0.0).then(|| SpherePoint::from_raw(xis[wi].clone())),
        witness_delta: deltas[wj],
        box_constant,
        integral_constant,
    })
}

fn atomic_carleson(mu: &MeasureSpec, n: usize, deltas: &[f64], mut xis: Vec<Vec<C64>>, opts: &FunctionalOptions) -> Result<CarlesonReport> {
    let atoms: Vec<(Vec<C64>, f64)> = mu.atoms().unwrap_or_default().into_iter().map(|a| (a.point.coords().to_vec(), a.mass)).collect();
    if atoms.is_empty() {
        let levels: Vec<f64> = deltas.to_vec();
        return Ok(CarlesonReport {
            box_constant: RefinedStatistic::zero(&levels),
            integral_constant: 0.0,
            ratio: 0.0,
            witness_xi: None,
            witness_delta: 0.0,
        });
    }
    xis.extend(atoms.iter().filter(|(a, _)| norm_sqr(a) > 0.0).map(|(a, _)| {
        let r = norm_sqr(a).sqrt();
        a.iter().map(|c| c / r).collect::<Vec<C64>>()
    }));
    let levels = atomic_box_levels(n, &atoms, &xis, deltas);
    let refinement: Vec<(f64, f64)> = deltas.iter().zip(&levels).map(|(&d, l)| (d, l.0)).collect();
    let running: Vec<f64> = running_max(&refinement.iter().map(|r| r.1).collect::<Vec<_>>());
    // The exact supremum over all δ > 0 closes the sequence.
    let exact = atomic_box_levels(n, &atoms, &xis, &[0.0])[0];
    let mut seq: Vec<(f64, f64)> = deltas.iter().copied().zip(running).collect();
    seq.push((0.0, exact.0));
    let box_constant = RefinedStatistic::from_sequence(seq, 0.0, false);
    let w = Weighted { base: mu, density: None, radial: false, min_radius: 0.0 };
    let integral_constant = integral_statistic(&w, n, &xis[..opts.sphere_points.min(xis.len())], opts)?;
    Ok(CarlesonReport {
        ratio: if integral_constant > 0.0 { box_constant.value / integral_constant } else { 0.0 },
        witness_xi: (exact.0 > 0.0).then(|| SpherePoint::from_raw(xis[exact.2].clone())),
        witness_delta: exact.1,
        box_constant,
        integral_constant,
    })
}

/// `sup_a ∫ (1−|a|²)/|1−⟨z,a⟩|^{n+1} dμ(z)` over `a = ρξ`, ρ in the radii.
fn integral_statistic(w: &Weighted<'_>, n: usize, xis: &[Vec<C64>], opts: &FunctionalOptions) -> Result<f64> {
    let one = C64::new(1.0, 0.0);
    let points: Vec<Vec<C64>> = xis.iter().flat_map(|xi| opts.radii.iter().map(move |&rho| xi.iter().map(|c| c * rho).collect())).collect();
    if w.density.is_none() && w.base.is_atomic() {
        let atoms = w.base.atoms().unwrap_or_default();
        return Ok(points
            .par_iter()
            .map(|a| {
                let y = 1.0 - norm_sqr(a);
                atoms.iter().map(|t| t.mass * y / (one - crate::geometry::dot(t.point.coords(), a)).norm().powi(n as i32 + 1)).sum::<f64>()
            })
            .reduce(|| 0.0, f64::max));
    }
    let values: Vec<Result<f64>> = points
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let y = 1.0 - norm_sqr(a);
            let floor = w.min_radius * w.min_radius;
            let kernel = |z: &[C64]| {
                let d = if norm_sqr(z) <= floor { 0.0 } else { w.density.map_or(1.0, |f| f(z)) };
                if d == 0.0 {
                    0.0
                } else {
                    d * y / (one - crate::geometry::dot(z, a)).norm().powi(n as i32 + 1)
                }
            };
            let rho = norm_sqr(a).sqrt();
            let focus = Focus { point: SpherePoint::from_raw(a.iter().map(|c| c / rho).collect()), scale: 1.0 - rho };
            Ok(focused_integral(w.base, &focus, &kernel, opts.budget, child_seed(opts.seed, tag::CARLESON, 10_000 + i as u64))?.value)
        })
        .collect();
    let mut best = 0.0f64;
    for v in values {
        best = best.max(v?);
    }
    Ok(best)
}

/// Carleson statistics of `χ_{(ϱ𝔹ₙ)^c} ν_μ` with `ν_μ = μ̂_r^{q/(q−s)} dv_{α+n}`.
pub(crate) fn nu_carleson(mu: &MeasureSpec, params: &TentParams, rho: f64, opts: &FunctionalOptions) -> Result<CarlesonReport> {
    let expo = params.q_ratio()?;
    let h = hat(mu, params)?;
    let weight = params.alpha + params.n as f64;
    let density = |z: &[C64]| nu_value(&h, z, expo, weight);
    let dv = MeasureSpec::weighted_volume(0.0);
    carleson_of(&Weighted { base: &dv, density: Some(&density), radial: !mu.is_atomic(), min_radius: rho }, params.n, opts)
}

/// `‖χ_{(ϱ𝔹ₙ)^c}μ‖_CM` for each ϱ, with the verdict that each step
/// decreases it at least 2×.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VanishingReport {
    pub rhos: Vec<f64>,
    pub constants: Vec<f64>,
    pub decreasing: bool,
}

pub fn vanishing_carleson(mu: &MeasureSpec, n: usize, rhos: &[f64], opts: &FunctionalOptions) -> Result<VanishingReport> {
    ensure(!rhos.is_empty() && rhos.windows(2).all(|w| w[0] < w[1]) && rhos.iter().all(|r| (0.0..1.0).contains(r)), || {
        "ϱ values must increase within (0, 1)".into()
    })?;
    let constants: Vec<f64> = rhos
        .iter()
        .map(|&rho| carleson_constant(&mu.restrict_radial(rho, 1.0), n, opts).map(|c| c.box_constant.value))
        .collect::<Result<_>>()?;
    Ok(VanishingReport { decreasing: decreasing_by(&constants, 2.0), rhos: rhos.to_vec(), constants })
}

/// Whether every step divides the sequence by at least `factor`, zeros
/// counting as decreasing.
pub(crate) fn decreasing_by(values: &[f64], factor: f64) -> bool {
    values.windows(2).all(|w| w[1] == 0.0 || w[1] * factor <= w[0])
}

/// `L = pt/(s(p−t))`.
fn outer_exponent(params: &TentParams) -> Result<f64> {
    params.outer_exponent()
}

/// `U_μ(ξ) = (∫_{Γ(ξ)} μ̂_r^{q/(q−s)} dv_α)^{(q−s)/q}`.
pub fn u_functional(mu: &MeasureSpec, xi: &SpherePoint, params: &TentParams, opts: &FunctionalOptions) -> Result<IntegralEstimate> {
    require_case(params, &[CaseTag::Case3], "U_μ")?;
    let expo = params.q_ratio()?;
    let h = hat(mu, params)?;
    let alpha = params.alpha;
    let integrand = |z: &[C64]| nu_value(&h, z, expo, alpha);
    let region = RegionSpec::Koranyi { xi: xi.clone(), gamma: params.gamma };
    let dv = MeasureSpec::weighted_volume(0.0);
    let e = integrate(&dv, &region, &integrand, &IntegrationOptions::new(opts.budget, opts.seed))?;
    let power = 1.0 / expo;
    let value = e.value.max(0.0).powf(power);
    let std_error = if e.value > 0.0 { value * power * e.std_error / e.value } else { 0.0 };
    Ok(IntegralEstimate { value, std_error, ..e })
}

/// `‖U_{μ,ϱ}‖_{L^{pt/(s(p−t))}(𝕊ₙ)}`, the cone integrals restricted to
/// `|z| > ϱ`, refined by inner truncation.
pub fn u_norm(mu: &MeasureSpec, params: &TentParams, rho: f64, opts: &FunctionalOptions) -> Result<RefinedStatistic> {
    require_case(params, &[CaseTag::Case3], "U_μ")?;
    opts.validate()?;
    let expo = params.q_ratio()?;
    let l = outer_exponent(params)?;
    let h = hat(mu, params)?;
    if h.is_zero() {
        return Ok(RefinedStatistic::zero(&opts.levels.iter().map(|&k| 1.0 - 0.5f64.powi(k as i32)).collect::<Vec<_>>()));
    }
    let alpha = params.alpha;
    let rho2 = rho * rho;
    let integrand = |z: &[C64]| if norm_sqr(z) <= rho2 { 0.0 } else { nu_value(&h, z, expo, alpha) };
    let count = if mu.is_atomic() { opts.sphere_points } else { 2 };
    let sample = outer_sample(params.n, None, count, opts.seed);
    let topts = TentOptions::new(opts.budget * count, opts.seed).with_gamma(params.gamma).with_shells(opts.max_level()).with_outer(count);
    let dv = MeasureSpec::weighted_volume(0.0);
    let trace = cone_functional(&sample, &dv, &integrand, l / expo, l, &topts)?;
    let refinement: Vec<(f64, f64)> =
        opts.levels.iter().filter_map(|&k| trace.at_level(k).map(|(v, _)| (1.0 - 0.5f64.powi(k as i32), v))).collect();
    Ok(RefinedStatistic::from_sequence(refinement, trace.estimate.std_error, trace.estimate.diverged))
}

/// `V_μ(ξ) = sup_{z∈Γ(ξ)} μ̂_r(z)(1−|z|²)^{(q−s)(n+1+α)/q}` with the sup
/// over `z` at depths `1 − |z| ∈ [2^{−k}, 2^{1−k})` truncated at each level
/// of `opts.levels`; points with `|z| ≤ ϱ` are skipped.
pub fn v_functional(mu: &MeasureSpec, xi: &SpherePoint, params: &TentParams, rho: f64, opts: &FunctionalOptions) -> Result<Vec<f64>> {
    require_case(params, &[CaseTag::Case4], "V_μ")?;
    opts.validate()?;
    let h = hat(mu, params)?;
    Ok(v_levels(&h, xi.coords(), params, rho, opts, 0))
}

fn v_levels(h: &MuHat, xi: &[C64], params: &TentParams, rho: f64, opts: &FunctionalOptions, salt: u64) -> Vec<f64> {
    let k_max = opts.max_level();
    let sampler = ConeSampler { gamma: params.gamma, lo: rho, hi: 1.0, draws: opts.cone_draws, seed: opts.seed };
    let per_depth = sampler.per_depth(xi, k_max, salt, |z| g_value(h, z, cone_exponent(params)));
    let running = running_max(&per_depth);
    opts.levels.iter().map(|&k| running[k - 1]).collect()
}

/// Maximizes a function over `Γ_γ(ξ) ∩ {lo < |z| < hi}`, band by band.
pub(crate) struct ConeSampler {
    pub gamma: f64,
    pub lo: f64,
    pub hi: f64,
    pub draws: usize,
    pub seed: u64,
}

impl ConeSampler {
    /// Sup of `f` in each depth band `1 − |z| ∈ [2^{−k}, 2^{1−k})`, `k = 1..=k_max`.
    pub fn per_depth(&self, xi: &[C64], k_max: usize, salt: u64, f: impl Fn(&[C64]) -> f64) -> Vec<f64> {
        let frame = Frame::new(xi);
        let mut rng = stream(self.seed, tag::EXPERIMENT, salt);
        let mut out = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            let mut best = 0.0f64;
            // Log-spaced radii within the band, the axis point first.
            for i in 0..4 {
                let t = 0.5f64.powi(k as i32) * 2f64.powf(i as f64 / 4.0);
                let r = 1.0 - t;
                if r <= self.lo || r >= self.hi {
                    continue;
                }
                let y = 1.0 - r * r;
                best = best.max(f(&xi.iter().map(|c| c * r).collect::<Vec<_>>()));
                for _ in 0..self.draws {
                    if let Some(d) = sample_slice(&frame, r, t, 0.5 * self.gamma * y, 0.0, &mut rng) {
                        best = best.max(f(&d.zeta.iter().map(|c| c * r).collect::<Vec<_>>()));
                    }
                }
            }
            out.push(best);
        }
        out
    }
}

/// `‖V_{μ,ϱ}‖_{L^{pt/(s(p−t))}(𝕊ₙ)}` over uniformly sampled ξ.
pub fn v_norm(mu: &MeasureSpec, params: &TentParams, rho: f64, opts: &FunctionalOptions) -> Result<RefinedStatistic> {
    require_case(params, &[CaseTag::Case4], "V_μ")?;
    opts.validate()?;
    let l = outer_exponent(params)?;
    let h = hat(mu, params)?;
    let radii: Vec<f64> = opts.levels.iter().map(|&k| 1.0 - 0.5f64.powi(k as i32)).collect();
    if h.is_zero() {
        return Ok(RefinedStatistic::zero(&radii));
    }
    let count = if mu.is_atomic() { opts.sphere_points } else { 2 };
    let xis = sample_sphere(params.n, count, child_seed(opts.seed, tag::SPHERE, 7))?;
    let rows: Vec<Vec<f64>> = xis.par_iter().enumerate().map(|(i, xi)| v_levels(&h, xi.coords(), params, rho, opts, i as u64)).collect();
    let mut refinement = Vec::with_capacity(radii.len());
    let mut se = 0.0;
    for (j, &r) in radii.iter().enumerate() {
        let powers: Vec<f64> = rows.iter().map(|row| row[j].powf(l)).collect();
        let (mean, var) = crate::rng::mean_and_var(&powers);
        let value = mean.max(0.0).powf(1.0 / l);
        se = if mean > 0.0 { value * var.sqrt() / (l * mean) } else { 0.0 };
        refinement.push((r, value));
    }
    Ok(RefinedStatistic::from_sequence(refinement, se, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::measures::mu_hat;

    fn case1() -> TentParams {
        TentParams::new(1.0, 2.0, 2.0, 2.0, 0.0, 0.0, 1).unwrap()
    }

    #[test]
    fn g_zero_measure() {
        let z = BallPoint::real(&[0.5]).unwrap();
        assert_eq!(g_functional(&MeasureSpec::zero(), &z, &case1()).unwrap(), 0.0);
        let s = g_sup(&MeasureSpec::zero(), &case1(), &FunctionalOptions::new(1000, 1)).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.decision, Decision::Finite);
    }

    #[test]
    fn g_requires_case1() {
        let p = TentParams::new(2.0, 2.0, 1.0, 2.0, 0.0, 0.0, 1).unwrap();
        assert!(g_functional(&MeasureSpec::zero(), &BallPoint::origin(1).unwrap(), &p).is_err());
    }

    #[test]
    fn g_matches_mu_hat_power_law() {
        // μ = v_{β+n}; with equality in the p < t inclusion condition the
        // exponent of G vanishes and G tends to a constant.
        let p = TentParams::new(1.0, 2.0, 2.0, 2.0, 0.0, 1.0, 1).unwrap();
        let mu = MeasureSpec::weighted_volume(p.beta + 1.0);
        let opts = FunctionalOptions::new(1000, 1);
        let s = g_sup(&mu, &p, &opts).unwrap();
        let vals: Vec<f64> = s.refinement.iter().map(|r| r.1).collect();
        assert!(vals[3] / vals[1] < 10.0, "{vals:?}");
        assert_eq!(s.decision, Decision::Finite);
        let z = BallPoint::real(&[0.9]).unwrap();
        let direct = mu_hat(&mu, &z, p.r, p.alpha).unwrap() * 0.19f64.powf(g_exponent(&p));
        assert!((g_functional(&mu, &z, &p).unwrap() - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn g_grows_outside_the_region() {
        let p = TentParams::new(1.0, 2.0, 2.0, 2.0, 0.0, -0.5, 1).unwrap();
        let mu = MeasureSpec::weighted_volume(p.beta + 1.0);
        let s = g_sup(&mu, &p, &FunctionalOptions::new(1000, 1)).unwrap();
        let v = &s.refinement;
        assert!(v[3].1 >= 10.0 * v[1].1, "{v:?}");
        assert_eq!(s.decision, Decision::Infinite);
    }

    #[test]
    fn g_scales_linearly() {
        let lattice = build_lattice(1, 0.5, 2.0, 3).unwrap();
        let mu = MeasureSpec::LatticeMasses { lattice, exponent: 4.0, coefficient: 1.0 };
        let z = BallPoint::real(&[0.7]).unwrap();
        let a = g_functional(&mu, &z, &case1()).unwrap();
        let b = g_functional(&mu.scaled(3.5), &z, &case1()).unwrap();
        assert!(a > 0.0 && (b / a - 3.5).abs() < 1e-12);
    }

    #[test]
    fn carleson_point_mass_at_origin() {
        let mu = MeasureSpec::point_mass(BallPoint::origin(2).unwrap(), 0.7);
        let c = carleson_constant(&mu, 2, &FunctionalOptions::new(1000, 1)).unwrap();
        assert!((c.box_constant.value - 0.7).abs() < 1e-12);
        assert!(c.integral_constant > 0.0);
    }

    #[test]
    fn carleson_of_volume_is_finite() {
        let mu = MeasureSpec::weighted_volume(0.0);
        let opts = FunctionalOptions::new(20_000, 2);
        let c = carleson_constant(&mu, 1, &opts).unwrap();
        // v(B_δ) ≍ δ², so the box ratio is largest at δ = 1 or 2 and bounded.
        assert!(c.box_constant.value > 0.1 && c.box_constant.value <= 1.0 + 4.0 * c.box_constant.std_error);
        assert_eq!(c.box_constant.decision, Decision::Finite);
        assert!(c.ratio > 0.1 && c.ratio < 10.0, "{c:?}");
    }

    #[test]
    fn vanishing_for_volume() {
        let mu = MeasureSpec::weighted_volume(0.0);
        let v = vanishing_carleson(&mu, 1, &[0.9, 0.99, 0.999], &FunctionalOptions::new(20_000, 3)).unwrap();
        assert!(v.decreasing, "{v:?}");
    }

    #[test]
    fn u_norm_atomic_closed_form() {
        // Case 3 with a single atom: μ̂_r is the indicator of D(a, r) times a
        // power, so U(ξ)^{q/(q−s)} = ∫_{Γ(ξ) ∩ D(a,r)} μ̂^{q/(q−s)} dv_α.
        let p = TentParams::new(3.0, 2.0, 1.0, 2.0, 0.0, 0.0, 1).unwrap();
        let a = BallPoint::real(&[0.5]).unwrap();
        let mu = MeasureSpec::point_mass(a.clone(), 1.0);
        let xi = SpherePoint::real(&[1.0]).unwrap();
        let u = u_functional(&mu, &xi, &p, &FunctionalOptions::new(200_000, 4)).unwrap();
        // Oracle: the same integrand over D(a, r) ∩ Γ(ξ) by region quadrature.
        let h = MuHat::new(&mu, 1, p.r, p.alpha).unwrap();
        let integrand = |z: &[C64]| {
            let inside =
                crate::geometry::in_region(&BallPoint::new(z.to_vec()).unwrap(), &RegionSpec::Koranyi { xi: xi.clone(), gamma: 2.0 })
                    .unwrap();
            if inside {
                nu_value(&h, z, 2.0, 0.0)
            } else {
                0.0
            }
        };
        let region = RegionSpec::BergmanBall { center: a, r: p.r };
        let e = integrate(&MeasureSpec::weighted_volume(0.0), &region, &integrand, &IntegrationOptions::new(200_000, 5)).unwrap();
        let oracle = e.value.sqrt();
        let tol = 4.0 * (u.std_error + 0.5 * oracle * e.std_error / e.value);
        assert!((u.value - oracle).abs() < tol, "{} vs {oracle}", u.value);
    }

    #[test]
    fn v_is_monotone_under_truncation() {
        let p = TentParams::new(3.0, 1.0, 2.0, 2.0, 0.0, 0.0, 1).unwrap();
        let lattice = build_lattice(1, 0.5, 2.5, 5).unwrap();
        let mu = MeasureSpec::LatticeMasses { lattice, exponent: 2.0, coefficient: 1.0 };
        let xi = SpherePoint::real(&[0.6, 0.8]).unwrap_or_else(|_| SpherePoint::real(&[1.0]).unwrap());
        let opts = FunctionalOptions::new(1000, 6);
        let full = v_functional(&mu, &xi, &p, 0.0, &opts).unwrap();
        let cut = v_functional(&mu.restrict_radial(0.0, 0.8), &xi, &p, 0.0, &opts).unwrap();
        for (a, b) in full.iter().zip(&cut) {
            assert!(b <= a);
        }
        assert!(v_norm(&MeasureSpec::zero(), &p, 0.0, &opts).unwrap().value == 0.0);
    }
}
