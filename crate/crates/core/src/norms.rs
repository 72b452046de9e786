//! Tent quasi-norms, area operators, sequence tent norms, the duality
//! pairing and the factorization inequality.
//!
//! Outer integrals over 𝕊ₙ are stratified. A function with a [`Focus`] is
//! integrated over dyadic slices `|1 − ⟨ξ, ζ⟩| ∈ [2^{−j−1}, 2^{−j})` around its
//! focus `ζ`; otherwise ξ is drawn uniformly. Sequence norms use a sample
//! concentrated on the cones that meet the support of the sequence.

use crate::error::{contract, ensure, Error, Result};
use crate::functions::{Focus, HoloFunction};
use crate::geometry::{cap_measure_with_aperture, dot, norm_sqr, RegionSpec, SpherePoint, DEFAULT_APERTURE};
use crate::index::ConeIndex;
use crate::lattice::Lattice;
use crate::measures::{
    integrate, integrate_in_dim, integrate_traced, sample_sphere, IntegralEstimate, Integrand, IntegrationOptions, MeasureSpec,
    DEFAULT_SHELLS,
};
use crate::rng::{child_seed, mean_and_var, pairwise_sum, stream, tag};
use crate::sampling::{sample_slice, uniform_sphere, Frame};
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub use crate::functions::khinchine_ratio;

/// Default functional radius `r` of `μ̂_r`.
pub const DEFAULT_RADIUS: f64 = 0.5;

/// An integrability exponent of a sequence tent space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinite)
    }

    /// `1/e`, zero for `∞`.
    pub fn reciprocal(&self) -> f64 {
        match self {
            Exponent::Finite(x) => 1.0 / x,
            Exponent::Infinite => 0.0,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(x) => write!(f, "{x}"),
            Exponent::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Exponent> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Exponent::Infinite),
            other => {
                let x: f64 = other.parse().map_err(|_| Error::Contract(format!("`{other}` is not an exponent")))?;
                ensure(x > 0.0 && x.is_finite(), || format!("exponent {x} must be positive"))?;
                Ok(Exponent::Finite(x))
            }
        }
    }
}

/// Parameters of an embedding `𝓗𝓣^p_{q,α} → T^t_s(μ)` or an inclusion
/// `𝓗𝓣^p_{q,α} ⊂ 𝓗𝓣^t_{s,β}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TentParams {
    pub p: f64,
    pub q: f64,
    pub s: f64,
    pub t: f64,
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub gamma: f64,
    pub r: f64,
}

impl TentParams {
    pub fn new(p: f64, q: f64, s: f64, t: f64, alpha: f64, beta: f64, n: usize) -> Result<TentParams> {
        let params = TentParams { p, q, s, t, alpha, beta, n, gamma: DEFAULT_APERTURE, r: DEFAULT_RADIUS };
        params.validate()?;
        Ok(params)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<TentParams> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_r(mut self, r: f64) -> Result<TentParams> {
        self.r = r;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p", self.p), ("q", self.q), ("s", self.s), ("t", self.t)] {
            ensure(v > 0.0 && v.is_finite(), || format!("{name} = {v} must be positive and finite"))?;
        }
        ensure(self.n >= 1, || "n must be at least 1".into())?;
        let floor = -(self.n as f64) - 1.0;
        ensure(self.alpha > floor, || format!("α = {} must exceed −n−1 = {floor}", self.alpha))?;
        ensure(self.beta > floor, || format!("β = {} must exceed −n−1 = {floor}", self.beta))?;
        ensure(self.gamma > 1.0, || format!("aperture γ = {} must exceed 1", self.gamma))?;
        ensure(self.r > 0.0 && self.r < 1.0, || format!("radius r = {} must lie in (0, 1)", self.r))
    }

    /// `n + 1 + α`.
    pub fn a(&self) -> f64 {
        self.n as f64 + 1.0 + self.alpha
    }

    /// `n + 1 + β`.
    pub fn b(&self) -> f64 {
        self.n as f64 + 1.0 + self.beta
    }

    /// `q/(q−s)`, defined only for `q > s`.
    pub fn q_ratio(&self) -> Result<f64> {
        ensure(self.q > self.s, || format!("q/(q−s) needs q > s, got q = {}, s = {}", self.q, self.s))?;
        Ok(self.q / (self.q - self.s))
    }

    /// `pt/(s(p−t))`, defined only for `p > t`.
    pub fn outer_exponent(&self) -> Result<f64> {
        ensure(self.p > self.t, || format!("pt/(s(p−t)) needs p > t, got p = {}, t = {}", self.p, self.t))?;
        Ok(self.p * self.t / (self.s * (self.p - self.t)))
    }
}

/// A weighted sample of 𝕊ₙ: `∫ h dσ ≈ Σ_s mean_{i∈s}(w_i h(ξ_i))`.
#[derive(Clone, Debug)]
pub(crate) struct OuterSample {
    pub points: Vec<Vec<C64>>,
    pub weights: Vec<f64>,
    pub strata: Vec<usize>,
    pub stratum_count: usize,
}

impl OuterSample {
    /// Estimate and standard error of `∫ h dσ` given `h(ξ_i)`.
    pub fn integrate(&self, values: &[f64]) -> (f64, f64) {
        let mut groups = vec![Vec::new(); self.stratum_count];
        for ((s, w), v) in self.strata.iter().zip(&self.weights).zip(values) {
            groups[*s].push(if *w == 0.0 { 0.0 } else { w * v });
        }
        let parts: Vec<(f64, f64)> = groups.iter().map(|g| mean_and_var(g)).collect();
        let mean = pairwise_sum(&parts.iter().map(|p| p.0).collect::<Vec<_>>());
        let var: f64 = parts.iter().map(|p| p.1).sum();
        (mean, var.sqrt())
    }
}

/// Number of dyadic slices used around a focus of scale `scale`.
fn focus_depth(scale: f64) -> usize {
    if scale > 0.0 {
        ((1.0 / scale).log2().ceil() as i64 + 4).clamp(2, 40) as usize
    } else {
        DEFAULT_SHELLS + 2
    }
}

pub(crate) fn outer_sample(n: usize, focus: Option<&Focus>, count: usize, seed: u64) -> OuterSample {
    let Some(focus) = focus else {
        let mut rng = stream(seed, tag::OUTER, 0);
        let points: Vec<Vec<C64>> = (0..count).map(|_| uniform_sphere(n, &mut rng)).collect();
        return OuterSample { weights: vec![1.0; points.len()], strata: vec![0; points.len()], points, stratum_count: 1 };
    };
    let depth = focus_depth(focus.scale);
    let frame = Frame::new(focus.point.coords());
    let per = (count / (depth + 1)).max(8);
    let mut out = OuterSample { points: Vec::new(), weights: Vec::new(), strata: Vec::new(), stratum_count: depth + 1 };
    for j in 0..=depth {
        let r_out = 2.0 * 0.5f64.powi(j as i32);
        let r_in = if j == depth { 0.0 } else { r_out / 2.0 };
        let mut rng = stream(seed, tag::OUTER, j as u64 + 1);
        for _ in 0..per {
            match sample_slice(&frame, 1.0, 0.0, r_out, r_in, &mut rng) {
                Some(d) => {
                    out.points.push(d.zeta);
                    out.weights.push(d.weight);
                }
                None => {
                    out.points.push(focus.point.coords().to_vec());
                    out.weights.push(0.0);
                }
            }
            out.strata.push(j);
        }
    }
    out
}

/// Knobs of [`tent_norm_traced`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TentOptions {
    /// Total integrand evaluations (continuous measures) or outer samples
    /// times 100 (atomic measures).
    pub budget: usize,
    pub seed: u64,
    pub gamma: f64,
    /// Inner truncation levels; the innermost radius is `1 − 2^{−shells}`.
    pub shells: usize,
    /// Outer sample size; derived from the budget when `None`.
    pub outer: Option<usize>,
}

impl TentOptions {
    pub fn new(budget: usize, seed: u64) -> TentOptions {
        TentOptions { budget, seed, gamma: DEFAULT_APERTURE, shells: DEFAULT_SHELLS, outer: None }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_shells(mut self, shells: usize) -> Self {
        self.shells = shells;
        self
    }

    pub fn with_outer(mut self, outer: usize) -> Self {
        self.outer = Some(outer);
        self
    }
}

/// A norm estimate with its values under inner truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TentTrace {
    pub estimate: IntegralEstimate,
    /// `(radius, value, std_error)` with the cone integrals restricted to
    /// `|z| ≤ radius = 1 − 2^{−k}`, `k = 1, …, shells`.
    pub truncated: Vec<(f64, f64, f64)>,
}

impl TentTrace {
    /// Value truncated at `1 − 2^{−k}`.
    pub fn at_level(&self, k: usize) -> Option<(f64, f64)> {
        self.truncated.get(k.checked_sub(1)?).map(|t| (t.1, t.2))
    }
}

fn resolve_dim(f: &HoloFunction, mu: &MeasureSpec) -> Result<usize> {
    match (f.dim(), mu.dim()) {
        (Some(a), Some(b)) if a != b => Err(Error::Dimension { expected: a, got: b }),
        (Some(a), _) | (None, Some(a)) => Ok(a),
        (None, None) => contract("the dimension is fixed by neither the function nor the measure"),
    }
}

/// `(S)^{1/p}` with the delta-method error.
fn root(value: f64, se: f64, p: f64) -> (f64, f64) {
    if value <= 0.0 {
        return (0.0, se.powf(1.0 / p).min(se));
    }
    let v = value.powf(1.0 / p);
    (v, v * se / (p * value))
}

fn declared_growing(values: &[f64]) -> bool {
    let k = values.len();
    k >= 4 && values[k - 4..].windows(2).all(|w| w[0] > 0.0 && w[1] > 2.0 * w[0])
}

/// Atomic inner integrals: `v_k = |f(a_k)|^q m_k/(1−|a_k|²)ⁿ` binned by shell.
struct AtomicInner {
    cones: ConeIndex,
    values: Vec<f64>,
    shells: Vec<usize>,
}

impl AtomicInner {
    fn new(f: &HoloFunction, mu: &MeasureSpec, exponent: f64, gamma: f64, shells: usize) -> Result<AtomicInner> {
        let atoms = mu.atoms().unwrap_or_default();
        let mut values = Vec::with_capacity(atoms.len());
        let mut bins = Vec::with_capacity(atoms.len());
        for a in &atoms {
            let z = a.point.coords();
            let v = f.eval_raw(z).norm().powf(exponent) * a.mass / a.point.defect().powi(z.len() as i32);
            if !v.is_finite() {
                return Err(Error::Integrand { value: v, point: a.point.to_pairs() });
            }
            values.push(v);
            let depth = 1.0 - a.point.norm();
            bins.push(if depth <= 0.0 { shells - 1 } else { ((-depth.log2()).floor().max(0.0) as usize).min(shells - 1) });
        }
        let cones = ConeIndex::new(atoms.iter().map(|a| a.point.coords().to_vec()).collect(), gamma);
        Ok(AtomicInner { cones, values, shells: bins })
    }

    fn trace(&self, xi: &[C64], shells: usize) -> Vec<f64> {
        let mut out = vec![0.0; shells];
        for k in self.cones.members(xi) {
            out[self.shells[k]] += self.values[k];
        }
        out
    }
}

/// `‖f‖_{T^p_q(μ)}` with its truncation trace.
pub fn tent_norm_traced(f: &HoloFunction, mu: &MeasureSpec, p: f64, q: f64, opts: &TentOptions) -> Result<TentTrace> {
    ensure(p > 0.0 && q > 0.0, || format!("exponents p = {p}, q = {q} must be positive"))?;
    ensure(opts.gamma > 1.0, || format!("aperture γ = {} must exceed 1", opts.gamma))?;
    ensure((1..=60).contains(&opts.shells), || "shells must lie in 1..=60".into())?;
    f.validate()?;
    mu.validate()?;
    let n = resolve_dim(f, mu)?;
    let k_max = opts.shells;
    let atomic = mu.is_atomic();
    let outer_count = opts.outer.unwrap_or(if atomic { (opts.budget / 100).clamp(64, 8192) } else { (opts.budget / 2000).clamp(16, 1024) });
    let focus = f.focus();
    let sample = outer_sample(n, focus.as_ref(), outer_count, opts.seed);

    if atomic {
        let inner = AtomicInner::new(f, mu, q, opts.gamma, k_max)?;
        let rows: Vec<Vec<f64>> = sample
            .points
            .par_iter()
            .zip(&sample.weights)
            .map(|(xi, &w)| if w == 0.0 { vec![0.0; k_max] } else { inner.trace(xi, k_max) })
            .collect();
        let mut t = assemble_trace(&sample, &rows, p / q, p);
        t.estimate.samples_used = sample.points.len();
        t.estimate.truncation_radius = 1.0;
        return Ok(t);
    }
    let integrand = |z: &[C64]| f.eval_raw(z).norm().powf(q) / (1.0 - norm_sqr(z)).powi(n as i32);
    cone_functional(&sample, mu, &integrand, p / q, p, opts)
}

/// `(∫_{𝕊ₙ} (∫_{Γ_γ(ξ)} h dμ)^power dσ)^{1/root}` over a prepared outer
/// sample, traced under inner truncation.
pub(crate) fn cone_functional(
    sample: &OuterSample,
    mu: &MeasureSpec,
    integrand: &Integrand<'_>,
    power: f64,
    root_exp: f64,
    opts: &TentOptions,
) -> Result<TentTrace> {
    let k_max = opts.shells;
    let inner_budget = (opts.budget / sample.points.len().max(1)).max(1000);
    let rows: Vec<Result<(Vec<f64>, bool)>> = sample
        .points
        .par_iter()
        .zip(&sample.weights)
        .enumerate()
        .map(|(i, (xi, &w))| {
            if w == 0.0 {
                return Ok((vec![0.0; k_max], false));
            }
            let region = RegionSpec::Koranyi { xi: SpherePoint::from_raw(xi.clone()), gamma: opts.gamma };
            let io = IntegrationOptions::new(inner_budget, child_seed(opts.seed, tag::INNER, i as u64)).with_shells(k_max);
            let t = integrate_traced(mu, &region, integrand, &io)?;
            Ok((t.shell_values, t.estimate.diverged))
        })
        .collect();
    let mut shell_rows = Vec::with_capacity(rows.len());
    let mut inner_diverged = false;
    for r in rows {
        let (row, d) = r?;
        inner_diverged |= d;
        shell_rows.push(row);
    }
    let mut t = assemble_trace(sample, &shell_rows, power, root_exp);
    t.estimate.samples_used = sample.points.len() * inner_budget;
    t.estimate.diverged |= inner_diverged;
    Ok(t)
}

/// Outer integration of per-ξ shell rows, for every truncation level.
fn assemble_trace(sample: &OuterSample, rows: &[Vec<f64>], power: f64, root_exp: f64) -> TentTrace {
    let k_max = rows.first().map_or(0, |r| r.len());
    let mut truncated = Vec::with_capacity(k_max);
    let mut raw = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let h: Vec<f64> = rows.iter().map(|row| pairwise_sum(&row[..k]).max(0.0).powf(power)).collect();
        let (s, se) = sample.integrate(&h);
        raw.push(s);
        let (v, e) = root(s, se, root_exp);
        truncated.push((1.0 - 0.5f64.powi(k as i32), v, e));
    }
    let (value, std_error) = truncated.last().map_or((0.0, 0.0), |t| (t.1, t.2));
    TentTrace {
        estimate: IntegralEstimate {
            value,
            std_error,
            samples_used: rows.len(),
            truncation_radius: 1.0 - 0.5f64.powi(k_max as i32),
            diverged: declared_growing(&raw),
        },
        truncated,
    }
}

/// `‖f‖_{T^p_q(μ)} = (∫_{𝕊ₙ} (∫_{Γ_γ(ξ)} |f|^q dμ/(1−|z|²)ⁿ)^{p/q} dσ)^{1/p}`.
pub fn tent_norm(f: &HoloFunction, mu: &MeasureSpec, p: f64, q: f64, gamma: f64, budget: usize, seed: u64) -> Result<IntegralEstimate> {
    tent_norm_traced(f, mu, p, q, &TentOptions::new(budget, seed).with_gamma(gamma)).map(|t| t.estimate)
}

/// `A_{μ,s}f(ξ) = (∫_{Γ_γ(ξ)} |f|^s dμ/(1−|z|²)ⁿ)^{1/s}`.
pub fn area_operator(
    f: &HoloFunction,
    mu: &MeasureSpec,
    s: f64,
    xi: &SpherePoint,
    gamma: f64,
    budget: usize,
    seed: u64,
) -> Result<IntegralEstimate> {
    ensure(s > 0.0, || format!("s = {s} must be positive"))?;
    f.validate()?;
    let n = xi.n();
    if let Some(d) = f.dim() {
        ensure(d == n, || format!("function has n = {d}, ξ has n = {n}"))?;
    }
    let region = RegionSpec::Koranyi { xi: xi.clone(), gamma };
    let integrand = |z: &[C64]| f.eval_raw(z).norm().powf(s) / (1.0 - norm_sqr(z)).powi(n as i32);
    let est = integrate(mu, &region, &integrand, &IntegrationOptions::new(budget, seed))?;
    let (value, std_error) = root(est.value, est.std_error, s);
    Ok(IntegralEstimate { value, std_error, ..est })
}

/// `‖A_{μ,s}f‖_{L^t(𝕊ₙ)}` from `count` uniformly sampled ξ, each evaluated
/// with [`area_operator`].
#[allow(clippy::too_many_arguments)]
pub fn area_operator_lt_norm(
    f: &HoloFunction,
    mu: &MeasureSpec,
    s: f64,
    t: f64,
    gamma: f64,
    count: usize,
    budget: usize,
    seed: u64,
) -> Result<IntegralEstimate> {
    ensure(t > 0.0, || format!("t = {t} must be positive"))?;
    ensure(count >= 2, || "at least two boundary points are needed".into())?;
    let n = resolve_dim(f, mu)?;
    let xis = sample_sphere(n, count, child_seed(seed, tag::SPHERE, 1))?;
    let per = (budget / count).max(1000);
    let values: Vec<Result<IntegralEstimate>> =
        xis.par_iter().enumerate().map(|(i, xi)| area_operator(f, mu, s, xi, gamma, per, child_seed(seed, tag::INNER, i as u64))).collect();
    let mut powers = Vec::with_capacity(count);
    let mut diverged = false;
    for v in values {
        let v = v?;
        diverged |= v.diverged;
        powers.push(v.value.powf(t));
    }
    let (mean, var) = mean_and_var(&powers);
    let (value, std_error) = root(mean, var.sqrt(), t);
    Ok(IntegralEstimate {
        value,
        std_error,
        samples_used: per * count,
        truncation_radius: 1.0 - 0.5f64.powi(DEFAULT_SHELLS as i32),
        diverged,
    })
}

/// `∫_{𝕊ₙ}`-free weighted integral `∫_{𝔹ⁿ} |f|^p (1−|z|²)^w dv`.
///
/// The ball is split into the shells `B_{2^{1−j}}(ζ) \ B_{2^{−j}}(ζ)` of
/// non-isotropic balls about the focus `ζ` of `f` when it has one.
pub fn weighted_lp_integral(f: &HoloFunction, p: f64, w: f64, n: usize, budget: usize, seed: u64) -> Result<IntegralEstimate> {
    ensure(p > 0.0, || format!("p = {p} must be positive"))?;
    ensure(w > -1.0, || format!("weight exponent {w} must exceed −1"))?;
    f.validate()?;
    if let Some(d) = f.dim() {
        ensure(d == n, || format!("function has n = {d}, requested n = {n}"))?;
    }
    let mu = MeasureSpec::weighted_volume(w);
    let Some(focus) = f.focus() else {
        let integrand = |z: &[C64]| f.eval_raw(z).norm().powf(p);
        return integrate_in_dim(&mu, n, &RegionSpec::WholeBall, &integrand, &IntegrationOptions::new(budget, seed)).map(|t| t.estimate);
    };
    let integrand = |z: &[C64]| f.eval_raw(z).norm().powf(p);
    focused_integral(&mu, &focus, &integrand, budget, seed)
}

/// `∫_{𝔹ⁿ} h dμ` split into the shells `B_{2^{1−j}}(ζ) \ B_{2^{−j}}(ζ)` of
/// non-isotropic balls about the focus `ζ`.
pub(crate) fn focused_integral(
    mu: &MeasureSpec,
    focus: &Focus,
    integrand: &Integrand<'_>,
    budget: usize,
    seed: u64,
) -> Result<IntegralEstimate> {
    let depth = focus_depth(focus.scale);
    let per = (budget / (depth + 1)).max(1000);
    let zeta = focus.point.coords();
    let parts: Vec<Result<IntegralEstimate>> = (0..=depth)
        .into_par_iter()
        .map(|j| {
            let outer = 2.0 * 0.5f64.powi(j as i32);
            let inner = if j == depth { 0.0 } else { outer / 2.0 };
            let masked = |z: &[C64]| if (C64::new(1.0, 0.0) - dot(z, zeta)).norm() < inner { 0.0 } else { integrand(z) };
            let region = RegionSpec::NonisotropicBall { xi: focus.point.clone(), delta: outer };
            integrate(mu, &region, &masked, &IntegrationOptions::new(per, child_seed(seed, tag::INNER, j as u64)))
        })
        .collect();
    let mut values = Vec::new();
    let mut var = 0.0;
    let mut used = 0;
    let mut diverged = false;
    for part in parts {
        let e = part?;
        values.push(e.value);
        var += e.std_error * e.std_error;
        used += e.samples_used;
        diverged |= e.diverged;
    }
    Ok(IntegralEstimate {
        value: pairwise_sum(&values),
        std_error: var.sqrt(),
        samples_used: used,
        truncation_radius: 1.0 - 0.5f64.powi(DEFAULT_SHELLS as i32),
        diverged,
    })
}

/// `‖f‖_{A^p_w} = (∫ |f|^p (1−|z|²)^w dv)^{1/p}`.
pub fn bergman_norm(f: &HoloFunction, p: f64, w: f64, n: usize, budget: usize, seed: u64) -> Result<IntegralEstimate> {
    let e = weighted_lp_integral(f, p, w, n, budget, seed)?;
    let (value, std_error) = root(e.value, e.std_error, p);
    Ok(IntegralEstimate { value, std_error, ..e })
}

/// A sample of 𝕊ₙ adapted to sequences supported on a subset of a lattice.
///
/// For each support point `a_k`, draws `ξ ∈ I(a_k)` and weights them by
/// `1/N(ξ)`, `N(ξ)` being the number of support points in `Γ_γ(ξ)`; the sets
/// `I(a_k)` then partition the union of cones exactly, so
/// `∫ h dσ = Σ_k mean(w·h/N)` for every `h` vanishing off that union.
#[derive(Clone, Debug)]
pub struct ConeSample {
    gamma: f64,
    members: Vec<Vec<usize>>,
    weights: Vec<f64>,
    groups: Vec<usize>,
    group_count: usize,
    support: Vec<bool>,
    vacuous_fraction: f64,
}

/// Uniform boundary points used to measure the fraction of empty cones.
const VACUOUS_PROBES: usize = 2000;

impl ConeSample {
    pub fn new(lattice: &Lattice, support: &[bool], per_atom: usize, gamma: f64, seed: u64) -> Result<ConeSample> {
        ensure(support.len() == lattice.len(), || {
            format!("support mask has {} entries for {} lattice points", support.len(), lattice.len())
        })?;
        ensure(gamma > 1.0, || format!("aperture γ = {gamma} must exceed 1"))?;
        ensure(per_atom >= 1, || "per_atom must be positive".into())?;
        let n = lattice.n();
        let coords: Vec<Vec<C64>> = lattice.points().iter().map(|p| p.coords().to_vec()).collect();
        let cones = ConeIndex::new(coords.clone(), gamma);
        let atoms: Vec<usize> = (0..lattice.len()).filter(|&k| support[k]).collect();
        let draws: Vec<Vec<(Vec<usize>, f64)>> = atoms
            .par_iter()
            .map(|&k| {
                let a = &coords[k];
                let rho = norm_sqr(a).sqrt();
                let mut rng = stream(seed, tag::CAP, k as u64);
                let y = 1.0 - norm_sqr(a);
                let frame = if rho > 0.0 {
                    Frame::new(&a.iter().map(|c| c / rho).collect::<Vec<_>>())
                } else {
                    Frame::new(SpherePoint::e1(n).expect("n ≥ 1").coords())
                };
                (0..per_atom)
                    .map(|_| match sample_slice(&frame, rho, 1.0 - rho, 0.5 * gamma * y, 0.0, &mut rng) {
                        Some(d) => {
                            let members = cones.members(&d.zeta);
                            let count = members.iter().filter(|&&j| support[j]).count().max(1);
                            (members, d.weight / count as f64)
                        }
                        None => (Vec::new(), 0.0),
                    })
                    .collect()
            })
            .collect();
        let mut sample = ConeSample {
            gamma,
            members: Vec::new(),
            weights: Vec::new(),
            groups: Vec::new(),
            group_count: atoms.len(),
            support: support.to_vec(),
            vacuous_fraction: 0.0,
        };
        for (g, list) in draws.into_iter().enumerate() {
            for (m, w) in list {
                sample.members.push(m);
                sample.weights.push(w);
                sample.groups.push(g);
            }
        }
        let mut rng = stream(seed, tag::OUTER, u64::MAX);
        let empty = (0..VACUOUS_PROBES).filter(|_| cones.members(&uniform_sphere(n, &mut rng)).is_empty()).count();
        sample.vacuous_fraction = empty as f64 / VACUOUS_PROBES as f64;
        Ok(sample)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Fraction of uniformly drawn ξ whose cone contains no lattice point.
    pub fn vacuous_fraction(&self) -> f64 {
        self.vacuous_fraction
    }

    fn integrate(&self, h: impl Fn(&[usize]) -> f64) -> (f64, f64) {
        let mut groups = vec![Vec::new(); self.group_count];
        for ((m, w), g) in self.members.iter().zip(&self.weights).zip(&self.groups) {
            groups[*g].push(if *w == 0.0 { 0.0 } else { w * h(m) });
        }
        let parts: Vec<(f64, f64)> = groups.iter().map(|g| mean_and_var(g)).collect();
        (pairwise_sum(&parts.iter().map(|p| p.0).collect::<Vec<_>>()), parts.iter().map(|p| p.1).sum::<f64>().sqrt())
    }
}

/// Estimate of a sequence tent norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeqNormEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Fraction of sampled cones containing no lattice point; these
    /// contribute 0.
    pub vacuous_fraction: f64,
}

fn check_exponents(p: Exponent, q: Exponent) -> Result<()> {
    for e in [p, q] {
        if let Exponent::Finite(x) = e {
            ensure(x > 0.0 && x.is_finite(), || format!("exponent {x} must be positive"))?;
        }
    }
    Ok(())
}

/// Sequence tent norm on a precomputed [`ConeSample`] whose support covers
/// that of `c`. `(∞, ∞)` is the supremum `max_k |c_k|`.
pub fn seq_tent_norm_on(
    sample: &ConeSample,
    lattice: &Lattice,
    c: &[C64],
    p: Exponent,
    q: Exponent,
    carleson_candidates: usize,
    seed: u64,
) -> Result<SeqNormEstimate> {
    ensure(c.len() == lattice.len(), || format!("{} coefficients for {} lattice points", c.len(), lattice.len()))?;
    ensure(c.iter().all(|x| x.re.is_finite() && x.im.is_finite()), || "coefficients must be finite".into())?;
    check_exponents(p, q)?;
    ensure(c.iter().zip(&sample.support).all(|(x, &s)| s || x.norm() == 0.0), || {
        "the cone sample does not cover the support of the sequence".into()
    })?;
    let vacuous_fraction = sample.vacuous_fraction;
    match (p, q) {
        (Exponent::Finite(p), Exponent::Finite(q)) => {
            let (s, se) = sample.integrate(|m| m.iter().map(|&k| c[k].norm().powf(q)).sum::<f64>().powf(p / q));
            let (value, std_error) = root(s, se, p);
            Ok(SeqNormEstimate { value, std_error, vacuous_fraction })
        }
        (Exponent::Finite(p), Exponent::Infinite) => {
            let (s, se) = sample.integrate(|m| m.iter().map(|&k| c[k].norm()).fold(0.0, f64::max).powf(p));
            let (value, std_error) = root(s, se, p);
            Ok(SeqNormEstimate { value, std_error, vacuous_fraction })
        }
        (Exponent::Infinite, Exponent::Finite(q)) => {
            let n = lattice.n();
            let atoms: Vec<(Vec<C64>, f64)> = lattice
                .points()
                .iter()
                .zip(c)
                .filter(|(_, x)| x.norm() > 0.0)
                .map(|(a, x)| (a.coords().to_vec(), x.norm().powf(q) * a.defect().powi(n as i32)))
                .collect();
            let cm = carleson_constant_atomic(n, &atoms, carleson_candidates, seed)?;
            Ok(SeqNormEstimate { value: cm.value.powf(1.0 / q), std_error: 0.0, vacuous_fraction })
        }
        (Exponent::Infinite, Exponent::Infinite) => {
            Ok(SeqNormEstimate { value: c.iter().map(|x| x.norm()).fold(0.0, f64::max), std_error: 0.0, vacuous_fraction })
        }
    }
}

/// `‖c‖_{T^p_q(Z)}` for the three cases `(p<∞, q<∞)`, `(p<∞, q=∞)` and
/// `(p=∞, q<∞)`, the last through the Carleson constant of
/// `μ_c = Σ |c_k|^q (1−|a_k|²)ⁿ δ_{a_k}`.
pub fn seq_tent_norm(c: &[C64], lattice: &Lattice, p: Exponent, q: Exponent, sphere_budget: usize, seed: u64) -> Result<SeqNormEstimate> {
    ensure(!(p.is_infinite() && q.is_infinite()), || "T^∞_∞(Z) is not a tent space of the theory".into())?;
    ensure(c.len() == lattice.len(), || format!("{} coefficients for {} lattice points", c.len(), lattice.len()))?;
    let support: Vec<bool> = c.iter().map(|x| x.norm() > 0.0).collect();
    let active = support.iter().filter(|&&s| s).count().max(1);
    let per_atom = (sphere_budget / active).clamp(16, 4096);
    let sample = ConeSample::new(lattice, &support, per_atom, DEFAULT_APERTURE, seed)?;
    seq_tent_norm_on(&sample, lattice, c, p, q, sphere_budget, seed)
}

/// A Carleson constant `sup_{ξ,δ} μ(B_δ(ξ))/δⁿ` with its maximizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonEstimate {
    pub value: f64,
    pub std_error: f64,
    pub witness_xi: Option<SpherePoint>,
    pub witness_delta: f64,
    /// Number of `(ξ, δ)` pairs examined.
    pub candidates: usize,
}

/// `sup_{ξ,δ} μ(B_δ(ξ))/δⁿ` for a finite atomic measure.
///
/// For a fixed ξ the ratio only jumps at `δ ↓ |1 − ⟨a_k, ξ⟩|`, so the
/// supremum over δ is taken exactly. ξ ranges over the atom directions and
/// `extra` uniformly sampled points.
pub fn carleson_constant_atomic(n: usize, atoms: &[(Vec<C64>, f64)], extra: usize, seed: u64) -> Result<CarlesonEstimate> {
    ensure(atoms.iter().all(|(a, m)| a.len() == n && *m >= 0.0 && m.is_finite()), || {
        "atoms must have dimension n and finite nonnegative masses".into()
    })?;
    let mut xis: Vec<Vec<C64>> = atoms
        .iter()
        .filter(|(a, m)| *m > 0.0 && norm_sqr(a) > 0.0)
        .map(|(a, _)| {
            let r = norm_sqr(a).sqrt();
            a.iter().map(|c| c / r).collect()
        })
        .collect();
    if xis.is_empty() || extra > 0 {
        xis.extend(sample_sphere(n, extra.max(1), child_seed(seed, tag::CARLESON, 0))?.into_iter().map(|s| s.coords().to_vec()));
    }
    let best = atomic_box_levels(n, atoms, &xis, &[0.0])[0];
    Ok(CarlesonEstimate {
        value: best.0,
        std_error: 0.0,
        witness_xi: (best.0 > 0.0).then(|| SpherePoint::from_raw(xis[best.2].clone())),
        witness_delta: best.1,
        candidates: xis.len() * atoms.len(),
    })
}

/// For each threshold `h`, `max_{ξ ∈ xis} sup_{δ ≥ h} μ(B_δ(ξ))/δⁿ` of an
/// atomic measure as `(value, δ, index of ξ)`. For a fixed ξ the ratio only
/// jumps at `δ ↓ |1 − ⟨a_k, ξ⟩|`, so each supremum is exact.
pub(crate) fn atomic_box_levels(n: usize, atoms: &[(Vec<C64>, f64)], xis: &[Vec<C64>], thresholds: &[f64]) -> Vec<(f64, f64, usize)> {
    let one = C64::new(1.0, 0.0);
    let per_xi: Vec<Vec<(f64, f64)>> = xis
        .par_iter()
        .map(|xi| {
            let mut d: Vec<(f64, f64)> = atoms.iter().filter(|(_, m)| *m > 0.0).map(|(a, m)| ((one - dot(a, xi)).norm(), *m)).collect();
            d.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut best = vec![(0.0, 0.0); thresholds.len()];
            let mut acc = 0.0;
            let mut i = 0;
            while i < d.len() {
                let delta = d[i].0;
                while i < d.len() && d[i].0 == delta {
                    acc += d[i].1;
                    i += 1;
                }
                let ratio = if delta > 0.0 { acc / delta.powi(n as i32) } else { f64::INFINITY };
                for (b, &h) in best.iter_mut().zip(thresholds) {
                    // B_δ with δ ≥ h just above `delta` has the same mass.
                    let (eff, r) = if delta >= h { (delta, ratio) } else { (h, acc / h.powi(n as i32)) };
                    if r > b.0 {
                        *b = (r, eff);
                    }
                }
            }
            best
        })
        .collect();
    (0..thresholds.len())
        .map(|l| per_xi.iter().enumerate().map(|(i, b)| (b[l].0, b[l].1, i)).max_by(|a, b| a.0.total_cmp(&b.0)).unwrap_or((0.0, 0.0, 0)))
        .collect()
}

/// `⟨c, d⟩ = Σ c_k conj(d_k) (1−|a_k|²)ⁿ`.
pub fn pairing(c: &[C64], d: &[C64], lattice: &Lattice) -> Result<C64> {
    ensure(c.len() == lattice.len() && d.len() == lattice.len(), || {
        format!("pairing needs {} coefficients on each side, got {} and {}", lattice.len(), c.len(), d.len())
    })?;
    let n = lattice.n() as i32;
    let terms: Vec<C64> = lattice.points().iter().zip(c.iter().zip(d)).map(|(a, (x, y))| x * y.conj() * a.defect().powi(n)).collect();
    Ok(C64::new(
        pairwise_sum(&terms.iter().map(|t| t.re).collect::<Vec<_>>()),
        pairwise_sum(&terms.iter().map(|t| t.im).collect::<Vec<_>>()),
    ))
}

/// The Fubini–Hölder constant `C = max_k (1−|a_k|²)ⁿ/σ(I(a_k))` over the
/// points with a nonempty `I(a_k)`, from sampled cap measures, together
/// with the mask of those points.
pub fn holder_constant(lattice: &Lattice, gamma: f64, samples: usize, seed: u64) -> Result<(f64, Vec<bool>)> {
    let n = lattice.n() as i32;
    let caps: Vec<Result<f64>> = lattice
        .points()
        .par_iter()
        .enumerate()
        .map(|(k, a)| cap_measure_with_aperture(a, gamma, samples, child_seed(seed, tag::CAP, k as u64)).map(|c| c.value))
        .collect();
    let mut c = 0.0f64;
    let mut mask = Vec::with_capacity(caps.len());
    for (a, cap) in lattice.points().iter().zip(caps) {
        let cap = cap?;
        mask.push(cap > 0.0);
        if cap > 0.0 {
            c = c.max(a.defect().powi(n) / cap);
        }
    }
    Ok((c, mask))
}

/// Both sides of `|⟨c, d⟩| ≤ C·‖c‖_{T^p_q}·‖d‖_{T^{p'}_{q'}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub pairing: f64,
    pub constant: f64,
    pub norm_c: f64,
    pub norm_d: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Hölder bound for the pairing, `1 < p, q < ∞`. Both norms use one
/// [`ConeSample`]; coefficients at points in no cone must vanish.
pub fn pairing_holder_check(c: &[C64], d: &[C64], lattice: &Lattice, p: f64, q: f64, per_atom: usize, seed: u64) -> Result<PairingReport> {
    ensure(p > 1.0 && q > 1.0 && p.is_finite() && q.is_finite(), || format!("need 1 < p, q < ∞, got {p}, {q}"))?;
    let (constant, visible) = holder_constant(lattice, DEFAULT_APERTURE, 4000, seed)?;
    ensure(c.iter().zip(d).zip(&visible).all(|((x, y), &v)| v || (x.norm() == 0.0 || y.norm() == 0.0)), || {
        "coefficients at points outside every cone must vanish".into()
    })?;
    let pairing = pairing(c, d, lattice)?.norm();
    let support: Vec<bool> = c.iter().zip(d).map(|(x, y)| x.norm() > 0.0 || y.norm() > 0.0).collect();
    let sample = ConeSample::new(lattice, &support, per_atom, DEFAULT_APERTURE, seed)?;
    let (pc, qc) = (p / (p - 1.0), q / (q - 1.0));
    let norm_c = seq_tent_norm_on(&sample, lattice, c, Exponent::Finite(p), Exponent::Finite(q), 0, seed)?.value;
    let norm_d = seq_tent_norm_on(&sample, lattice, d, Exponent::Finite(pc), Exponent::Finite(qc), 0, seed)?.value;
    let bound = constant * norm_c * norm_d;
    Ok(PairingReport { pairing, constant, norm_c, norm_d, bound, ratio: if bound > 0.0 { pairing / bound } else { 0.0 } })
}

/// Exponents `(p₀,q₀), (p₁,q₁), (p₂,q₂)` of the factorization inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductExponents {
    pub p0: Exponent,
    pub q0: Exponent,
    pub p1: Exponent,
    pub q1: Exponent,
    pub p2: Exponent,
    pub q2: Exponent,
}

impl ProductExponents {
    /// Checks `p₀ ≤ p₁, p₂`, `q₀ ≤ q₁, q₂`, `1/p_j + 1/q_j > 0` and
    /// `1/p₁ + 1/p₂ = 1/p₀`, `1/q₁ + 1/q₂ = 1/q₀`. A factor with
    /// `(p_j, q_j) = (∞, ∞)` is accepted as the unit factor.
    pub fn validate(&self) -> Result<()> {
        let le = |a: Exponent, b: Exponent| a.reciprocal() >= b.reciprocal();
        ensure(le(self.p0, self.p1) && le(self.p0, self.p2), || "need p₀ ≤ p₁, p₂".into())?;
        ensure(le(self.q0, self.q1) && le(self.q0, self.q2), || "need q₀ ≤ q₁, q₂".into())?;
        ensure(self.p0.reciprocal() + self.q0.reciprocal() > 0.0, || "need 1/p₀ + 1/q₀ > 0".into())?;
        ensure(self.p1.reciprocal() + self.q1.reciprocal() > 0.0 || self.p2.reciprocal() + self.q2.reciprocal() > 0.0, || {
            "only one factor may be the (∞, ∞) unit factor".into()
        })?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        ensure(close(self.p1.reciprocal() + self.p2.reciprocal(), self.p0.reciprocal()), || "need 1/p₁ + 1/p₂ = 1/p₀".into())?;
        ensure(close(self.q1.reciprocal() + self.q2.reciprocal(), self.q0.reciprocal()), || "need 1/q₁ + 1/q₂ = 1/q₀".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductReport {
    pub lhs: f64,
    pub norm_c: f64,
    pub norm_d: f64,
    pub rhs_product: f64,
    pub ratio: f64,
}

/// `‖c·d‖_{T^{p₀}_{q₀}}` against `‖c‖_{T^{p₁}_{q₁}}·‖d‖_{T^{p₂}_{q₂}}`, all
/// three on one [`ConeSample`].
pub fn product_inequality_check(
    c: &[C64],
    d: &[C64],
    lattice: &Lattice,
    exps: &ProductExponents,
    per_atom: usize,
    seed: u64,
) -> Result<ProductReport> {
    exps.validate()?;
    ensure(c.len() == lattice.len() && d.len() == lattice.len(), || "sequences must align with the lattice".into())?;
    let cd: Vec<C64> = c.iter().zip(d).map(|(x, y)| x * y).collect();
    let support: Vec<bool> = c.iter().zip(d).map(|(x, y)| x.norm() > 0.0 || y.norm() > 0.0).collect();
    let sample = ConeSample::new(lattice, &support, per_atom, DEFAULT_APERTURE, seed)?;
    let candidates = 256;
    let lhs = seq_tent_norm_on(&sample, lattice, &cd, exps.p0, exps.q0, candidates, seed)?.value;
    let norm_c = seq_tent_norm_on(&sample, lattice, c, exps.p1, exps.q1, candidates, seed)?.value;
    let norm_d = seq_tent_norm_on(&sample, lattice, d, exps.p2, exps.q2, candidates, seed)?.value;
    let rhs_product = norm_c * norm_d;
    let ratio = if rhs_product > 0.0 {
        lhs / rhs_product
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(ProductReport { lhs, norm_c, norm_d, rhs_product, ratio })
}

/// Both sides of the Forelli–Rudin type estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForelliRudinReport {
    pub integral: IntegralEstimate,
    pub bound: f64,
    pub ratio: f64,
}

/// `∫ (1−|w|²)^s dv(w)/(|1−⟨u,w⟩|^r |1−⟨z,w⟩|^t)` divided by
/// `|1−⟨z,u⟩|^{−(r+t−s−n−1)}`.
pub fn forelli_rudin_check(
    u: &crate::geometry::BallPoint,
    z: &crate::geometry::BallPoint,
    s_exp: f64,
    r_exp: f64,
    t_exp: f64,
    budget: usize,
    seed: u64,
) -> Result<ForelliRudinReport> {
    let n = u.n();
    ensure(z.n() == n, || format!("u has n = {n}, z has n = {}", z.n()))?;
    let c = s_exp + n as f64 + 1.0;
    ensure(s_exp > -1.0, || format!("s = {s_exp} must exceed −1"))?;
    ensure(r_exp > 0.0 && t_exp > 0.0, || "r and t must be positive".into())?;
    ensure(r_exp + t_exp > c && c > r_exp && c > t_exp, || {
        format!("need r + t > s + n + 1 > r, t; got r = {r_exp}, t = {t_exp}, s + n + 1 = {c}")
    })?;
    let one = C64::new(1.0, 0.0);
    let (uc, zc) = (u.coords(), z.coords());
    let integrand = |w: &[C64]| (one - dot(uc, w)).norm().powf(-r_exp) * (one - dot(zc, w)).norm().powf(-t_exp);
    let mu = MeasureSpec::weighted_volume(s_exp);
    let integral = integrate_in_dim(&mu, n, &RegionSpec::WholeBall, &integrand, &IntegrationOptions::new(budget, seed))?.estimate;
    let bound = (one - dot(zc, uc)).norm().powf(-(r_exp + t_exp - c));
    Ok(ForelliRudinReport { ratio: integral.value / bound, bound, integral })
}
