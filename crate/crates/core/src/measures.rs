//! Positive measures on 𝔹ⁿ, integration over regions, and `μ̂_r`.
//!
//! Four parametric families are supported: finite point masses, masses
//! `c(1−|a_k|²)^γ` on a lattice, weighted volume `(1−|z|²)^β dv` and
//! piecewise radial densities `Σ c(1−|z|²)^β` on radius intervals. `v` is
//! normalized so that `v(𝔹ⁿ) = 1`.
//!
//! Continuous measures are integrated by stratified Monte Carlo over depth
//! shells `1 − |z| ∈ (2^{−(j+1)}, 2^{−j}]`, `j < K`. Inside a shell
//! `y = 1 − |z|²` is drawn log-uniformly and the direction from the slice of
//! the region at that radius, so each shell costs the same regardless of how
//! thin the region is there. The per-shell values double as the truncation
//! trace used by divergence detection.

use crate::error::{ensure, Error, Result};
use crate::geometry::{bergman_radius, involution_raw, norm_sqr, BallPoint, RegionSpec, Slice, SpherePoint};
use crate::index::PointIndex;
use crate::lattice::Lattice;
use crate::quadrature::{bergman_ball_mass, RadialTable};
use crate::rng::{mean_and_var, pairwise_sum, stream, tag};
use crate::sampling::{sample_slice, uniform_sphere, Frame};
use crate::C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

/// A point mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: BallPoint,
    pub mass: f64,
}

/// One term `coefficient·(1−|z|²)^exponent` of a radial density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coefficient: f64,
    pub exponent: f64,
}

/// A radial density on `lo ≤ |z| < hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialPiece {
    pub lo: f64,
    pub hi: f64,
    pub terms: Vec<PowerTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum MeasureSpec {
    PointMasses {
        atoms: Vec<Atom>,
    },
    /// Mass `coefficient·(1−|a_k|²)^exponent` at every lattice point.
    LatticeMasses {
        lattice: Lattice,
        exponent: f64,
        coefficient: f64,
    },
    /// `(1−|z|²)^beta dv`.
    WeightedVolume {
        beta: f64,
    },
    RadialDensity {
        pieces: Vec<RadialPiece>,
    },
}

impl MeasureSpec {
    pub fn zero() -> MeasureSpec {
        MeasureSpec::PointMasses { atoms: Vec::new() }
    }

    pub fn point_mass(point: BallPoint, mass: f64) -> MeasureSpec {
        MeasureSpec::PointMasses { atoms: vec![Atom { point, mass }] }
    }

    pub fn weighted_volume(beta: f64) -> MeasureSpec {
        MeasureSpec::WeightedVolume { beta }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureSpec::PointMasses { atoms } => {
                let n = atoms.first().map(|a| a.point.n());
                for (k, a) in atoms.iter().enumerate() {
                    ensure(a.mass > 0.0 && a.mass.is_finite(), || format!("atoms[{k}].mass = {} must be positive", a.mass))?;
                    ensure(Some(a.point.n()) == n, || format!("atoms[{k}] has a different dimension"))?;
                }
                Ok(())
            }
            MeasureSpec::LatticeMasses { exponent, coefficient, .. } => {
                ensure(*coefficient > 0.0 && coefficient.is_finite(), || format!("coefficient = {coefficient} must be positive"))?;
                ensure(exponent.is_finite(), || "exponent must be finite".into())
            }
            MeasureSpec::WeightedVolume { beta } => ensure(*beta > -1.0, || format!("weighted volume needs β > −1, got {beta}")),
            MeasureSpec::RadialDensity { pieces } => {
                for (k, p) in pieces.iter().enumerate() {
                    ensure(0.0 <= p.lo && p.lo < p.hi && p.hi <= 1.0, || format!("pieces[{k}] needs 0 ≤ lo < hi ≤ 1"))?;
                    for (j, t) in p.terms.iter().enumerate() {
                        ensure(t.coefficient > 0.0 && t.coefficient.is_finite(), || {
                            format!("pieces[{k}].terms[{j}].coefficient must be positive")
                        })?;
                        ensure(t.exponent > -1.0, || format!("pieces[{k}].terms[{j}].exponent must exceed −1"))?;
                    }
                }
                Ok(())
            }
        }
    }

    /// The dimension fixed by the measure, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            MeasureSpec::PointMasses { atoms } => atoms.first().map(|a| a.point.n()),
            MeasureSpec::LatticeMasses { lattice, .. } => Some(lattice.n()),
            _ => None,
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, MeasureSpec::PointMasses { .. } | MeasureSpec::LatticeMasses { .. })
    }

    /// Point masses of an atomic measure.
    pub fn atoms(&self) -> Option<Vec<Atom>> {
        match self {
            MeasureSpec::PointMasses { atoms } => Some(atoms.clone()),
            MeasureSpec::LatticeMasses { lattice, exponent, coefficient } => {
                Some(lattice.points().iter().map(|p| Atom { point: p.clone(), mass: coefficient * p.defect().powf(*exponent) }).collect())
            }
            _ => None,
        }
    }

    /// `c·μ`.
    pub fn scaled(&self, c: f64) -> MeasureSpec {
        match self {
            MeasureSpec::PointMasses { atoms } => {
                MeasureSpec::PointMasses { atoms: atoms.iter().map(|a| Atom { point: a.point.clone(), mass: a.mass * c }).collect() }
            }
            MeasureSpec::LatticeMasses { lattice, exponent, coefficient } => {
                MeasureSpec::LatticeMasses { lattice: lattice.clone(), exponent: *exponent, coefficient: coefficient * c }
            }
            MeasureSpec::WeightedVolume { beta } => MeasureSpec::RadialDensity {
                pieces: vec![RadialPiece { lo: 0.0, hi: 1.0, terms: vec![PowerTerm { coefficient: c, exponent: *beta }] }],
            },
            MeasureSpec::RadialDensity { pieces } => MeasureSpec::RadialDensity {
                pieces: pieces
                    .iter()
                    .map(|p| RadialPiece {
                        lo: p.lo,
                        hi: p.hi,
                        terms: p.terms.iter().map(|t| PowerTerm { coefficient: t.coefficient * c, exponent: t.exponent }).collect(),
                    })
                    .collect(),
            },
        }
    }

    /// `χ_{lo ≤ |z| < hi}·μ`. Atoms are kept when `lo < |z| < hi`.
    pub fn restrict_radial(&self, lo: f64, hi: f64) -> MeasureSpec {
        match self {
            MeasureSpec::PointMasses { .. } | MeasureSpec::LatticeMasses { .. } => MeasureSpec::PointMasses {
                atoms: self
                    .atoms()
                    .unwrap_or_default()
                    .into_iter()
                    .filter(|a| {
                        let r = a.point.norm();
                        r > lo && r < hi
                    })
                    .collect(),
            },
            MeasureSpec::WeightedVolume { beta } => MeasureSpec::RadialDensity {
                pieces: vec![RadialPiece {
                    lo: lo.max(0.0),
                    hi: hi.min(1.0),
                    terms: vec![PowerTerm { coefficient: 1.0, exponent: *beta }],
                }],
            },
            MeasureSpec::RadialDensity { pieces } => MeasureSpec::RadialDensity {
                pieces: pieces
                    .iter()
                    .filter_map(|p| {
                        let (a, b) = (p.lo.max(lo), p.hi.min(hi));
                        (a < b).then(|| RadialPiece { lo: a, hi: b, terms: p.terms.clone() })
                    })
                    .collect(),
            },
        }
    }

    /// Density against `dv` at a point with `1 − |z|² = y` (continuous
    /// variants; 0 for atomic ones).
    pub(crate) fn density(&self, y: f64) -> f64 {
        match self {
            MeasureSpec::WeightedVolume { beta } => y.powf(*beta),
            MeasureSpec::RadialDensity { pieces } => {
                let rho = (1.0 - y).max(0.0).sqrt();
                pieces
                    .iter()
                    .filter(|p| p.lo <= rho && rho < p.hi)
                    .flat_map(|p| p.terms.iter())
                    .map(|t| t.coefficient * y.powf(t.exponent))
                    .sum()
            }
            _ => 0.0,
        }
    }

    /// Exact `μ({lo ≤ |z| < hi})`.
    pub fn radial_mass(&self, n: usize, lo: f64, hi: f64) -> f64 {
        // ∫_{lo≤ρ<hi} (1−ρ²)^β dv = n ∫_{1−hi²}^{1−lo²} y^β (1−y)^{n−1} dy
        let shell = |lo: f64, hi: f64, c: f64, beta: f64| -> f64 {
            let (a, b) = (beta + 1.0, n as f64);
            let full = (ln_beta(a, b)).exp() * n as f64;
            let y_hi = 1.0 - lo * lo;
            let y_lo = 1.0 - hi * hi;
            c * full * (beta_reg(a, b, y_hi.clamp(0.0, 1.0)) - beta_reg(a, b, y_lo.clamp(0.0, 1.0)))
        };
        match self {
            MeasureSpec::WeightedVolume { beta } => shell(lo, hi, 1.0, *beta),
            MeasureSpec::RadialDensity { pieces } => pieces
                .iter()
                .map(|p| {
                    let (a, b) = (p.lo.max(lo), p.hi.min(hi));
                    if a >= b {
                        return 0.0;
                    }
                    p.terms.iter().map(|t| shell(a, b, t.coefficient, t.exponent)).sum()
                })
                .sum(),
            _ => self
                .atoms()
                .unwrap_or_default()
                .iter()
                .filter(|a| {
                    let r = a.point.norm();
                    lo <= r && r < hi
                })
                .map(|a| a.mass)
                .sum(),
        }
    }

    /// Total mass `μ(𝔹ⁿ)`.
    pub fn total_mass(&self, n: usize) -> f64 {
        self.radial_mass(n, 0.0, 1.0)
    }
}

/// Result of an integration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples_used: usize,
    /// Radius beyond which nothing was sampled, `1 − 2^{−K}` for continuous
    /// measures and 1 for exact atomic sums.
    pub truncation_radius: f64,
    /// Set when the last three truncation levels each more than doubled the
    /// running value.
    pub diverged: bool,
}

impl IntegralEstimate {
    pub fn exact(value: f64) -> IntegralEstimate {
        IntegralEstimate { value, std_error: 0.0, samples_used: 0, truncation_radius: 1.0, diverged: false }
    }
}

/// Per-shell contributions of an integration. Shell `j` covers depths
/// `(2^{−(j+1)}, 2^{−j}]`; atoms deeper than the last shell are counted in
/// it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralTrace {
    pub estimate: IntegralEstimate,
    pub shell_values: Vec<f64>,
    pub shell_variances: Vec<f64>,
}

impl IntegralTrace {
    /// Value truncated to `|z| ≤ 1 − 2^{−k}` (the first `k` shells).
    pub fn cumulative(&self, k: usize) -> f64 {
        pairwise_sum(&self.shell_values[..k.min(self.shell_values.len())])
    }

    /// Standard error of [`IntegralTrace::cumulative`].
    pub fn cumulative_error(&self, k: usize) -> f64 {
        self.shell_variances[..k.min(self.shell_variances.len())].iter().sum::<f64>().sqrt()
    }
}

/// Knobs for [`integrate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationOptions {
    /// Integrand evaluations for continuous measures (≥ 10³).
    pub budget: usize,
    pub seed: u64,
    /// Number of depth shells `K`; the truncation radius is `1 − 2^{−K}`.
    pub shells: usize,
    /// Only `|z| > min_radius` is integrated.
    pub min_radius: f64,
    /// Only `|z| < max_radius` is integrated.
    pub max_radius: f64,
}

pub const DEFAULT_SHELLS: usize = 20;

impl IntegrationOptions {
    pub fn new(budget: usize, seed: u64) -> IntegrationOptions {
        IntegrationOptions { budget, seed, shells: DEFAULT_SHELLS, min_radius: 0.0, max_radius: 1.0 }
    }

    pub fn with_shells(mut self, shells: usize) -> Self {
        self.shells = shells;
        self
    }

    pub fn with_min_radius(mut self, rho: f64) -> Self {
        self.min_radius = rho;
        self
    }

    pub fn with_max_radius(mut self, rho: f64) -> Self {
        self.max_radius = rho;
        self
    }
}

/// A pointwise nonnegative integrand on raw coordinates.
pub type Integrand<'a> = dyn Fn(&[C64]) -> f64 + Sync + 'a;

fn bad_value(value: f64, z: &[C64]) -> Error {
    Error::Integrand { value, point: z.iter().map(|c| [c.re, c.im]).collect() }
}

fn check_value(value: f64, z: &[C64]) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(bad_value(value, z))
    }
}

/// `∫_region integrand dμ`.
pub fn integrate(mu: &MeasureSpec, region: &RegionSpec, integrand: &Integrand<'_>, opts: &IntegrationOptions) -> Result<IntegralEstimate> {
    integrate_traced(mu, region, integrand, opts).map(|t| t.estimate)
}

fn declared_divergent(trace: &[f64]) -> bool {
    let k = trace.len();
    if k < 4 {
        return false;
    }
    let cum: Vec<f64> = (k - 3..=k).map(|i| pairwise_sum(&trace[..i])).collect();
    cum.windows(2).all(|w| w[0] > 0.0 && w[1] > 2.0 * w[0])
}

fn shell_of_depth(t: f64, shells: usize) -> usize {
    if t <= 0.0 {
        return shells - 1;
    }
    ((-t.log2()).floor().max(0.0) as usize).min(shells - 1)
}

/// [`integrate`] with its per-shell decomposition.
pub fn integrate_traced(
    mu: &MeasureSpec,
    region: &RegionSpec,
    integrand: &Integrand<'_>,
    opts: &IntegrationOptions,
) -> Result<IntegralTrace> {
    mu.validate()?;
    region.validate()?;
    ensure(opts.shells >= 1 && opts.shells <= 60, || format!("shells = {} must lie in 1..=60", opts.shells))?;
    ensure(0.0 <= opts.min_radius && opts.min_radius < opts.max_radius && opts.max_radius <= 1.0, || {
        format!("radius window ({}, {}) is invalid", opts.min_radius, opts.max_radius)
    })?;
    if let (Some(a), Some(b)) = (mu.dim(), region.dim()) {
        if a != b {
            return Err(Error::Dimension { expected: a, got: b });
        }
    }
    if let Some(atoms) = mu.atoms() {
        return integrate_atoms(&atoms, region, integrand, opts);
    }
    ensure(opts.budget >= 1000, || format!("budget {} is below 10³", opts.budget))?;
    let n = region.dim().ok_or_else(|| Error::Contract("a continuous measure needs a region that fixes n".into()))?;
    match region {
        RegionSpec::BergmanBall { center, r } => integrate_bergman_ball(mu, n, center, *r, integrand, opts),
        _ => integrate_shells(mu, n, &region.normalized(), integrand, opts),
    }
}

/// Like [`integrate_traced`] for regions that do not fix the dimension
/// (annuli, the whole ball).
pub fn integrate_in_dim(
    mu: &MeasureSpec,
    n: usize,
    region: &RegionSpec,
    integrand: &Integrand<'_>,
    opts: &IntegrationOptions,
) -> Result<IntegralTrace> {
    region.check_dim(n)?;
    if region.dim().is_some() || mu.is_atomic() {
        return integrate_traced(mu, region, integrand, opts);
    }
    mu.validate()?;
    region.validate()?;
    ensure(opts.budget >= 1000, || format!("budget {} is below 10³", opts.budget))?;
    ensure(n >= 1, || "n must be at least 1".into())?;
    integrate_shells(mu, n, region, integrand, opts)
}

fn integrate_atoms(atoms: &[Atom], region: &RegionSpec, integrand: &Integrand<'_>, opts: &IntegrationOptions) -> Result<IntegralTrace> {
    let mut shells = vec![Vec::new(); opts.shells];
    for a in atoms {
        let z = a.point.coords();
        region.check_dim(z.len())?;
        let rho = a.point.norm();
        if rho <= opts.min_radius || rho >= opts.max_radius || !region.contains_raw(z) {
            continue;
        }
        let v = check_value(integrand(z), z)?;
        shells[shell_of_depth(1.0 - rho, opts.shells)].push(v * a.mass);
    }
    let shell_values: Vec<f64> = shells.iter().map(|s| pairwise_sum(s)).collect();
    let value = pairwise_sum(&shell_values);
    Ok(IntegralTrace {
        estimate: IntegralEstimate { value, std_error: 0.0, samples_used: atoms.len(), truncation_radius: 1.0, diverged: false },
        shell_variances: vec![0.0; opts.shells],
        shell_values,
    })
}

/// Pushforward of the uniform law on `{|x| < tanh r}` under `φ_center`.
fn integrate_bergman_ball(
    mu: &MeasureSpec,
    n: usize,
    center: &BallPoint,
    r: f64,
    integrand: &Integrand<'_>,
    opts: &IntegrationOptions,
) -> Result<IntegralTrace> {
    let a = center.coords();
    let y_a = center.defect();
    let big_r = r.tanh();
    let vol = big_r.powi(2 * n as i32);
    let chunks = 64usize;
    let per = opts.budget.div_ceil(chunks);
    let parts: Vec<Result<Vec<(usize, f64)>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(opts.seed, tag::BALL, c as u64);
            let mut out = Vec::with_capacity(per);
            for _ in 0..per {
                let dir = uniform_sphere(n, &mut rng);
                let s = big_r * rng.gen::<f64>().powf(1.0 / (2.0 * n as f64));
                let x: Vec<C64> = dir.into_iter().map(|c| c * s).collect();
                let den = (C64::new(1.0, 0.0) - crate::geometry::dot(&x, a)).norm_sqr();
                let jac = (y_a / den).powi(n as i32 + 1);
                let z = involution_raw(a, &x);
                let y = y_a * (1.0 - s * s) / den;
                let rho = norm_sqr(&z).sqrt();
                let t = 1.0 - rho;
                if rho <= opts.min_radius || rho >= opts.max_radius {
                    out.push((shell_of_depth(t, opts.shells), 0.0));
                    continue;
                }
                let f = check_value(integrand(&z), &z)?;
                out.push((shell_of_depth(t, opts.shells), vol * jac * mu.density(y) * f));
            }
            Ok(out)
        })
        .collect();
    let mut samples = Vec::with_capacity(per * chunks);
    for p in parts {
        samples.extend(p?);
    }
    let m = samples.len() as f64;
    let all: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (value, var) = mean_and_var(&all);
    let mut shell_values = vec![0.0; opts.shells];
    let mut shell_sq = vec![0.0; opts.shells];
    for &(j, v) in &samples {
        shell_values[j] += v / m;
        shell_sq[j] += v * v;
    }
    let shell_variances: Vec<f64> =
        shell_values.iter().zip(&shell_sq).map(|(mean, sq)| ((sq / m - mean * mean) / (m - 1.0)).max(0.0)).collect();
    Ok(IntegralTrace {
        estimate: IntegralEstimate { value, std_error: var.sqrt(), samples_used: samples.len(), truncation_radius: 1.0, diverged: false },
        shell_values,
        shell_variances,
    })
}

struct ShellPlan {
    ly_lo: f64,
    ly_hi: f64,
}

/// `y = t(2−t)` and its inverse `t = y/(1+√(1−y))`.
fn y_of_depth(t: f64) -> f64 {
    t * (2.0 - t)
}

fn depth_of_y(y: f64) -> f64 {
    y / (1.0 + (1.0 - y).max(0.0).sqrt())
}

fn integrate_shells(
    mu: &MeasureSpec,
    n: usize,
    region: &RegionSpec,
    integrand: &Integrand<'_>,
    opts: &IntegrationOptions,
) -> Result<IntegralTrace> {
    let (region_lo, region_hi) = region.depth_range();
    let t_min = region_lo.max(1.0 - opts.max_radius);
    let t_max = region_hi.min(1.0 - opts.min_radius);
    let k = opts.shells;
    let plans: Vec<Option<ShellPlan>> = (0..k)
        .map(|j| {
            let lo = 0.5f64.powi(j as i32 + 1).max(t_min);
            let hi = 0.5f64.powi(j as i32).min(t_max);
            (lo < hi).then(|| ShellPlan { ly_lo: y_of_depth(lo).ln(), ly_hi: y_of_depth(hi).ln() })
        })
        .collect();
    let frame = match region {
        RegionSpec::Koranyi { xi, .. } | RegionSpec::NonisotropicBall { xi, .. } => Some(Frame::new(xi.coords())),
        _ => None,
    };
    let active = plans.iter().filter(|p| p.is_some()).count().max(1);
    let pilot = (opts.budget / (4 * active)).max(8);

    let draw = |plan: &ShellPlan, rng: &mut rand_chacha::ChaCha8Rng| -> Result<f64> {
        let ly = rng.gen_range(plan.ly_lo..=plan.ly_hi);
        let y = ly.exp();
        let t = depth_of_y(y);
        let rho = 1.0 - t;
        let (zeta, cap_weight) = match region.slice(t, y) {
            Some(Slice::Full) => (uniform_sphere(n, rng), 1.0),
            Some(Slice::Empty) => return Ok(0.0),
            Some(Slice::Cap { radius }) => {
                match sample_slice(frame.as_ref().expect("cap regions carry an axis"), rho, t, radius, 0.0, rng) {
                    Some(d) => (d.zeta, d.weight),
                    None => return Ok(0.0),
                }
            }
            None => return Err(Error::Internal("region has no slice description".into())),
        };
        let z: Vec<C64> = zeta.into_iter().map(|c| c * rho).collect();
        if !region.contains_raw(&z) || rho <= opts.min_radius || rho >= opts.max_radius {
            return Ok(0.0);
        }
        let f = check_value(integrand(&z), &z)?;
        let radial = (plan.ly_hi - plan.ly_lo) * y * n as f64 * (1.0 - y).powi(n as i32 - 1);
        Ok(radial * mu.density(y) * cap_weight * f)
    };

    let pilots: Vec<Result<Vec<f64>>> = plans
        .par_iter()
        .enumerate()
        .map(|(j, plan)| match plan {
            None => Ok(Vec::new()),
            Some(plan) => {
                let mut rng = stream(opts.seed, tag::SHELL_PILOT, j as u64);
                (0..pilot).map(|_| draw(plan, &mut rng)).collect()
            }
        })
        .collect();
    let pilots: Vec<Vec<f64>> = pilots.into_iter().collect::<Result<_>>()?;
    let spent: usize = pilots.iter().map(|p| p.len()).sum();
    let remaining = opts.budget.saturating_sub(spent);
    let sds: Vec<f64> = pilots.iter().map(|p| if p.len() > 1 { (mean_and_var(p).1 * p.len() as f64).sqrt() } else { 0.0 }).collect();
    let sd_total: f64 = sds.iter().sum();
    let extra: Vec<usize> = plans
        .iter()
        .zip(&sds)
        .map(|(plan, sd)| match plan {
            None => 0,
            Some(_) if sd_total > 0.0 => (remaining as f64 * sd / sd_total).floor() as usize,
            Some(_) => remaining / active,
        })
        .collect();
    let mains: Vec<Result<Vec<f64>>> = plans
        .par_iter()
        .enumerate()
        .map(|(j, plan)| match plan {
            None => Ok(Vec::new()),
            Some(plan) => {
                let mut rng = stream(opts.seed, tag::SHELL_MAIN, j as u64);
                (0..extra[j]).map(|_| draw(plan, &mut rng)).collect()
            }
        })
        .collect();
    let mains: Vec<Vec<f64>> = mains.into_iter().collect::<Result<_>>()?;

    let mut shell_values = Vec::with_capacity(k);
    let mut shell_variances = Vec::with_capacity(k);
    let mut used = 0;
    for (p, m) in pilots.iter().zip(&mains) {
        let mut all = p.clone();
        all.extend_from_slice(m);
        used += all.len();
        let (mean, var) = mean_and_var(&all);
        shell_values.push(mean);
        shell_variances.push(var);
    }
    let value = pairwise_sum(&shell_values);
    let std_error = shell_variances.iter().sum::<f64>().sqrt();
    Ok(IntegralTrace {
        estimate: IntegralEstimate {
            value,
            std_error,
            samples_used: used,
            truncation_radius: 1.0 - 0.5f64.powi(k as i32),
            diverged: declared_divergent(&shell_values),
        },
        shell_values,
        shell_variances,
    })
}

/// Evaluator for `μ(D(z, r))` and `μ̂_r(z) = μ(D(z,r))/(1−|z|²)^{2n+1+α}`.
pub struct MuHat {
    n: usize,
    r: f64,
    alpha: f64,
    kind: MuHatKind,
}

enum MuHatKind {
    Zero,
    /// `reach²` bounds `|z|²` beyond which `D(z, r)` misses every atom.
    Atomic {
        index: PointIndex,
        masses: Vec<f64>,
        reach2: f64,
    },
    Radial {
        table: RadialTable,
        mu: MeasureSpec,
    },
}

impl MuHat {
    /// Checked constructor: `r ∈ (0, 1)`, `α > −n−1`.
    pub fn new(mu: &MeasureSpec, n: usize, r: f64, alpha: f64) -> Result<MuHat> {
        ensure(r > 0.0 && r < 1.0, || format!("radius r = {r} must lie in (0, 1)"))?;
        MuHat::with_radius(mu, n, r, alpha)
    }

    /// Any positive radius; used for the `2r` and `r/2` variants.
    pub(crate) fn with_radius(mu: &MeasureSpec, n: usize, r: f64, alpha: f64) -> Result<MuHat> {
        mu.validate()?;
        ensure(n >= 1, || "n must be at least 1".into())?;
        ensure(r > 0.0 && r < 20.0, || format!("radius r = {r} must lie in (0, 20)"))?;
        ensure(alpha > -(n as f64) - 1.0, || format!("α = {alpha} must exceed −n−1"))?;
        if let Some(d) = mu.dim() {
            if d != n {
                return Err(Error::Dimension { expected: n, got: d });
            }
        }
        let kind = match mu.atoms() {
            Some(atoms) if atoms.is_empty() => MuHatKind::Zero,
            Some(atoms) => {
                let outer = atoms.iter().map(|a| a.point.norm()).fold(0.0, f64::max);
                // β(0, z) ≥ β(0, a) + r forces β(z, a) ≥ r; the margin absorbs rounding.
                let reach = (bergman_radius(outer) + r + 1e-9).tanh();
                MuHatKind::Atomic {
                    masses: atoms.iter().map(|a| a.mass).collect(),
                    index: PointIndex::new(atoms.into_iter().map(|a| a.point.coords().to_vec()).collect()),
                    reach2: reach * reach,
                }
            }
            None => {
                let m = mu.clone();
                let w = move |y: f64| m.density(y);
                MuHatKind::Radial { table: RadialTable::build(n, r, &w), mu: mu.clone() }
            }
        };
        Ok(MuHat { n, r, alpha, kind })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, MuHatKind::Zero)
    }

    /// `μ(D(z, r))`.
    pub fn ball_mass(&self, z: &[C64]) -> f64 {
        match &self.kind {
            MuHatKind::Zero => 0.0,
            MuHatKind::Atomic { index, masses, reach2 } => {
                if norm_sqr(z) >= *reach2 {
                    return 0.0;
                }
                let hits: Vec<f64> = index.within_bergman(z, self.r).into_iter().map(|k| masses[k]).collect();
                pairwise_sum(&hits)
            }
            MuHatKind::Radial { table, mu } => {
                let y = 1.0 - norm_sqr(z);
                table.lookup(y).unwrap_or_else(|| bergman_ball_mass(self.n, y, self.r, &|y| mu.density(y)))
            }
        }
    }

    /// `μ̂_r(z)`.
    pub fn eval(&self, z: &[C64]) -> f64 {
        let m = self.ball_mass(z);
        if m == 0.0 {
            return 0.0;
        }
        m / (1.0 - norm_sqr(z)).powf(2.0 * self.n as f64 + 1.0 + self.alpha)
    }
}

/// `μ̂_r(z) = μ(D(z, r))/(1−|z|²)^{2n+1+α}` for `r ∈ (0, 1)`, `α > −n−1`.
pub fn mu_hat(mu: &MeasureSpec, z: &BallPoint, r: f64, alpha: f64) -> Result<f64> {
    let hat = MuHat::new(mu, z.n(), r, alpha)?;
    Ok(hat.eval(z.coords()))
}

/// `count` i.i.d. draws from `σ` on `𝕊ₙ`.
pub fn sample_sphere(n: usize, count: usize, seed: u64) -> Result<Vec<SpherePoint>> {
    ensure(n >= 1, || "n must be at least 1".into())?;
    ensure(count >= 1, || "count must be at least 1".into())?;
    let mut rng = stream(seed, tag::SPHERE, 0);
    Ok((0..count).map(|_| SpherePoint::from_raw(uniform_sphere(n, &mut rng))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{SpherePoint, DEFAULT_APERTURE};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn opts(budget: usize, seed: u64) -> IntegrationOptions {
        IntegrationOptions::new(budget, seed)
    }

    fn one(_: &[C64]) -> f64 {
        1.0
    }

    /// Area of `Γ(ξ) ⊂ 𝔻` for the normalized measure `dA/π`, by a dense
    /// polar grid over `{|1 − z| < 1 − |z|²}`.
    fn cone_area_grid(gamma: f64) -> f64 {
        let (nr, nt) = (4000, 4000);
        let mut acc = 0.0;
        for i in 0..nr {
            let rho = (i as f64 + 0.5) / nr as f64;
            let mut hits = 0;
            for k in 0..nt {
                let th = -PI + 2.0 * PI * (k as f64 + 0.5) / nt as f64;
                let z = C64::from_polar(rho, th);
                if (C64::new(1.0, 0.0) - z).norm() < 0.5 * gamma * (1.0 - rho * rho) {
                    hits += 1;
                }
            }
            acc += rho * hits as f64 / nt as f64 * 2.0;
        }
        acc / nr as f64
    }

    #[test]
    fn single_atom_inside_its_ball() {
        let z0 = BallPoint::real(&[0.3, -0.2]).unwrap();
        let mu = MeasureSpec::point_mass(z0.clone(), 2.5);
        let region = RegionSpec::BergmanBall { center: z0, r: 1.0 };
        let est = integrate(&mu, &region, &one, &opts(1000, 1)).unwrap();
        assert_eq!(est.value, 2.5);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn volume_is_normalized() {
        for n in 1..=3 {
            let mu = MeasureSpec::weighted_volume(0.0);
            let t = integrate_in_dim(&mu, n, &RegionSpec::WholeBall, &one, &opts(20_000, 2)).unwrap();
            assert!((t.estimate.value - 1.0).abs() < 4.0 * t.estimate.std_error + 1e-5, "n={n}: {:?}", t.estimate);
            assert!((mu.total_mass(n) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_volume_total_mass() {
        // v_β(𝔹ⁿ) = n!Γ(β+1)/Γ(n+β+1); n = 2, β = 0.5 gives 2Γ(1.5)/Γ(3.5).
        let exact = 2.0 * statrs::function::gamma::gamma(1.5) / statrs::function::gamma::gamma(3.5);
        let mu = MeasureSpec::weighted_volume(0.5);
        assert!((mu.total_mass(2) - exact).abs() < 1e-12);
        let t = integrate_in_dim(&mu, 2, &RegionSpec::WholeBall, &one, &opts(40_000, 3)).unwrap();
        assert!((t.estimate.value - exact).abs() < 4.0 * t.estimate.std_error + 1e-6);
    }

    #[test]
    fn cone_volume_matches_grid_for_every_direction() {
        let exact = cone_area_grid(DEFAULT_APERTURE);
        let mu = MeasureSpec::weighted_volume(0.0);
        for (i, xi) in sample_sphere(1, 5, 7).unwrap().into_iter().enumerate() {
            let cone = RegionSpec::koranyi(xi, DEFAULT_APERTURE);
            let est = integrate(&mu, &cone, &one, &opts(40_000, i as u64)).unwrap();
            assert!((est.value - exact).abs() < 3.0 * est.std_error + 2e-4, "{} vs {exact}", est.value);
        }
    }

    #[test]
    fn bergman_ball_volume_matches_quadrature() {
        let center = BallPoint::new(vec![C64::new(0.5, 0.3), C64::new(-0.2, 0.1)]).unwrap();
        let mu = MeasureSpec::weighted_volume(1.0);
        let est = integrate(&mu, &RegionSpec::BergmanBall { center: center.clone(), r: 0.6 }, &one, &opts(100_000, 4)).unwrap();
        let q = bergman_ball_mass(2, center.defect(), 0.6, &|y| y);
        assert!((est.value - q).abs() < 4.0 * est.std_error, "{} vs {q}", est.value);
    }

    #[test]
    fn nonisotropic_ball_volume_is_rotation_free() {
        // B_δ(ξ) and its image under a rotation have equal volume.
        let mu = MeasureSpec::weighted_volume(0.0);
        let a =
            integrate(&mu, &RegionSpec::NonisotropicBall { xi: SpherePoint::e1(2).unwrap(), delta: 0.3 }, &one, &opts(50_000, 5)).unwrap();
        let xi = SpherePoint::new(vec![C64::new(0.0, 0.6), C64::new(0.8, 0.0)]).unwrap();
        let b = integrate(&mu, &RegionSpec::NonisotropicBall { xi, delta: 0.3 }, &one, &opts(50_000, 6)).unwrap();
        assert!((a.value - b.value).abs() < 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt());
    }

    #[test]
    fn annulus_split_is_additive() {
        let mu = MeasureSpec::weighted_volume(-0.5);
        let cone = RegionSpec::koranyi(SpherePoint::e1(1).unwrap(), 3.0);
        let f = |z: &[C64]| (C64::new(1.0, 0.0) - z[0]).norm().powf(-0.5);
        let whole = integrate(&mu, &cone, &f, &opts(40_000, 1)).unwrap();
        let inner = integrate(&mu, &cone, &f, &opts(40_000, 2).with_max_radius(0.7)).unwrap();
        let outer = integrate(&mu, &cone, &f, &opts(40_000, 3).with_min_radius(0.7)).unwrap();
        let se = (whole.std_error.powi(2) + inner.std_error.powi(2) + outer.std_error.powi(2)).sqrt();
        assert!((inner.value + outer.value - whole.value).abs() < 4.0 * se);
    }

    #[test]
    fn singular_weight_is_declared_divergent() {
        let mu = MeasureSpec::weighted_volume(0.0);
        let cone = RegionSpec::koranyi(SpherePoint::e1(1).unwrap(), 2.0);
        let f = |z: &[C64]| (1.0 - z[0].norm_sqr()).powi(-4);
        let est = integrate(&mu, &cone, &f, &opts(20_000, 1)).unwrap();
        assert!(est.diverged);
        let g = |z: &[C64]| (1.0 - z[0].norm_sqr()).powf(-0.5);
        assert!(!integrate(&mu, &cone, &g, &opts(20_000, 1)).unwrap().diverged);
    }

    #[test]
    fn bad_integrand_reports_point() {
        let mu = MeasureSpec::weighted_volume(0.0);
        let f = |_: &[C64]| f64::NAN;
        let err = integrate_in_dim(&mu, 1, &RegionSpec::WholeBall, &f, &opts(1000, 1)).unwrap_err();
        assert!(matches!(err, Error::Integrand { .. }));
        let err = integrate_in_dim(&mu, 1, &RegionSpec::WholeBall, &one, &opts(999, 1)).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn same_seed_same_result_any_thread_count() {
        let mu = MeasureSpec::weighted_volume(0.3);
        let cone = RegionSpec::koranyi(SpherePoint::e1(2).unwrap(), 2.5);
        let a = integrate(&mu, &cone, &one, &opts(5000, 9)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| integrate(&mu, &cone, &one, &opts(5000, 9)).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn mu_hat_of_point_mass() {
        let z0 = BallPoint::real(&[0.6, 0.0]).unwrap();
        let mu = MeasureSpec::point_mass(z0.clone(), 3.0);
        let exact = 3.0 / z0.defect().powf(2.0 * 2.0 + 1.0 + 0.5);
        assert!((mu_hat(&mu, &z0, 0.5, 0.5).unwrap() - exact).abs() < 1e-12 * exact);
        let far = BallPoint::real(&[-0.6, 0.0]).unwrap();
        assert_eq!(mu_hat(&mu, &far, 0.5, 0.5).unwrap(), 0.0);
        assert!(mu_hat(&mu, &far, 1.0, 0.0).is_err());
    }

    #[test]
    fn mu_hat_of_weighted_volume_is_comparable_to_power() {
        // μ = v_{β+n}: μ̂_r(z)(1−|z|²)^{α−β} stays in a bounded bracket.
        let (n, beta, alpha) = (1usize, 0.5, 0.0);
        let mu = MeasureSpec::weighted_volume(beta + n as f64);
        let hat = MuHat::new(&mu, n, 0.5, alpha).unwrap();
        let ratios: Vec<f64> = [0.0, 0.5, 0.9, 0.99]
            .iter()
            .map(|&rho| {
                let z = [C64::new(rho, 0.0)];
                hat.eval(&z) * (1.0 - rho * rho).powf(alpha - beta)
            })
            .collect();
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi / lo <= 10.0, "{ratios:?}");
    }

    #[test]
    fn mu_hat_radial_matches_direct_integration() {
        let mu = MeasureSpec::weighted_volume(0.7);
        let hat = MuHat::new(&mu, 2, 0.4, 0.0).unwrap();
        let z = BallPoint::new(vec![C64::new(0.3, 0.6), C64::new(0.0, -0.5)]).unwrap();
        let est = integrate(&mu, &RegionSpec::BergmanBall { center: z.clone(), r: 0.4 }, &one, &opts(200_000, 1)).unwrap();
        let m = hat.ball_mass(z.coords());
        assert!((m - est.value).abs() < 4.0 * est.std_error, "{m} vs {}", est.value);
    }

    #[test]
    fn radial_mass_matches_restriction() {
        let mu = MeasureSpec::weighted_volume(0.2);
        let r = mu.restrict_radial(0.5, 0.9);
        assert!((r.total_mass(2) - mu.radial_mass(2, 0.5, 0.9)).abs() < 1e-14);
        let t = integrate_in_dim(&r, 2, &RegionSpec::WholeBall, &one, &opts(20_000, 1)).unwrap();
        assert!((t.estimate.value - r.total_mass(2)).abs() < 4.0 * t.estimate.std_error);
    }

    #[test]
    fn sphere_sampler_moments() {
        for n in 1..=3 {
            let count = 20_000;
            let pts = sample_sphere(n, count, 3).unwrap();
            let mean: C64 = pts.iter().map(|p| p.coords()[0]).sum::<C64>() / count as f64;
            let second: f64 = pts.iter().map(|p| p.coords()[0].norm_sqr()).sum::<f64>() / count as f64;
            let tol = 4.0 / (count as f64).sqrt();
            assert!(mean.norm() < tol);
            assert!((second - 1.0 / n as f64).abs() < tol);
            assert_eq!(pts, sample_sphere(n, count, 3).unwrap());
        }
    }

    #[test]
    fn fubini_identity_bracket() {
        // ∫ dν against ∫_𝕊 ∫_Γ(ξ) dν/(1−|z|²) dσ with ν = v₁, n = 1.
        let mu = MeasureSpec::weighted_volume(1.0);
        let lhs = mu.total_mass(1);
        let xi = SpherePoint::e1(1).unwrap();
        let inner = integrate(&mu, &RegionSpec::koranyi(xi, 2.0), &|z: &[C64]| 1.0 / (1.0 - z[0].norm_sqr()), &opts(40_000, 1)).unwrap();
        let ratio = lhs / inner.value;
        assert!((0.1..=10.0).contains(&ratio), "{ratio}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn enlarging_the_cone_never_decreases(g in 1.2f64..4.0, dg in 0.1f64..3.0, seed in 0u64..1000) {
            let mu = MeasureSpec::weighted_volume(0.0);
            let xi = SpherePoint::e1(1).unwrap();
            let small = integrate(&mu, &RegionSpec::koranyi(xi.clone(), g), &one, &opts(4000, seed)).unwrap();
            let big = integrate(&mu, &RegionSpec::koranyi(xi, g + dg), &one, &opts(4000, seed + 1)).unwrap();
            let se = (small.std_error.powi(2) + big.std_error.powi(2)).sqrt();
            prop_assert!(big.value >= small.value - 3.0 * se);
        }

        #[test]
        fn scaling_scales_integrals(c in 0.1f64..10.0) {
            let mu = MeasureSpec::weighted_volume(0.4);
            let cone = RegionSpec::koranyi(SpherePoint::e1(1).unwrap(), 2.0);
            let a = integrate(&mu, &cone, &one, &opts(2000, 1)).unwrap();
            let b = integrate(&mu.scaled(c), &cone, &one, &opts(2000, 1)).unwrap();
            prop_assert!((b.value - c * a.value).abs() <= 1e-12 * b.value.abs().max(1.0));
        }
    }
}
