//! Pointwise geometry of the unit ball 𝔹ⁿ ⊂ ℂⁿ.
//!
//! Points carry their coordinates as [`C64`] vectors. The inner product is
//! `⟨z, w⟩ = Σ z_j·conj(w_j)`. Formulas that lose precision near the sphere
//! (the involution, `1 − |φ_z(w)|²`, the Bergman metric) are evaluated in
//! rearranged forms that avoid subtracting nearly equal quantities.

use crate::error::{contract, ensure, Error, Result};
use crate::rng::{stream, tag};
use crate::sampling::{sample_slice, uniform_sphere, Frame};
use crate::C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Aperture of the default Korányi region `Γ(ξ) = Γ₂(ξ)`.
pub const DEFAULT_APERTURE: f64 = 2.0;

/// Largest admissible Euclidean norm of a [`BallPoint`].
pub const MAX_NORM: f64 = 1.0 - 1e-15;

/// A point of the open unit ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct BallPoint {
    coords: Vec<C64>,
}

impl BallPoint {
    pub fn new(coords: Vec<C64>) -> Result<BallPoint> {
        ensure(!coords.is_empty(), || "a ball point needs n ≥ 1 coordinates".into())?;
        ensure(coords.iter().all(|c| c.re.is_finite() && c.im.is_finite()), || "non-finite coordinate".into())?;
        let norm = norm_sqr(&coords).sqrt();
        ensure(norm < MAX_NORM, || format!("|z| = {norm} is not below 1 − 1e−15"))?;
        Ok(BallPoint { coords })
    }

    /// The point with real coordinates `xs`.
    pub fn real(xs: &[f64]) -> Result<BallPoint> {
        BallPoint::new(xs.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn origin(n: usize) -> Result<BallPoint> {
        BallPoint::new(vec![C64::new(0.0, 0.0); n])
    }

    /// `ρ·ξ`, the point at radius `ρ` on the ray through `ξ`.
    pub fn on_ray(xi: &SpherePoint, rho: f64) -> Result<BallPoint> {
        BallPoint::new(xi.coords.iter().map(|c| c * rho).collect())
    }

    pub fn coords(&self) -> &[C64] {
        &self.coords
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.coords).sqrt()
    }

    /// `1 − |z|²`.
    pub fn defect(&self) -> f64 {
        1.0 - norm_sqr(&self.coords)
    }

    pub(crate) fn from_raw(coords: Vec<C64>) -> BallPoint {
        BallPoint { coords }
    }

    pub(crate) fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.coords.iter().map(|c| [c.re, c.im]).collect()
    }
}

impl TryFrom<Vec<[f64; 2]>> for BallPoint {
    type Error = Error;
    fn try_from(v: Vec<[f64; 2]>) -> Result<BallPoint> {
        BallPoint::new(v.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}

impl From<BallPoint> for Vec<[f64; 2]> {
    fn from(p: BallPoint) -> Self {
        p.to_pairs()
    }
}

/// A point of the unit sphere, normalized once at construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct SpherePoint {
    coords: Vec<C64>,
}

impl SpherePoint {
    pub fn new(coords: Vec<C64>) -> Result<SpherePoint> {
        ensure(!coords.is_empty(), || "a sphere point needs n ≥ 1 coordinates".into())?;
        let norm = norm_sqr(&coords).sqrt();
        ensure(norm.is_finite() && norm > 1e-300, || "cannot normalize a zero vector".into())?;
        Ok(SpherePoint { coords: coords.into_iter().map(|c| c / norm).collect() })
    }

    pub fn real(xs: &[f64]) -> Result<SpherePoint> {
        SpherePoint::new(xs.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// The first standard basis vector `e₁` of ℂⁿ.
    pub fn e1(n: usize) -> Result<SpherePoint> {
        ensure(n >= 1, || "n must be at least 1".into())?;
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[0] = C64::new(1.0, 0.0);
        Ok(SpherePoint { coords: v })
    }

    pub fn coords(&self) -> &[C64] {
        &self.coords
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub(crate) fn from_raw(coords: Vec<C64>) -> SpherePoint {
        SpherePoint { coords }
    }
}

impl TryFrom<Vec<[f64; 2]>> for SpherePoint {
    type Error = Error;
    fn try_from(v: Vec<[f64; 2]>) -> Result<SpherePoint> {
        SpherePoint::new(v.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}

impl From<SpherePoint> for Vec<[f64; 2]> {
    fn from(p: SpherePoint) -> Self {
        p.coords.iter().map(|c| [c.re, c.im]).collect()
    }
}

pub(crate) fn norm_sqr(z: &[C64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum()
}

/// `⟨z, w⟩ = Σ z_j·conj(w_j)` on raw coordinates.
pub(crate) fn dot(z: &[C64], w: &[C64]) -> C64 {
    z.iter().zip(w).map(|(a, b)| a * b.conj()).sum()
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Dimension { expected: a, got: b })
    }
}

/// Hermitian inner product of two ball points.
pub fn inner(z: &BallPoint, w: &BallPoint) -> Result<C64> {
    check_dims(z.n(), w.n())?;
    Ok(dot(&z.coords, &w.coords))
}

/// Numerator and denominator of `φ_a(z)`.
///
/// With `h = a − z` the numerator `a − P_a z − s_a Q_a z` equals
/// `P_a h + s_a Q_a h`, which stays accurate when `z` is close to `a`.
fn involution_parts(a: &[C64], z: &[C64]) -> (Vec<C64>, C64) {
    let a2 = norm_sqr(a);
    let den = C64::new(1.0, 0.0) - dot(z, a);
    let h: Vec<C64> = a.iter().zip(z).map(|(x, y)| x - y).collect();
    if a2 == 0.0 {
        return (h, den);
    }
    let s = (1.0 - a2).sqrt();
    let coef = dot(&h, a) / a2;
    let num = a
        .iter()
        .zip(&h)
        .map(|(ai, hi)| {
            let p = ai * coef;
            p + (hi - p) * s
        })
        .collect();
    (num, den)
}

pub(crate) fn involution_raw(a: &[C64], z: &[C64]) -> Vec<C64> {
    let (num, den) = involution_parts(a, z);
    num.into_iter().map(|c| c / den).collect()
}

/// The Möbius involution `φ_a` evaluated at `z`.
pub fn involution(a: &BallPoint, z: &BallPoint) -> Result<BallPoint> {
    check_dims(a.n(), z.n())?;
    let out = involution_raw(&a.coords, &z.coords);
    BallPoint::new(out).map_err(|e| Error::Internal(format!("involution left the ball: {e}")))
}

/// `1 − |φ_z(w)|² = (1−|z|²)(1−|w|²)/|1−⟨w,z⟩|²`.
pub(crate) fn pseudo_defect(z: &[C64], w: &[C64]) -> f64 {
    let den = (C64::new(1.0, 0.0) - dot(w, z)).norm_sqr();
    (1.0 - norm_sqr(z)) * (1.0 - norm_sqr(w)) / den
}

/// `|φ_z(w)|`, the pseudo-hyperbolic distance.
pub(crate) fn pseudo_raw(z: &[C64], w: &[C64]) -> f64 {
    let (num, den) = involution_parts(z, w);
    (norm_sqr(&num).sqrt() / den.norm()).min(1.0)
}

/// Bergman metric on raw coordinates (dimensions assumed equal).
pub(crate) fn bergman_raw(z: &[C64], w: &[C64]) -> f64 {
    let x = pseudo_raw(z, w);
    if x < 0.5 {
        x.atanh()
    } else {
        // ½ln((1+x)/(1−x)) = ln(1+x) − ½ln(1−x²)
        x.ln_1p() - 0.5 * pseudo_defect(z, w).ln()
    }
}

/// Bergman metric `β(z, w) = ½ log((1+|φ_z(w)|)/(1−|φ_z(w)|))`.
pub fn bergman_metric(z: &BallPoint, w: &BallPoint) -> Result<f64> {
    check_dims(z.n(), w.n())?;
    Ok(bergman_raw(&z.coords, &w.coords))
}

/// `β(0, z)` from the radius alone.
pub(crate) fn bergman_radius(rho: f64) -> f64 {
    rho.atanh()
}

/// The regions integrated over by the library. Inequalities are strict and
/// evaluated without slack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionSpec {
    /// Korányi region `|1 − ⟨z,ξ⟩| < (γ/2)(1 − |z|²)`.
    Koranyi {
        xi: SpherePoint,
        gamma: f64,
    },
    /// Bergman metric ball `β(z, center) < r`.
    BergmanBall {
        center: BallPoint,
        r: f64,
    },
    /// Non-isotropic ball `|1 − ⟨z,ξ⟩| < δ`.
    NonisotropicBall {
        xi: SpherePoint,
        delta: f64,
    },
    /// Tent `Q(u)`: `|1 − ⟨z, u/|u|⟩| < 1 − |u|²`, with `Q(0) = 𝔹ₙ`.
    Tent {
        u: BallPoint,
    },
    /// `|z| > ρ`.
    Annulus {
        rho: f64,
    },
    WholeBall,
}

/// What a region looks like on the sphere of radius `ρ`.
pub(crate) enum Slice {
    Empty,
    Full,
    /// `{ζ : |1 − ρ⟨ζ, axis⟩| < radius}` about the region's axis.
    Cap {
        radius: f64,
    },
}

impl RegionSpec {
    pub fn koranyi(xi: SpherePoint, gamma: f64) -> RegionSpec {
        RegionSpec::Koranyi { xi, gamma }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RegionSpec::Koranyi { gamma, .. } => ensure(*gamma > 1.0, || format!("aperture γ = {gamma} must exceed 1")),
            RegionSpec::BergmanBall { r, .. } => ensure(*r > 0.0 && r.is_finite(), || format!("radius r = {r} must be positive")),
            RegionSpec::NonisotropicBall { delta, .. } => ensure(*delta > 0.0, || format!("δ = {delta} must be positive")),
            RegionSpec::Annulus { rho } => ensure((0.0..1.0).contains(rho), || format!("ϱ = {rho} must lie in [0, 1)")),
            RegionSpec::Tent { .. } | RegionSpec::WholeBall => Ok(()),
        }
    }

    /// The dimension the region lives in, if it fixes one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            RegionSpec::Koranyi { xi, .. } | RegionSpec::NonisotropicBall { xi, .. } => Some(xi.n()),
            RegionSpec::BergmanBall { center, .. } => Some(center.n()),
            RegionSpec::Tent { u } => Some(u.n()),
            RegionSpec::Annulus { .. } | RegionSpec::WholeBall => None,
        }
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        match self.dim() {
            Some(d) => check_dims(d, n),
            None => Ok(()),
        }
    }

    /// Membership on raw coordinates; the dimension is assumed to match.
    pub(crate) fn contains_raw(&self, z: &[C64]) -> bool {
        let one = C64::new(1.0, 0.0);
        match self {
            RegionSpec::Koranyi { xi, gamma } => (one - dot(z, &xi.coords)).norm() < 0.5 * gamma * (1.0 - norm_sqr(z)),
            RegionSpec::BergmanBall { center, r } => bergman_raw(z, &center.coords) < *r,
            RegionSpec::NonisotropicBall { xi, delta } => (one - dot(z, &xi.coords)).norm() < *delta,
            RegionSpec::Tent { u } => {
                let u2 = norm_sqr(&u.coords);
                if u2 == 0.0 {
                    return true;
                }
                let un = u2.sqrt();
                let axis: Vec<C64> = u.coords.iter().map(|c| c / un).collect();
                (one - dot(z, &axis)).norm() < 1.0 - u2
            }
            RegionSpec::Annulus { rho } => norm_sqr(z).sqrt() > *rho,
            RegionSpec::WholeBall => true,
        }
    }

    /// Open interval of depths `1 − |z|` outside of which the region is empty.
    pub(crate) fn depth_range(&self) -> (f64, f64) {
        match self {
            RegionSpec::Koranyi { gamma, .. } => (0.0, (2.0 - 2.0 / gamma).min(1.0)),
            RegionSpec::NonisotropicBall { delta, .. } => (0.0, delta.min(1.0)),
            RegionSpec::Tent { u } => (0.0, 1.0 - u.norm().powi(2)),
            RegionSpec::Annulus { rho } => (0.0, 1.0 - rho),
            RegionSpec::WholeBall => (0.0, 1.0),
            RegionSpec::BergmanBall { center, r } => {
                let b0 = bergman_radius(center.norm());
                let outer = b0 + r;
                let inner = b0 - r;
                // 1 − tanh x = 2/(e^{2x} + 1)
                let lo = 2.0 / ((2.0 * outer).exp() + 1.0);
                let hi = if inner <= 0.0 { 1.0 } else { 2.0 / ((2.0 * inner).exp() + 1.0) };
                (lo * (1.0 - 1e-12), (hi * (1.0 + 1e-12)).min(1.0))
            }
        }
    }

    /// The slice of the region at radius `ρ = 1 − depth`; `y = 1 − ρ²`.
    /// Bergman balls and tents `Q(u ≠ 0)` return `None`; tents are handled
    /// after [`RegionSpec::normalized`].
    pub(crate) fn slice(&self, depth: f64, y: f64) -> Option<Slice> {
        let rho = 1.0 - depth;
        Some(match self {
            RegionSpec::Koranyi { gamma, .. } => Slice::Cap { radius: 0.5 * gamma * y },
            RegionSpec::NonisotropicBall { delta, .. } => Slice::Cap { radius: *delta },
            RegionSpec::Tent { u } => {
                let u2 = norm_sqr(&u.coords);
                if u2 == 0.0 {
                    Slice::Full
                } else {
                    return None;
                }
            }
            RegionSpec::Annulus { rho: r0 } => {
                if rho > *r0 {
                    Slice::Full
                } else {
                    Slice::Empty
                }
            }
            RegionSpec::WholeBall => Slice::Full,
            RegionSpec::BergmanBall { .. } => return None,
        })
    }

    /// Rewrites a tent `Q(u)` with `u ≠ 0` as the equivalent non-isotropic
    /// ball `B_{1−|u|²}(u/|u|)`; other regions are returned unchanged.
    pub(crate) fn normalized(&self) -> RegionSpec {
        if let RegionSpec::Tent { u } = self {
            let u2 = norm_sqr(&u.coords);
            if u2 > 0.0 {
                let un = u2.sqrt();
                let xi = SpherePoint::from_raw(u.coords.iter().map(|c| c / un).collect());
                return RegionSpec::NonisotropicBall { xi, delta: 1.0 - u2 };
            }
            return RegionSpec::WholeBall;
        }
        self.clone()
    }
}

/// Whether `z` lies in `region`.
pub fn in_region(z: &BallPoint, region: &RegionSpec) -> Result<bool> {
    region.validate()?;
    region.check_dim(z.n())?;
    Ok(region.contains_raw(&z.coords))
}

/// Euclidean ball `B(c, radius)` enclosing `D(a, r)`, returned as `(c, radius)`.
///
/// `D(a, r)` is an ellipsoid with centre `(1−R²)a/(1−R²|a|²)`, `R = tanh r`,
/// semi-axis `R(1−|a|²)/(1−R²|a|²)` along `a` and
/// `R√(1−|a|²)/√(1−R²|a|²)` across it.
pub(crate) fn bergman_ball_enclosure(a: &[C64], r: f64) -> (Vec<C64>, f64) {
    let big_r = r.tanh();
    let a2 = norm_sqr(a);
    let y = 1.0 - a2;
    let q = 1.0 - big_r * big_r * a2;
    let shrink = (1.0 - big_r * big_r) / q;
    let center = a.iter().map(|c| c * shrink).collect();
    let along = big_r * y / q;
    let across = if a.len() >= 2 { big_r * (y / q).sqrt() } else { 0.0 };
    (center, along.max(across) * (1.0 + 1e-9) + 1e-12 * y)
}

/// Estimate of `σ(I(z))` with `I(z) = {ξ : z ∈ Γ(ξ)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Number of draws that landed in `I(z)`.
    pub hits: usize,
    /// Set when no draw landed in `I(z)`; the value is then 0.
    pub zero_hits: bool,
}

/// Monte-Carlo estimate of `σ(I(z))` for the default aperture.
pub fn cap_measure(z: &BallPoint, samples: usize, seed: u64) -> Result<CapEstimate> {
    cap_measure_with_aperture(z, DEFAULT_APERTURE, samples, seed)
}

/// Monte-Carlo estimate of `σ({ξ : z ∈ Γ_γ(ξ)})`.
///
/// Since `⟨z, ξ⟩ = |z|⟨z/|z|, ξ⟩`, the set is a slice around `z/|z|` and
/// draws are confined to a box enclosing it, which keeps the hit rate high
/// even when `σ(I(z)) ≍ (1−|z|²)ⁿ` is tiny.
pub fn cap_measure_with_aperture(z: &BallPoint, gamma: f64, samples: usize, seed: u64) -> Result<CapEstimate> {
    ensure(samples >= 1000, || format!("cap_measure needs ≥ 10³ samples, got {samples}"))?;
    ensure(gamma > 1.0, || format!("aperture γ = {gamma} must exceed 1"))?;
    let rho = z.norm();
    if rho == 0.0 {
        // |1 − 0| = 1 < γ/2 holds for every ξ or for none.
        let value = if 1.0 < 0.5 * gamma { 1.0 } else { 0.0 };
        return Ok(CapEstimate { value, std_error: 0.0, hits: if value > 0.0 { samples } else { 0 }, zero_hits: value == 0.0 });
    }
    let axis: Vec<C64> = z.coords.iter().map(|c| c / rho).collect();
    let frame = Frame::new(&axis);
    let radius = 0.5 * gamma * z.defect();
    let mut rng = stream(seed, tag::CAP, 0);
    let mut weights = Vec::with_capacity(samples);
    let mut hits = 0;
    for _ in 0..samples {
        match sample_slice(&frame, rho, 1.0 - rho, radius, 0.0, &mut rng) {
            Some(d) => {
                hits += 1;
                weights.push(d.weight);
            }
            None => weights.push(0.0),
        }
    }
    let (value, var) = crate::rng::mean_and_var(&weights);
    Ok(CapEstimate { value, std_error: var.sqrt(), hits, zero_hits: hits == 0 })
}

/// A Haar-random unitary matrix (rows), from Gram–Schmidt on a complex
/// Gaussian matrix.
pub fn random_unitary(n: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = stream(seed, tag::SPHERE, u64::MAX);
    let mut rows: Vec<Vec<C64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v = crate::sampling::gaussian_vec(n, &mut rng);
        for _ in 0..2 {
            for r in &rows {
                let p = dot(&v, r);
                for (x, y) in v.iter_mut().zip(r) {
                    *x -= p * y;
                }
            }
        }
        let norm = norm_sqr(&v).sqrt();
        if norm > 1e-6 {
            rows.push(v.into_iter().map(|c| c / norm).collect());
        }
    }
    rows
}

pub(crate) fn apply_matrix(u: &[Vec<C64>], z: &[C64]) -> Vec<C64> {
    u.iter().map(|row| row.iter().zip(z).map(|(a, b)| a * b).sum()).collect()
}

/// `U z` for a unitary `U` given by rows.
pub fn apply_unitary(u: &[Vec<C64>], z: &BallPoint) -> Result<BallPoint> {
    check_dims(u.len(), z.n())?;
    BallPoint::new(apply_matrix(u, &z.coords))
}

/// Widened aperture `γ'` with `⋃_{z ∈ Γ_γ(ξ)} D(z, r) ⊆ Γ_{γ'}(ξ)` on sampled
/// witnesses.
///
/// Starting from `γ`, the aperture is doubled until `witnesses` pairs
/// `(z, w)` with `z ∈ Γ_γ(e₁)` and `w` on the boundary of `D(z, r)` all
/// satisfy `w ∈ Γ_{γ'}(e₁)`. The same witnesses are reused at each step.
pub fn widen_aperture(n: usize, gamma: f64, r: f64, witnesses: usize, seed: u64) -> Result<f64> {
    ensure(n >= 1, || "n must be at least 1".into())?;
    ensure(gamma > 1.0, || format!("aperture γ = {gamma} must exceed 1"))?;
    ensure(r > 0.0 && r < 20.0, || format!("radius r = {r} must lie in (0, 20)"))?;
    let xi = SpherePoint::e1(n)?;
    let frame = Frame::new(&xi.coords);
    let cone = RegionSpec::Koranyi { xi: xi.clone(), gamma };
    let (_, t_max) = cone.depth_range();
    let big_r = r.tanh() * (1.0 - 1e-12);
    let mut rng = stream(seed, tag::APERTURE, 0);
    let mut pairs = Vec::with_capacity(witnesses);
    while pairs.len() < witnesses {
        let t: f64 = (rng.gen_range(1e-9f64.ln()..t_max.ln())).exp();
        let rho = 1.0 - t;
        let y = t * (2.0 - t);
        let Some(d) = sample_slice(&frame, rho, t, 0.5 * gamma * y, 0.0, &mut rng) else {
            continue;
        };
        let z: Vec<C64> = d.zeta.iter().map(|c| c * rho).collect();
        let x: Vec<C64> = uniform_sphere(n, &mut rng).into_iter().map(|c| c * big_r).collect();
        let w = involution_raw(&z, &x);
        pairs.push(w);
    }
    let mut g = gamma;
    for _ in 0..64 {
        let widened = RegionSpec::Koranyi { xi: xi.clone(), gamma: g };
        if pairs.iter().all(|w| widened.contains_raw(w)) {
            return Ok(g);
        }
        g *= 2.0;
    }
    contract(format!("no aperture up to {g} contains the r = {r} neighbourhood"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn ball_point(n: usize, rng: &mut impl Rng) -> BallPoint {
        let dir = uniform_sphere(n, rng);
        let rho: f64 = rng.gen::<f64>().powf(1.0 / (2.0 * n as f64)) * 0.999;
        BallPoint::new(dir.into_iter().map(|c| c * rho).collect()).unwrap()
    }

    #[test]
    fn involution_identities() {
        let mut rng = stream(1, tag::EXPERIMENT, 0);
        for n in 1..=3 {
            let a = ball_point(n, &mut rng);
            let z = ball_point(n, &mut rng);
            let zero = BallPoint::origin(n).unwrap();
            let at0 = involution(&a, &zero).unwrap();
            let ata = involution(&a, &a).unwrap();
            for (x, y) in at0.coords().iter().zip(a.coords()) {
                assert!((x - y).norm() < 1e-14);
            }
            assert!(ata.norm() < 1e-14);
            let twice = involution(&a, &involution(&a, &z).unwrap()).unwrap();
            for (x, y) in twice.coords().iter().zip(z.coords()) {
                assert!((x - y).norm() < 1e-12);
            }
            let neg = involution(&zero, &z).unwrap();
            for (x, y) in neg.coords().iter().zip(z.coords()) {
                assert!((x + y).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn metric_examples() {
        let zero = BallPoint::origin(2).unwrap();
        let w = BallPoint::real(&[0.5, 0.0]).unwrap();
        assert_eq!(bergman_metric(&zero, &zero).unwrap(), 0.0);
        assert!((bergman_metric(&zero, &w).unwrap() - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!(matches!(bergman_metric(&zero, &BallPoint::origin(3).unwrap()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn metric_near_boundary_keeps_precision() {
        // Two points on one radius: β = atanh(ρ₂) − atanh(ρ₁).
        let a = BallPoint::real(&[1.0 - 1e-9]).unwrap();
        let b = BallPoint::real(&[1.0 - 1e-10]).unwrap();
        let expect = (1e-9f64 / 1e-10 * (2.0 - 1e-10) / (2.0 - 1e-9)).ln() * 0.5;
        assert!((bergman_metric(&a, &b).unwrap() - expect).abs() < 1e-6);
    }

    #[test]
    fn region_examples() {
        let xi = SpherePoint::e1(1).unwrap();
        let cone = RegionSpec::koranyi(xi.clone(), 2.0);
        assert!(!in_region(&BallPoint::origin(1).unwrap(), &cone).unwrap());
        assert!(in_region(&BallPoint::real(&[0.5]).unwrap(), &cone).unwrap());
        let tent0 = RegionSpec::Tent { u: BallPoint::origin(1).unwrap() };
        assert!(in_region(&BallPoint::real(&[-0.9]).unwrap(), &tent0).unwrap());
        let ann = RegionSpec::Annulus { rho: 0.5 };
        assert!(!in_region(&BallPoint::real(&[0.5]).unwrap(), &ann).unwrap());
        assert!(RegionSpec::Koranyi { xi, gamma: 1.0 }.validate().is_err());
    }

    #[test]
    fn regions_round_trip_json() {
        let r = RegionSpec::BergmanBall { center: BallPoint::real(&[0.1, -0.2]).unwrap(), r: 0.5 };
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"kind\":\"bergman_ball\""));
        assert_eq!(serde_json::from_str::<RegionSpec>(&s).unwrap(), r);
        assert!(serde_json::from_str::<BallPoint>("[[1.0,0.0]]").is_err());
    }

    #[test]
    fn depth_range_brackets_membership() {
        let mut rng = stream(5, tag::EXPERIMENT, 0);
        let regions = vec![
            RegionSpec::koranyi(SpherePoint::e1(2).unwrap(), 3.0),
            RegionSpec::BergmanBall { center: BallPoint::real(&[0.7, 0.1]).unwrap(), r: 0.8 },
            RegionSpec::NonisotropicBall { xi: SpherePoint::e1(2).unwrap(), delta: 0.3 },
            RegionSpec::Tent { u: BallPoint::real(&[0.0, 0.6]).unwrap() },
        ];
        for region in &regions {
            let (lo, hi) = region.depth_range();
            for _ in 0..20_000 {
                let z = ball_point(2, &mut rng);
                if region.contains_raw(z.coords()) {
                    let t = 1.0 - z.norm();
                    assert!(t > lo && t < hi, "{region:?}: depth {t} outside ({lo}, {hi})");
                }
            }
        }
    }

    #[test]
    fn enclosure_contains_bergman_ball() {
        let mut rng = stream(6, tag::EXPERIMENT, 0);
        for n in 1..=3 {
            for _ in 0..50 {
                let a = ball_point(n, &mut rng);
                let r = rng.gen_range(0.05..3.0);
                let (c, rad) = bergman_ball_enclosure(a.coords(), r);
                for _ in 0..50 {
                    let x: Vec<C64> = uniform_sphere(n, &mut rng).into_iter().map(|c| c * r.tanh() * rng.gen::<f64>().sqrt()).collect();
                    let w = involution_raw(a.coords(), &x);
                    let dist = norm_sqr(&w.iter().zip(&c).map(|(p, q)| p - q).collect::<Vec<_>>()).sqrt();
                    assert!(dist <= rad, "n={n} dist={dist} rad={rad}");
                }
            }
        }
    }

    #[test]
    fn cap_measure_origin_is_empty() {
        let est = cap_measure(&BallPoint::origin(2).unwrap(), 1000, 1).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(est.zero_hits);
    }

    /// Exact `σ(I(z))` for n = 1: the arc `sin²(θ/2) < (R² − d²)/(4ρ)`.
    fn cap_oracle_n1(rho: f64) -> f64 {
        let d = 1.0 - rho;
        let big_r = 1.0 - rho * rho;
        let s2 = ((big_r * big_r - d * d) / (4.0 * rho)).clamp(0.0, 1.0);
        2.0 * s2.sqrt().asin() / std::f64::consts::PI
    }

    #[test]
    fn cap_measure_matches_arc_oracle() {
        for rho in [0.5, 0.9, 0.99, 0.999] {
            let z = BallPoint::real(&[rho]).unwrap();
            let est = cap_measure(&z, 20_000, 3).unwrap();
            let exact = cap_oracle_n1(rho);
            assert!((est.value - exact).abs() < 1e-12 + 4.0 * est.std_error.max(1e-12), "{rho}: {} vs {exact}", est.value);
            let ratio = est.value / (1.0 - rho * rho);
            assert!((0.27..=0.51).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn cap_measure_against_hit_or_miss_n2() {
        let z = BallPoint::new(vec![C64::new(0.3, 0.4), C64::new(0.0, -0.5)]).unwrap();
        let est = cap_measure(&z, 50_000, 4).unwrap();
        let mut rng = stream(9, tag::EXPERIMENT, 0);
        let m = 400_000;
        let cone_hits = (0..m)
            .filter(|_| {
                let xi = uniform_sphere(2, &mut rng);
                (C64::new(1.0, 0.0) - dot(z.coords(), &xi)).norm() < z.defect()
            })
            .count();
        let p = cone_hits as f64 / m as f64;
        let se = (p * (1.0 - p) / m as f64).sqrt();
        assert!((est.value - p).abs() < 4.0 * (se * se + est.std_error * est.std_error).sqrt());
    }

    #[test]
    fn cap_measure_is_rotation_invariant() {
        let z = BallPoint::new(vec![C64::new(0.6, 0.1), C64::new(0.2, -0.5)]).unwrap();
        let u = random_unitary(2, 11);
        let uz = apply_unitary(&u, &z).unwrap();
        let a = cap_measure(&z, 20_000, 1).unwrap();
        let b = cap_measure(&uz, 20_000, 2).unwrap();
        assert!((a.value - b.value).abs() < 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt());
    }

    #[test]
    fn widened_aperture_contains_neighbourhoods() {
        let g = widen_aperture(2, 2.0, 0.5, 10_000, 1).unwrap();
        assert!(g > 2.0);
        assert!(g <= 64.0);
    }

    fn arb_point(n: usize) -> impl Strategy<Value = BallPoint> {
        (proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n), 0.0f64..0.995).prop_map(move |(v, rho)| {
            let raw: Vec<C64> = v.into_iter().map(|(a, b)| C64::new(a, b)).collect();
            let norm = norm_sqr(&raw).sqrt().max(1e-9);
            BallPoint::new(raw.into_iter().map(|c| c * (rho / norm)).collect()).unwrap()
        })
    }

    fn triple() -> impl Strategy<Value = (BallPoint, BallPoint, BallPoint)> {
        (1usize..=3).prop_flat_map(|n| (arb_point(n), arb_point(n), arb_point(n)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn mobius_invariance((a, z, w) in triple()) {
            let before = bergman_metric(&z, &w).unwrap();
            let after = bergman_metric(&involution(&a, &z).unwrap(), &involution(&a, &w).unwrap()).unwrap();
            prop_assert!((before - after).abs() < 1e-9, "{before} vs {after}");
        }

        #[test]
        fn metric_axioms((x, y, z) in triple()) {
            let xy = bergman_metric(&x, &y).unwrap();
            let yx = bergman_metric(&y, &x).unwrap();
            prop_assert!(xy >= 0.0);
            prop_assert!((xy - yx).abs() < 1e-12);
            prop_assert!(bergman_metric(&x, &x).unwrap() < 1e-12);
            let xz = bergman_metric(&x, &z).unwrap();
            let zy = bergman_metric(&z, &y).unwrap();
            prop_assert!(xy <= xz + zy + 1e-9);
        }

        #[test]
        fn koranyi_monotone_in_aperture((z, _, _) in triple(), g in 1.01f64..6.0, extra in 0.0f64..4.0) {
            let xi = SpherePoint::e1(z.n()).unwrap();
            let small = RegionSpec::koranyi(xi.clone(), g);
            let big = RegionSpec::koranyi(xi, g + extra);
            if in_region(&z, &small).unwrap() {
                prop_assert!(in_region(&z, &big).unwrap());
            }
        }

        #[test]
        fn bergman_balls_nest((c, z, _) in triple(), r1 in 0.01f64..3.0, dr in 0.0f64..2.0) {
            let small = RegionSpec::BergmanBall { center: c.clone(), r: r1 };
            let big = RegionSpec::BergmanBall { center: c, r: r1 + dr };
            if in_region(&z, &small).unwrap() {
                prop_assert!(in_region(&z, &big).unwrap());
            }
        }

        #[test]
        fn cone_points_are_comparable((z, _, _) in triple()) {
            // Inside Γ₂(ξ): (1−|z|²)/2 ≤ |1−⟨z,ξ⟩| < 1−|z|².
            let xi = SpherePoint::e1(z.n()).unwrap();
            let gap = (C64::new(1.0, 0.0) - dot(z.coords(), xi.coords())).norm();
            let cone = RegionSpec::koranyi(xi, 2.0);
            if in_region(&z, &cone).unwrap() {
                prop_assert!(gap < z.defect());
                prop_assert!(z.defect() <= 2.0 * gap + 1e-15);
            }
        }
    }
}
