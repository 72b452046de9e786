//! Truncated δ-lattices in the Bergman metric.
//!
//! A lattice is built greedily: candidates from a mesh of
//! `{β(0, z) ≤ R_max}` are visited in increasing `|z|`, starting at the
//! origin, and accepted when they are at Bergman distance `≥ δ/2` from every
//! point accepted so far. The result is a maximal `δ/2`-separated subset of
//! the mesh; since the mesh has Bergman spacing `δ/8`, every point of the
//! truncated ball lies within roughly `δ/2 + δ/8` of the lattice.
//!
//! The mesh uses radial levels `tanh(j·h)` with `h = δ/8` and angular steps
//! matched to the metric at each level. For `n = 2` the sphere is
//! parametrized as
//! `ζ = e^{iψ}(cos φ·e^{−i sin²φ χ}, sin φ·e^{i cos²φ χ})`, in which `ψ`
//! moves along the complex normal (metric factor `ρ/(1−ρ²)`) and `φ`, `χ`
//! move tangentially (metric factors `ρ/√(1−ρ²)` and
//! `ρ sin φ cos φ/√(1−ρ²)`). Only `n ≤ 2` is supported: the mesh grows like
//! `e^{2n R_max}/δ^{2n}`.

use crate::error::{ensure, Error, Result};
use crate::geometry::{apply_matrix, bergman_raw, random_unitary, BallPoint};
use crate::index::PointIndex;
use crate::rng::{stream, tag};
use crate::sampling::uniform_sphere;
use crate::C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Largest mesh the builder will enumerate.
pub const MESH_LIMIT: f64 = 5e7;

/// Samples used by [`build_lattice`] to certify its output.
pub const BUILD_SAMPLES: usize = 10_000;

/// Outcome of [`verify_lattice`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeReport {
    /// Every covering sample had a lattice point within Bergman distance δ.
    pub covering_ok: bool,
    /// The first uncovered sample, if any.
    pub uncovered_witness: Option<BallPoint>,
    pub covering_samples: usize,
    /// Exact minimum pairwise Bergman distance (infinite for < 2 points).
    pub min_separation: f64,
    pub separation_ok: bool,
    /// Largest observed `#{k : β(z, a_k) < 4δ}` over the overlap samples.
    pub max_overlap: usize,
    pub overlap_samples: usize,
    /// `max_overlap ≤ overlap_bound`.
    pub overlap_ok: bool,
}

impl LatticeReport {
    pub fn ok(&self) -> bool {
        self.covering_ok && self.separation_ok && self.overlap_ok
    }
}

/// A finite truncated δ-lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    n: usize,
    delta: f64,
    r_max: f64,
    points: Vec<BallPoint>,
    overlap_bound: u64,
    report: Option<LatticeReport>,
}

/// `(sinh(4δ + δ/4)/sinh(δ/4))^{2n}`: the balls `D(a_k, δ/4)` are disjoint,
/// and those with `z ∈ D(a_k, 4δ)` lie in `D(z, 4δ + δ/4)`, whose invariant
/// volume is `sinh^{2n}` of the radius.
pub fn certified_overlap_bound(n: usize, delta: f64) -> u64 {
    ((4.25 * delta).sinh() / (0.25 * delta).sinh()).powi(2 * n as i32).floor() as u64
}

impl Lattice {
    /// A lattice from explicit points, without a report.
    pub fn from_points(n: usize, delta: f64, r_max: f64, points: Vec<BallPoint>) -> Result<Lattice> {
        ensure(delta > 0.0 && delta < 1.0, || format!("δ = {delta} must lie in (0, 1)"))?;
        ensure(r_max > 0.0, || format!("R_max = {r_max} must be positive"))?;
        for p in &points {
            if p.n() != n {
                return Err(Error::Dimension { expected: n, got: p.n() });
            }
        }
        Ok(Lattice { n, delta, r_max, points, overlap_bound: certified_overlap_bound(n, delta), report: None })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn points(&self) -> &[BallPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn overlap_bound(&self) -> u64 {
        self.overlap_bound
    }

    pub fn report(&self) -> Option<&LatticeReport> {
        self.report.as_ref()
    }

    pub(crate) fn index(&self) -> PointIndex {
        PointIndex::new(self.points.iter().map(|p| p.coords().to_vec()).collect())
    }
}

struct MeshLevel {
    rho: f64,
    /// For `n = 1`: angle count. For `n = 2`: `(φ, χ count)` pairs and the
    /// `ψ` count.
    psi_count: usize,
    phis: Vec<(f64, usize)>,
}

fn mesh_levels(n: usize, delta: f64, r_max: f64) -> Vec<MeshLevel> {
    let h = delta / 8.0;
    let levels = (r_max / h).ceil() as usize;
    (0..=levels)
        .map(|j| {
            let b = (j as f64 * h).min(r_max);
            let rho = b.tanh();
            if j == 0 {
                return MeshLevel { rho: 0.0, psi_count: 1, phis: vec![(0.0, 1)] };
            }
            let y = 1.0 / b.cosh().powi(2);
            let psi_count = (2.0 * PI * rho / (h * y)).ceil() as usize;
            let phis = if n == 1 {
                vec![(0.0, 1)]
            } else {
                let d_phi = h * y.sqrt() / rho;
                let m_phi = (FRAC_PI_2 / d_phi).ceil() as usize;
                (0..m_phi)
                    .map(|i| {
                        let phi = (i as f64 + 0.5) * FRAC_PI_2 / m_phi as f64;
                        let d_chi = (d_phi / (phi.sin() * phi.cos())).min(2.0 * PI);
                        (phi, (2.0 * PI / d_chi).ceil() as usize)
                    })
                    .collect()
            };
            MeshLevel { rho, psi_count, phis }
        })
        .collect()
}

fn mesh_size(levels: &[MeshLevel]) -> f64 {
    levels.iter().map(|l| l.psi_count as f64 * l.phis.iter().map(|p| p.1 as f64).sum::<f64>()).sum()
}

/// Candidate mesh in increasing `|z|`, origin first.
pub(crate) fn mesh(n: usize, delta: f64, r_max: f64, seed: u64) -> Result<Vec<Vec<C64>>> {
    let levels = mesh_levels(n, delta, r_max);
    let size = mesh_size(&levels);
    if size > MESH_LIMIT {
        return Err(Error::Lattice(format!(
            "mesh for n = {n}, δ = {delta}, R_max = {r_max} has {size:.3e} candidates, above the limit {MESH_LIMIT:.0e}"
        )));
    }
    let u = random_unitary(n, seed);
    let mut rng = stream(seed, tag::LATTICE_MESH, 0);
    let mut out = Vec::with_capacity(size as usize);
    for level in &levels {
        if level.rho == 0.0 {
            out.push(vec![C64::new(0.0, 0.0); n]);
            continue;
        }
        let psi0: f64 = rng.gen_range(0.0..2.0 * PI);
        let chi0: f64 = rng.gen_range(0.0..2.0 * PI);
        for &(phi, chi_count) in &level.phis {
            let (s2, c2) = (phi.sin().powi(2), phi.cos().powi(2));
            for k in 0..level.psi_count {
                let psi = psi0 + 2.0 * PI * k as f64 / level.psi_count as f64;
                for m in 0..chi_count {
                    let z = if n == 1 {
                        vec![C64::from_polar(level.rho, psi)]
                    } else {
                        let chi = chi0 + 2.0 * PI * m as f64 / chi_count as f64;
                        vec![C64::from_polar(level.rho * phi.cos(), psi - s2 * chi), C64::from_polar(level.rho * phi.sin(), psi + c2 * chi)]
                    };
                    out.push(apply_matrix(&u, &z));
                }
            }
        }
    }
    Ok(out)
}

/// Greedy maximal `δ/2`-separated subset of the mesh of `{β(0,z) ≤ R_max}`,
/// verified on [`BUILD_SAMPLES`] samples.
///
/// Fails with [`Error::Lattice`] when the mesh is too large to enumerate or
/// when the covering check finds an uncovered sample.
pub fn build_lattice(n: usize, delta: f64, r_max: f64, seed: u64) -> Result<Lattice> {
    ensure((1..=2).contains(&n), || format!("lattices are built for n ∈ {{1, 2}}, got {n}"))?;
    ensure(delta > 0.0 && delta < 1.0, || format!("δ = {delta} must lie in (0, 1)"))?;
    ensure(r_max > 0.0 && r_max <= 12.0, || format!("R_max = {r_max} must lie in (0, 12]"))?;
    let candidates = mesh(n, delta, r_max, seed)?;
    let half = 0.5 * delta;
    let mut index = PointIndex::growable(n);
    for c in candidates {
        if index.within_bergman(&c, half).is_empty() {
            index.push(c);
        }
    }
    let points = index.points().iter().map(|p| BallPoint::from_raw(p.clone())).collect();
    let mut lattice = Lattice::from_points(n, delta, r_max, points)?;
    let report = verify_lattice(&lattice, BUILD_SAMPLES, seed);
    if !report.covering_ok {
        let w = report.uncovered_witness.as_ref().map(|w| format!("{:?}", w.coords())).unwrap_or_default();
        return Err(Error::Lattice(format!("mesh too coarse: sample {w} has no lattice point within δ")));
    }
    lattice.report = Some(report);
    Ok(lattice)
}

/// A point with Bergman radius uniform in `[0, b_max]` and uniform direction.
fn sample_by_radius<R: Rng>(n: usize, b_max: f64, rng: &mut R) -> Vec<C64> {
    let b = rng.gen_range(0.0..=b_max.max(0.0));
    let rho = b.tanh();
    uniform_sphere(n, rng).into_iter().map(|c| c * rho).collect()
}

/// Checks covering, separation and overlap.
///
/// Covering uses `samples` points with Bergman radius uniform in
/// `[0, R_max − δ]`; overlap counts `D(a_k, 4δ)` at `samples` points within
/// `R_max − 4δ`. Separation is exact.
pub fn verify_lattice(lattice: &Lattice, samples: usize, seed: u64) -> LatticeReport {
    let n = lattice.n;
    let delta = lattice.delta;
    let index = lattice.index();
    let pts = index.points();

    let covering: Vec<Option<Vec<C64>>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, tag::LATTICE_VERIFY, i as u64);
            let z = sample_by_radius(n, lattice.r_max - delta, &mut rng);
            index.within_bergman(&z, delta).is_empty().then_some(z)
        })
        .collect();
    let witness = covering.into_iter().flatten().next();

    let min_separation = (0..pts.len())
        .into_par_iter()
        .map(|k| {
            let mut radius = delta;
            loop {
                let near: Vec<f64> =
                    index.within_bergman(&pts[k], radius).into_iter().filter(|&j| j != k).map(|j| bergman_raw(&pts[k], &pts[j])).collect();
                if let Some(m) = near.into_iter().reduce(f64::min) {
                    return m;
                }
                if radius > 2.0 * lattice.r_max + 1.0 {
                    return f64::INFINITY;
                }
                radius *= 2.0;
            }
        })
        .reduce(|| f64::INFINITY, f64::min);

    let overlap_radius = (lattice.r_max - 4.0 * delta).max(0.0);
    let max_overlap = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, tag::LATTICE_VERIFY, (samples + i) as u64);
            let z = sample_by_radius(n, overlap_radius, &mut rng);
            index.within_bergman(&z, 4.0 * delta).len()
        })
        .max()
        .unwrap_or(0);

    LatticeReport {
        covering_ok: witness.is_none(),
        uncovered_witness: witness.map(BallPoint::from_raw),
        covering_samples: samples,
        min_separation,
        separation_ok: min_separation >= 0.5 * delta,
        max_overlap,
        overlap_samples: samples,
        overlap_ok: (max_overlap as u64) <= lattice.overlap_bound,
    }
}
