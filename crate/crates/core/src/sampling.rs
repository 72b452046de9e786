//! Low-level samplers on the sphere: uniform directions and the slices
//! `{ζ : R_in ≤ |1 − ρ⟨ζ, ξ₀⟩| < R}` that every approach region reduces to
//! once the radius of `z = ρζ` is fixed.

use crate::C64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

pub(crate) fn gaussian_vec<R: Rng>(n: usize, rng: &mut R) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect()
}

pub(crate) fn uniform_sphere<R: Rng>(n: usize, rng: &mut R) -> Vec<C64> {
    loop {
        let v = gaussian_vec(n, rng);
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

/// Orthonormal frame `{ξ₀, e₂, …, eₙ}` of ℂⁿ with a prescribed first vector.
#[derive(Clone, Debug)]
pub(crate) struct Frame {
    pub axis: Vec<C64>,
    pub perp: Vec<Vec<C64>>,
}

impl Frame {
    pub fn new(axis: &[C64]) -> Frame {
        let n = axis.len();
        let mut basis: Vec<Vec<C64>> = vec![axis.to_vec()];
        // Gram–Schmidt against the standard basis, skipping the dependent one.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| axis[i].norm_sqr().partial_cmp(&axis[j].norm_sqr()).unwrap());
        for &k in &order {
            if basis.len() == n {
                break;
            }
            let mut v = vec![C64::new(0.0, 0.0); n];
            v[k] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for b in &basis {
                    let proj: C64 = v.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
                    for (x, y) in v.iter_mut().zip(b) {
                        *x -= proj * y;
                    }
                }
            }
            let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-8 {
                basis.push(v.into_iter().map(|c| c / norm).collect());
            }
        }
        let perp = basis.split_off(1);
        Frame { axis: basis.pop().unwrap(), perp }
    }

    pub fn compose(&self, c: C64, tail: &[C64]) -> Vec<C64> {
        let mut out: Vec<C64> = self.axis.iter().map(|a| a * c).collect();
        for (coef, e) in tail.iter().zip(&self.perp) {
            for (o, x) in out.iter_mut().zip(e) {
                *o += coef * x;
            }
        }
        out
    }
}

/// A direction `ζ` with its importance weight; the weights average to the
/// σ-measure of the slice.
pub(crate) struct SliceDraw {
    pub zeta: Vec<C64>,
    pub weight: f64,
}

/// Draws from `{ζ ∈ 𝕊ₙ : r_in ≤ |1 − ρ⟨ζ, ξ₀⟩| < r_out}`.
///
/// `depth = 1 − ρ` is passed separately so that thin slices near the
/// boundary keep full relative precision. Returns `None` for a zero-weight
/// draw (rejected or empty slice).
pub(crate) fn sample_slice<R: Rng>(frame: &Frame, rho: f64, depth: f64, r_out: f64, r_in: f64, rng: &mut R) -> Option<SliceDraw> {
    let n = frame.axis.len();
    if r_out <= r_in {
        return None;
    }
    if rho <= 0.0 {
        // |1 − 0| = 1 for every ζ.
        if r_in <= 1.0 && 1.0 < r_out {
            return Some(SliceDraw { zeta: uniform_sphere(n, rng), weight: 1.0 });
        }
        return None;
    }
    if n == 1 {
        // |1 − ρe^{iθ}|² = depth² + 4ρ sin²(θ/2).
        let half_angle = |r: f64| -> f64 {
            if r <= depth {
                return 0.0;
            }
            let s2 = (r - depth) * (r + depth) / (4.0 * rho);
            2.0 * s2.min(1.0).sqrt().asin()
        };
        let hi = half_angle(r_out);
        let lo = half_angle(r_in);
        if hi <= lo {
            return None;
        }
        let theta: f64 = rng.gen_range(lo..hi) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let c = C64::from_polar(1.0, theta);
        return Some(SliceDraw { zeta: vec![frame.axis[0] * c], weight: (hi - lo) / PI });
    }
    // n ≥ 2: w = 1 − ⟨ζ, ξ₀⟩ lies in the disk |w − 1| ≤ 1 with density
    // ((n−1)/π)(1 − |1−w|²)^{n−2}; the slice is the annulus
    // r_in/ρ ≤ |w + depth/ρ| < r_out/ρ.
    let cx = -depth / rho;
    let ro = r_out / rho;
    let x_lo = (cx - ro).max(0.0);
    let x_hi = (cx + ro).min(2.0);
    let y_lo = (-ro).max(-1.0);
    let y_hi = ro.min(1.0);
    if x_lo >= x_hi || y_lo >= y_hi {
        return None;
    }
    let area = (x_hi - x_lo) * (y_hi - y_lo);
    let w = C64::new(rng.gen_range(x_lo..x_hi), rng.gen_range(y_lo..y_hi));
    let shifted = (w - C64::new(cx, 0.0)).norm();
    if shifted >= ro || shifted < r_in / rho {
        return None;
    }
    // 1 − |1 − w|² = 2 Re w − |w|², accurate for small w.
    let one_minus_c2 = 2.0 * w.re - w.norm_sqr();
    if one_minus_c2 < 0.0 {
        return None;
    }
    let density = (n as f64 - 1.0) / PI * one_minus_c2.powi(n as i32 - 2);
    let c = C64::new(1.0, 0.0) - w;
    let tail_dir = uniform_sphere(n - 1, rng);
    let scale = one_minus_c2.sqrt();
    let tail: Vec<C64> = tail_dir.into_iter().map(|t| t * scale).collect();
    let zeta = frame.compose(c, &tail);
    Some(SliceDraw { zeta, weight: area * density })
}
