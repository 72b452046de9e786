//! Deterministic quadrature for radial measures of Bergman balls.
//!
//! For a radial density `w(1 − |z|²)` against `dv`, the mass of `D(a, r)`
//! depends on `|a|` alone. Pulling back by `φ_a` gives
//!
//! `μ(D(a,r)) = ∫_{|x| < tanh r} w(1 − |φ_a(x)|²) J_a(x) dv(x)`,
//! `J_a(x) = ((1−|a|²)/|1 − ⟨x,a⟩|²)^{n+1}`,
//!
//! and with `c = ⟨x, a/|a|⟩` and `u = |x|² − |c|²` every factor is a
//! function of `(c, u)`. The volume element becomes
//! `(n(n−1)/π) u^{n−2} du d²c` for `n ≥ 2` and `d²c/π` for `n = 1`.

use gauss_quad::GaussLegendre;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

fn gl_rule(deg: usize) -> &'static [(f64, f64)] {
    static RULES: OnceLock<Vec<Vec<(f64, f64)>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        (0..=64).map(|d| if d < 2 { Vec::new() } else { GaussLegendre::new(d).expect("degree ≥ 2").into_node_weight_pairs() }).collect()
    });
    &rules[deg]
}

/// Gauss–Legendre nodes and weights mapped to `[a, b]`.
pub(crate) fn gauss_legendre(a: f64, b: f64, deg: usize) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gl_rule(deg).iter().map(|&(x, w)| (mid + half * x, half * w)).collect()
}

const MODULUS_NODES: usize = 16;
const ANGLE_NODES: usize = 32;
const TRANSVERSE_NODES: usize = 8;

/// `∫_{D(a,r)} w(1−|z|²) dv(z)` with `y_a = 1 − |a|²`.
pub(crate) fn bergman_ball_mass(n: usize, y_a: f64, r: f64, w: &dyn Fn(f64) -> f64) -> f64 {
    let big_r = r.tanh();
    let abs_a = (1.0 - y_a).max(0.0).sqrt();
    let point = |cr: f64, ci: f64, u: f64| -> f64 {
        // 1 − ⟨x,a⟩ = 1 − |a|c
        let den = (1.0 - abs_a * cr).powi(2) + (abs_a * ci).powi(2);
        let x2 = cr * cr + ci * ci + u;
        let y = y_a * (1.0 - x2) / den;
        let jac = (y_a / den).powi(n as i32 + 1);
        w(y) * jac
    };
    let mut total = 0.0;
    for &(m, wm) in &gauss_legendre(0.0, big_r, MODULUS_NODES) {
        let mut ring = 0.0;
        for k in 0..ANGLE_NODES {
            let psi = 2.0 * PI * k as f64 / ANGLE_NODES as f64;
            let (cr, ci) = (m * psi.cos(), m * psi.sin());
            if n == 1 {
                ring += point(cr, ci, 0.0);
            } else {
                let u_max = big_r * big_r - m * m;
                let mut inner = 0.0;
                for &(u, wu) in &gauss_legendre(0.0, u_max, TRANSVERSE_NODES) {
                    inner += wu * u.powi(n as i32 - 2) * point(cr, ci, u);
                }
                ring += inner;
            }
        }
        total += wm * m * ring * (2.0 * PI / ANGLE_NODES as f64);
    }
    let pre = if n == 1 { 1.0 / PI } else { (n * (n - 1)) as f64 / PI };
    total * pre
}

/// Tabulated `y_a ↦ μ(D(a, r))` on a uniform grid in `ln y_a`.
pub(crate) struct RadialTable {
    log_lo: f64,
    step: f64,
    values: Vec<f64>,
}

pub(crate) const TABLE_LOG_LO: f64 = -60.0 * std::f64::consts::LN_2;
const TABLE_STEP: f64 = 0.05;

impl RadialTable {
    pub fn build(n: usize, r: f64, w: &(dyn Fn(f64) -> f64 + Sync)) -> RadialTable {
        let count = (-TABLE_LOG_LO / TABLE_STEP).ceil() as usize + 1;
        let step = -TABLE_LOG_LO / (count - 1) as f64;
        let values = (0..count)
            .into_par_iter()
            .map(|i| {
                let ly = TABLE_LOG_LO + step * i as f64;
                let y = if i + 1 == count { 1.0 } else { ly.exp() };
                bergman_ball_mass(n, y, r, w)
            })
            .collect();
        RadialTable { log_lo: TABLE_LOG_LO, step, values }
    }

    /// Interpolated mass, or `None` below the tabulated range.
    pub fn lookup(&self, y: f64) -> Option<f64> {
        let ly = y.ln();
        if ly.is_nan() || ly < self.log_lo {
            return None;
        }
        let pos = ((ly - self.log_lo) / self.step).min((self.values.len() - 1) as f64);
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let f = pos - i as f64;
        let (a, b) = (self.values[i], self.values[i + 1]);
        Some(if a > 0.0 && b > 0.0 { (a.ln() * (1.0 - f) + b.ln() * f).exp() } else { a * (1.0 - f) + b * f })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let s: f64 = gauss_legendre(0.0, 2.0, 8).iter().map(|(x, w)| w * x.powi(7)).sum();
        assert!((s - 2f64.powi(8) / 8.0).abs() < 1e-11);
    }

    #[test]
    fn centred_ball_volume() {
        // v(D(0, r)) = tanh(r)^{2n}
        for n in 1..=3 {
            let m = bergman_ball_mass(n, 1.0, 0.5, &|_| 1.0);
            assert!((m - 0.5f64.tanh().powi(2 * n as i32)).abs() < 1e-12, "n={n}: {m}");
        }
    }

    #[test]
    fn volume_is_invariant_under_jacobian_weight() {
        // ∫_{D(a,r)} (1−|z|²)^{−(n+1)} dv is Möbius invariant: equals the
        // value at a = 0, ∫_{|x|<R} (1−|x|²)^{−(n+1)} dv.
        for n in 1..=2 {
            let w = |y: f64| y.powi(-(n as i32 + 1));
            let at0 = bergman_ball_mass(n, 1.0, 0.7, &w);
            for y_a in [0.5, 1e-3, 1e-9] {
                let m = bergman_ball_mass(n, y_a, 0.7, &w);
                assert!((m / at0 - 1.0).abs() < 1e-9, "n={n} y_a={y_a}: {m} vs {at0}");
            }
        }
    }

    #[test]
    fn off_centre_volume_matches_monte_carlo() {
        use crate::geometry::bergman_raw;
        use crate::rng::{stream, tag};
        use crate::C64;
        use rand::Rng;
        let (n, r) = (2usize, 0.5);
        let a = [C64::new(0.8, 0.0), C64::new(0.0, 0.0)];
        let q = bergman_ball_mass(n, 1.0 - 0.64, r, &|_| 1.0);
        // Hit-or-miss in the enclosing box of the ellipsoid.
        let mut rng = stream(1, tag::EXPERIMENT, 0);
        let m = 400_000;
        let (lo, hi) = (0.45f64, 1.0f64);
        let side = 0.55f64;
        let mut hits = 0;
        for _ in 0..m {
            let z = [
                C64::new(rng.gen_range(lo..hi), rng.gen_range(-side..side)),
                C64::new(rng.gen_range(-side..side), rng.gen_range(-side..side)),
            ];
            if z.iter().map(|c| c.norm_sqr()).sum::<f64>() < 1.0 && bergman_raw(&z, &a) < r {
                hits += 1;
            }
        }
        let box_vol = (hi - lo) * (2.0 * side).powi(3);
        // normalized volume of ℂ² is Lebesgue/(π²/2)
        let mc = hits as f64 / m as f64 * box_vol / (PI * PI / 2.0);
        let se = mc / (hits as f64).sqrt();
        assert!((q - mc).abs() < 4.0 * se, "{q} vs {mc}");
    }

    #[test]
    fn table_interpolates() {
        let t = RadialTable::build(1, 0.5, &|y: f64| y);
        let direct = bergman_ball_mass(1, 0.013, 0.5, &|y: f64| y);
        let looked = t.lookup(0.013).unwrap();
        assert!((looked / direct - 1.0).abs() < 1e-3);
        assert!(t.lookup(1e-30).is_none());
    }
}
