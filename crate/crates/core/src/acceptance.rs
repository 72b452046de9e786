//! The acceptance suite: one runner per criterion, each returning an
//! [`Outcome`] with the measured statistic and its pinned threshold.
//!
//! Runners never panic on numerical trouble; a library error becomes a
//! failing outcome carrying the error text.

use crate::criteria::{
    discretization_check, g_functional, inclusion_region, monomial_inclusion, refinement_decision, superposition_degree,
    vanishing_carleson, Decision, FunctionalOptions,
};
use crate::error::Result;
use crate::functions::{khinchine_ratio, monomial_power, superpose, HoloFunction};
use crate::geometry::{bergman_metric, involution, BallPoint, SpherePoint};
use crate::lattice::build_lattice;
use crate::measures::{Atom, MeasureSpec};
use crate::norms::{area_operator_lt_norm, bergman_norm, forelli_rudin_check, tent_norm, tent_norm_traced, TentOptions, TentParams};
use crate::rng::{child_seed, stream, tag};
use crate::C64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Absolute tolerance for Möbius invariance and the triangle inequality.
pub const MOBIUS_TOL: f64 = 1e-9;
/// Tolerance for `β(z, z) = 0` and symmetry.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Largest admissible max/min spread of a family of ratios.
pub const SPREAD_LIMIT: f64 = 10.0;
/// Smallest admissible total growth of a diverging family.
pub const GROWTH_LIMIT: f64 = 10.0;
/// Combined standard errors allowed between two routes to one norm.
pub const SE_LIMIT: f64 = 3.0;
/// Per-step decrease of the vanishing Carleson constants.
pub const VANISHING_STEP: f64 = 2.0;

/// Lattice configurations `(n, δ, R_max)` of criterion 2.
pub const LATTICE_CONFIGS: [(usize, f64, f64); 4] = [(1, 0.2, 4.0), (1, 0.5, 4.0), (2, 0.2, 4.0), (2, 0.5, 4.0)];

/// Result of one criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    /// The statistic compared against the threshold.
    pub measured: f64,
    pub threshold: String,
    pub detail: String,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} [{:>2}] {}: measured {:.6e}, required {}; {}", self.id, self.title, self.measured, self.threshold, self.detail)
    }
}

fn outcome(id: u32, title: &str, passed: bool, measured: f64, threshold: impl Into<String>, detail: impl Into<String>) -> Outcome {
    Outcome { id, title: title.into(), passed, measured, threshold: threshold.into(), detail: detail.into() }
}

/// Titles of the criteria, indexed by id − 1.
pub const TITLES: [&str; 11] = [
    "Möbius invariance and metric axioms",
    "lattice covering, separation and overlap",
    "Khinchine ratios",
    "area operator against tent norm",
    "tent norm against Bergman norm",
    "Forelli–Rudin estimate",
    "test functions inside and outside the inclusion region",
    "Case 1 necessity lower bound",
    "superposition degree against monomial inclusions",
    "boundary kernel and its square",
    "discretization and vanishing Carleson trends",
];

/// Runs criterion `id` (1 to 11) under `seed`.
pub fn run(id: u32, seed: u64) -> Outcome {
    let title = TITLES.get((id as usize).wrapping_sub(1)).copied().unwrap_or("unknown criterion");
    let seed = child_seed(seed, tag::EXPERIMENT, id as u64);
    let result = match id {
        1 => geometry(seed),
        2 => lattices(seed),
        3 => khinchine(seed),
        4 => norm_consistency(seed),
        5 => bergman_equivalence(seed),
        6 => forelli_rudin(seed),
        7 => test_functions(seed),
        8 => necessity(seed),
        9 => predicates(seed),
        10 => boundary_kernel(seed),
        11 => discretization(seed),
        _ => return outcome(id, title, false, f64::NAN, "an id in 1..=11", "no such criterion"),
    };
    result.unwrap_or_else(|e| outcome(id, title, false, f64::NAN, "no library error", e.to_string()))
}

/// Runs every criterion in order.
pub fn run_suite(seed: u64) -> Vec<Outcome> {
    (1..=TITLES.len() as u32).map(|id| run(id, seed)).collect()
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn fmt_list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn random_point<R: Rng>(n: usize, max_norm: f64, rng: &mut R) -> BallPoint {
    loop {
        let coords: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let norm = coords.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 && norm < 1.0 {
            let scale = max_norm * rng.gen::<f64>();
            return BallPoint::new(coords.into_iter().map(|c| c * (scale / norm)).collect()).expect("inside the ball");
        }
    }
}

fn geometry(seed: u64) -> Result<Outcome> {
    let mut rng = stream(seed, tag::EXPERIMENT, 0);
    let mut invariance: f64 = 0.0;
    let mut axioms: f64 = 0.0;
    let mut failures = 0;
    for i in 0..1000 {
        let n = 1 + i % 3;
        let [a, z, w] = [0; 3].map(|_| random_point(n, 0.95, &mut rng));
        let d = bergman_metric(&z, &w)?;
        let moved = bergman_metric(&involution(&a, &z)?, &involution(&a, &w)?)?;
        invariance = invariance.max((moved - d).abs());
        let back = bergman_metric(&w, &z)?;
        let to_a = bergman_metric(&z, &a)? + bergman_metric(&a, &w)?;
        axioms = axioms.max((back - d).abs()).max(bergman_metric(&z, &z)?);
        if d < 0.0 || (d == 0.0 && z != w) || d > to_a + MOBIUS_TOL {
            failures += 1;
        }
    }
    let passed = invariance < MOBIUS_TOL && axioms < IDENTITY_TOL && failures == 0;
    Ok(outcome(
        1,
        TITLES[0],
        passed,
        invariance,
        format!("< {MOBIUS_TOL:e}"),
        format!("1000 triples, n ≤ 3; symmetry/identity defect {axioms:.2e}; positivity or triangle failures {failures}"),
    ))
}

fn lattices(seed: u64) -> Result<Outcome> {
    let mut lines = Vec::new();
    let mut failed = 0;
    let mut worst_overlap: f64 = 0.0;
    for (i, &(n, delta, r_max)) in LATTICE_CONFIGS.iter().enumerate() {
        match build_lattice(n, delta, r_max, child_seed(seed, tag::LATTICE_MESH, i as u64)) {
            Ok(lattice) => {
                let rep = lattice.report().expect("built lattices carry a report");
                if !rep.ok() {
                    failed += 1;
                }
                worst_overlap = worst_overlap.max(rep.max_overlap as f64);
                lines.push(format!(
                    "(n={n}, δ={delta}, R={r_max}): {} points, covering {} on {} samples, min separation {:.4} ≥ {:.2}, 4δ-overlap {} ≤ {}",
                    lattice.len(),
                    if rep.covering_ok { "ok" } else { "broken" },
                    rep.covering_samples,
                    rep.min_separation,
                    0.5 * delta,
                    rep.max_overlap,
                    lattice.overlap_bound()
                ));
            }
            Err(e) => {
                failed += 1;
                lines.push(format!("(n={n}, δ={delta}, R={r_max}): {e}"));
            }
        }
    }
    Ok(outcome(2, TITLES[1], failed == 0, failed as f64, "0 failing configurations", lines.join("; ")))
}

fn khinchine(seed: u64) -> Result<Outcome> {
    let mut rng = stream(seed, tag::EXPERIMENT, 0);
    let mut defect: f64 = 0.0;
    for k in 1..=12u32 {
        let c: Vec<C64> = (0..k).map(|_| C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))).collect();
        defect = defect.max((khinchine_ratio(&c, 2.0, 12)? - 1.0).abs());
    }
    let one = C64::new(1.0, 0.0);
    let four = khinchine_ratio(&[one, one], 4.0, 2)?;
    let passed = defect == 0.0 && four == 2.0;
    Ok(outcome(3, TITLES[2], passed, defect, "= 0 exactly", format!("p = 2 over K = 1..12; p = 4 with c = (1, 1) gives {four}")))
}

fn polynomial(n: usize, terms: &[(&[u32], f64, f64)]) -> HoloFunction {
    debug_assert!(terms.iter().all(|t| t.0.len() == n));
    HoloFunction::Polynomial { terms: terms.iter().map(|&(m, re, im)| (m.to_vec(), [re, im])).collect() }
}

fn norm_consistency(seed: u64) -> Result<Outcome> {
    let atoms = vec![
        Atom { point: BallPoint::real(&[0.6])?, mass: 0.3 },
        Atom { point: BallPoint::new(vec![C64::from_polar(0.85, 2.0)])?, mass: 0.05 },
        Atom { point: BallPoint::new(vec![C64::from_polar(0.95, -1.0)])?, mass: 0.01 },
    ];
    let pairs: Vec<(&str, HoloFunction, MeasureSpec, f64, f64)> = vec![
        ("polynomial, v_1", polynomial(1, &[(&[0], 1.0, 0.0), (&[2], 0.5, -1.0)]), MeasureSpec::weighted_volume(1.0), 2.0, 2.0),
        (
            "f_a with |a| = 0.5, v_0",
            HoloFunction::kernel_fa(BallPoint::real(&[0.5])?, 1.0, 2.0, 2.0, 0.0),
            MeasureSpec::weighted_volume(0.0),
            1.5,
            2.0,
        ),
        ("polynomial, three atoms", polynomial(1, &[(&[1], 1.0, 0.0), (&[3], 0.0, 2.0)]), MeasureSpec::PointMasses { atoms }, 2.0, 1.0),
        ("g_ζ with θ = 0.3, v_1.5", HoloFunction::boundary_kernel(SpherePoint::e1(1)?, 0.3), MeasureSpec::weighted_volume(1.5), 1.0, 1.0),
        (
            "polynomial in n = 2, v_2",
            polynomial(2, &[(&[0, 0], 1.0, 0.0), (&[1, 1], 2.0, 0.0)]),
            MeasureSpec::weighted_volume(2.0),
            2.0,
            2.0,
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for (i, (name, f, mu, t, s)) in pairs.iter().enumerate() {
        let i = i as u64;
        let a = area_operator_lt_norm(f, mu, *s, *t, 2.0, 256, 256_000, child_seed(seed, tag::OUTER, i))?;
        let b = tent_norm(f, mu, *t, *s, 2.0, 256_000, child_seed(seed, tag::INNER, i))?;
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        let z = (a.value - b.value).abs() / se;
        worst = worst.max(z);
        lines.push(format!("{name}: {:.5} ± {:.1e} vs {:.5} ± {:.1e}", a.value, a.std_error, b.value, b.std_error));
    }
    Ok(outcome(4, TITLES[3], worst <= SE_LIMIT, worst, format!("≤ {SE_LIMIT} combined std errors"), lines.join("; ")))
}

fn bergman_equivalence(seed: u64) -> Result<Outcome> {
    let mut rng = stream(seed, tag::EXPERIMENT, 0);
    let (n, p, alpha) = (1usize, 2.0, 0.0);
    let mut ratios = Vec::with_capacity(20);
    for i in 0..20u64 {
        let degree = rng.gen_range(0..=12u32);
        let terms: Vec<(Vec<u32>, [f64; 2])> =
            (0..=degree).map(|m| (vec![m], [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])).collect();
        let f = HoloFunction::Polynomial { terms };
        let tent = tent_norm(&f, &MeasureSpec::weighted_volume(n as f64 + alpha), p, p, 2.0, 100_000, child_seed(seed, tag::OUTER, i))?;
        let bergman = bergman_norm(&f, p, n as f64 + alpha, n, 100_000, child_seed(seed, tag::INNER, i))?;
        ratios.push(tent.value / bergman.value);
    }
    let sp = spread(&ratios);
    Ok(outcome(
        5,
        TITLES[4],
        sp <= SPREAD_LIMIT,
        sp,
        format!("max/min ≤ {SPREAD_LIMIT}"),
        format!("20 random polynomials, ratios {}", fmt_list(&ratios)),
    ))
}

fn forelli_rudin(seed: u64) -> Result<Outcome> {
    let radii = [0.0, 0.5, 0.8, 0.9, 0.95];
    let us: Vec<BallPoint> = radii.iter().map(|&r| BallPoint::new(vec![C64::from_polar(r, 0.3)])).collect::<Result<_>>()?;
    let zs: Vec<BallPoint> = radii.iter().map(|&r| BallPoint::new(vec![C64::from_polar(r, 0.3 + 0.2 * r)])).collect::<Result<_>>()?;
    let mut ratios = Vec::with_capacity(25);
    for (i, u) in us.iter().enumerate() {
        for (j, z) in zs.iter().enumerate() {
            let rep = forelli_rudin_check(u, z, 0.0, 1.6, 1.6, 100_000, child_seed(seed, i as u64, j as u64))?;
            ratios.push(rep.ratio);
        }
    }
    let sp = spread(&ratios);
    Ok(outcome(
        6,
        TITLES[5],
        sp <= SPREAD_LIMIT,
        sp,
        format!("max/min ≤ {SPREAD_LIMIT}"),
        format!("5×5 grid, ratios {}", fmt_list(&ratios)),
    ))
}

/// Test-function exponent gap `(n+1+β)/s + n/t − (n+1+α)/q − n/p`.
fn fa_gap(p: f64, q: f64, alpha: f64, t: f64, s: f64, beta: f64, n: usize) -> f64 {
    let n = n as f64;
    (n + 1.0 + beta) / s + n / t - (n + 1.0 + alpha) / q - n / p
}

/// A target `(t, s, β)`.
pub type Target = (f64, f64, f64);

/// Target points `(t, s, β)` for criterion 7, chosen by the inclusion
/// predicate: an inside point with a gap in `[0, 0.3]` other than the source
/// itself, and an outside point whose gap is at most −0.6.
pub fn witness_targets(p: f64, q: f64, alpha: f64, n: usize) -> Result<(Target, Target)> {
    let grid = [0.5, 1.0, 1.5, 2.0, 3.0, 4.0];
    let betas = [-0.5, 0.0, 0.5, 1.0];
    let mut inside = None;
    let mut outside = None;
    for &t in &grid {
        for &s in &grid {
            for &beta in &betas {
                let gap = fa_gap(p, q, alpha, t, s, beta, n);
                let member = inclusion_region(p, q, alpha, t, s, beta, n)?;
                if member && inside.is_none() && (0.0..=0.3).contains(&gap) && (t, s, beta) != (p, q, alpha) {
                    inside = Some((t, s, beta));
                }
                if !member && outside.is_none() && gap <= -0.6 {
                    outside = Some((t, s, beta));
                }
            }
        }
    }
    match (inside, outside) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => crate::error::contract("no admissible inside/outside target on the search grid"),
    }
}

fn test_functions(seed: u64) -> Result<Outcome> {
    let (p, q, alpha, n, theta) = (2.0, 2.0, 0.0, 1usize, 2.0);
    let (inside, outside) = witness_targets(p, q, alpha, n)?;
    let moduli = [0.9, 0.99, 0.999];
    let norm = |a: f64, t: f64, s: f64, beta: f64, salt: u64| -> Result<f64> {
        let f = HoloFunction::kernel_fa(BallPoint::real(&[a])?, theta, p, q, alpha);
        Ok(tent_norm(&f, &MeasureSpec::weighted_volume(n as f64 + beta), t, s, 2.0, 200_000, child_seed(seed, salt, (a * 1e3) as u64))?
            .value)
    };
    let mut source = Vec::new();
    let mut ins = Vec::new();
    let mut outs = Vec::new();
    for &a in &moduli {
        let src = norm(a, p, q, alpha, 0)?;
        source.push(src);
        ins.push(norm(a, inside.0, inside.1, inside.2, 1)? / src);
        outs.push(norm(a, outside.0, outside.1, outside.2, 2)? / src);
    }
    let inside_spread = spread(&ins);
    let source_spread = spread(&source);
    let monotone = outs.windows(2).all(|w| w[1] > w[0]);
    let growth = outs[outs.len() - 1] / outs[0];
    let passed = inside_spread <= SPREAD_LIMIT && source_spread <= SPREAD_LIMIT && monotone && growth >= GROWTH_LIMIT;
    Ok(outcome(
        7,
        TITLES[6],
        passed,
        growth,
        format!("outside growth ≥ {GROWTH_LIMIT}, monotone; inside and source spreads ≤ {SPREAD_LIMIT}"),
        format!(
            "inside (t,s,β) = {inside:?}: ratios {} (spread {inside_spread:.3}); outside {outside:?}: ratios {}; source norms {} (spread {source_spread:.3})",
            fmt_list(&ins),
            fmt_list(&outs),
            fmt_list(&source)
        ),
    ))
}

fn necessity(seed: u64) -> Result<Outcome> {
    let (p, q, s, t, alpha, n) = (1.0, 2.0, 2.0, 2.0, 0.0, 1usize);
    // Masses y^{β+2n+1} on a δ-lattice behave like v_{β+n}; β = 1 makes G_μ flat.
    let params = TentParams::new(p, q, s, t, alpha, 1.0, n)?;
    let weight = params.b() + n as f64;
    let lattice = build_lattice(n, 0.5, 4.0, child_seed(seed, tag::LATTICE_MESH, 0))?;
    let mu = MeasureSpec::LatticeMasses { lattice, exponent: weight, coefficient: 1.0 };
    let mut cs = Vec::new();
    let mut gs = Vec::new();
    for (i, &a) in [0.5, 0.9, 0.99].iter().enumerate() {
        let point = BallPoint::real(&[a])?;
        let g = g_functional(&mu, &point, &params)?;
        let f = HoloFunction::kernel_fa(point, 1.0, p, q, alpha);
        let lhs = tent_norm(&f, &mu, t, s, 2.0, 400_000, child_seed(seed, tag::OUTER, i as u64))?;
        gs.push(g);
        cs.push(lhs.value / g.powf(1.0 / s));
    }
    let sp = spread(&cs);
    Ok(outcome(
        8,
        TITLES[7],
        sp <= SPREAD_LIMIT,
        sp,
        format!("max/min ≤ {SPREAD_LIMIT}"),
        format!("lattice masses y^{weight}, |a| ∈ {{0.5, 0.9, 0.99}}: G_μ(a) {}, fitted c {}", fmt_list(&gs), fmt_list(&cs)),
    ))
}

fn predicates(seed: u64) -> Result<Outcome> {
    let mut rng = stream(seed, tag::EXPERIMENT, 0);
    let mut mismatches = 0;
    let mut first = String::new();
    for _ in 0..500 {
        let mut exponent = || if rng.gen_bool(0.5) { rng.gen_range(1..=16) as f64 / 4.0 } else { rng.gen_range(0.1..6.0) };
        let (p, q, t, s) = (exponent(), exponent(), exponent(), exponent());
        let n = rng.gen_range(1..=3usize);
        let alpha = rng.gen_range(-1.5..3.0);
        let beta = rng.gen_range(-1.5..3.0);
        let d = superposition_degree(p, q, alpha, t, s, beta, n)?;
        for degree in 1..=6u64 {
            if (degree <= d.max_degree) != monomial_inclusion(p, q, alpha, t, s, beta, n, degree)? {
                mismatches += 1;
                if first.is_empty() {
                    first = format!("; first at (p,q,α,t,s,β,n,N) = ({p},{q},{alpha},{t},{s},{beta},{n},{degree})");
                }
            }
        }
    }
    Ok(outcome(9, TITLES[8], mismatches == 0, mismatches as f64, "0 mismatches", format!("500 tuples × N = 1..6{first}")))
}

fn boundary_kernel(seed: u64) -> Result<Outcome> {
    let g = HoloFunction::boundary_kernel(SpherePoint::e1(1)?, 1.4);
    let square = superpose(&monomial_power(2), g.clone());
    let mu = MeasureSpec::weighted_volume(1.0);
    let opts = TentOptions::new(400_000, seed).with_shells(18);
    let levels = [10, 14, 18];
    let read = |f: &HoloFunction| -> Result<Vec<f64>> {
        let trace = tent_norm_traced(f, &mu, 2.0, 2.0, &opts)?;
        Ok(levels.iter().map(|&k| trace.at_level(k).map_or(f64::NAN, |v| v.0)).collect())
    };
    let gs = read(&g)?;
    let sq = read(&square)?;
    let converges = refinement_decision(&gs) == Decision::Finite;
    let monotone = sq.windows(2).all(|w| w[1] > w[0]);
    let growth = sq[2] / sq[0];
    let passed = converges && monotone && growth >= GROWTH_LIMIT;
    Ok(outcome(
        10,
        TITLES[9],
        passed,
        growth,
        format!("g finite under refinement; square monotone with growth ≥ {GROWTH_LIMIT}"),
        format!("truncations 1 − 2^-k, k = 10, 14, 18: g {}, g² {}", fmt_list(&gs), fmt_list(&sq)),
    ))
}

fn discretization(seed: u64) -> Result<Outcome> {
    let params = TentParams::new(2.0, 2.0, 1.0, 2.0, 0.0, 0.0, 1)?.with_r(0.9)?;
    let lattice = build_lattice(1, 0.45, 2.5, child_seed(seed, tag::LATTICE_MESH, 0))?;
    // ν_μ vanishes beyond Bergman radius R_max + r, so boxes below δ = 2^{-9} carry no mass.
    let opts = FunctionalOptions { sphere_points: 8, delta_levels: 10, ..FunctionalOptions::new(2000, seed) };
    let mut rng = stream(seed, tag::EXPERIMENT, 0);
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for _ in 0..10 {
        let gamma = rng.gen_range(2.5..3.5);
        let atoms: Vec<Atom> = lattice
            .points()
            .iter()
            .map(|a| Atom { point: a.clone(), mass: rng.gen_range(0.25f64.ln()..4f64.ln()).exp() * a.defect().powf(gamma) })
            .collect();
        let rep = discretization_check(&MeasureSpec::PointMasses { atoms }, &lattice, &params, &opts)?;
        let c = rep.carleson.expect("q > s gives the Carleson comparison");
        lower.push(c.lower_ratio);
        upper.push(c.upper_ratio);
    }
    let rhos = [0.9, 0.99, 0.999];
    let vanishing = vanishing_carleson(&MeasureSpec::weighted_volume(0.0), 1, &rhos, &FunctionalOptions::new(20_000, seed))?;
    let steps: Vec<f64> = vanishing.constants.windows(2).map(|w| if w[1] > 0.0 { w[0] / w[1] } else { f64::INFINITY }).collect();
    let worst_step = steps.iter().cloned().fold(f64::INFINITY, f64::min);
    let worst_spread = spread(&lower).max(spread(&upper));
    let passed = worst_spread <= SPREAD_LIMIT && worst_step >= VANISHING_STEP;
    Ok(outcome(
        11,
        TITLES[10],
        passed,
        worst_spread,
        format!("ratio spreads ≤ {SPREAD_LIMIT}; Carleson decrease ≥ {VANISHING_STEP}× per step"),
        format!(
            "10 weight profiles: lower ratios {}, upper ratios {}; v_0 truncated constants at ϱ = 0.9, 0.99, 0.999: {} (worst step {worst_step:.2}×)",
            fmt_list(&lower),
            fmt_list(&upper),
            fmt_list(&vanishing.constants)
        ),
    ))
}
