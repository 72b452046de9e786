//! Spatial index over finite point sets of the ball, used for atomic
//! measures and lattices. Bergman balls are queried through an enclosing
//! Euclidean ball followed by an exact metric check.

use crate::geometry::{apply_matrix, bergman_ball_enclosure, bergman_raw, dot, norm_sqr, random_unitary};
use crate::C64;
use kiddo::{KdTree, SquaredEuclidean};
use std::collections::HashMap;

enum Backend {
    Linear,
    Tree2(KdTree<f64, 2>, Vec<Vec<C64>>),
    Tree4(KdTree<f64, 4>, Vec<Vec<C64>>),
}

pub(crate) struct PointIndex {
    points: Vec<Vec<C64>>,
    backend: Backend,
}

/// Points are stored after a fixed generic rotation so that inputs lying on
/// coordinate planes do not produce runs of equal split values in the tree.
const ROTATION_SEED: u64 = 0x7e47_1ab5;

fn has_heavy_duplicates(points: &[Vec<C64>]) -> bool {
    let mut counts: HashMap<Vec<u64>, usize> = HashMap::new();
    for p in points {
        let key: Vec<u64> = p.iter().flat_map(|c| [c.re.to_bits(), c.im.to_bits()]).collect();
        let e = counts.entry(key).or_default();
        *e += 1;
        if *e > 8 {
            return true;
        }
    }
    false
}

impl PointIndex {
    pub fn new(points: Vec<Vec<C64>>) -> PointIndex {
        let n = points.first().map_or(0, |p| p.len());
        if points.len() < 64 || !(1..=2).contains(&n) || has_heavy_duplicates(&points) {
            return PointIndex { points, backend: Backend::Linear };
        }
        let u = random_unitary(n, ROTATION_SEED);
        let rotated: Vec<Vec<C64>> = points.iter().map(|p| apply_matrix(&u, p)).collect();
        let backend = if n == 1 {
            let mut tree: KdTree<f64, 2> = KdTree::with_capacity(points.len());
            for (i, p) in rotated.iter().enumerate() {
                tree.add(&[p[0].re, p[0].im], i as u64);
            }
            Backend::Tree2(tree, u)
        } else {
            let mut tree: KdTree<f64, 4> = KdTree::with_capacity(points.len());
            for (i, p) in rotated.iter().enumerate() {
                tree.add(&[p[0].re, p[0].im, p[1].re, p[1].im], i as u64);
            }
            Backend::Tree4(tree, u)
        };
        PointIndex { points, backend }
    }

    /// An empty index that grows with [`PointIndex::push`].
    pub fn growable(n: usize) -> PointIndex {
        let backend = match n {
            1 => Backend::Tree2(KdTree::new(), random_unitary(1, ROTATION_SEED)),
            2 => Backend::Tree4(KdTree::new(), random_unitary(2, ROTATION_SEED)),
            _ => Backend::Linear,
        };
        PointIndex { points: Vec::new(), backend }
    }

    pub fn push(&mut self, p: Vec<C64>) {
        let i = self.points.len() as u64;
        match &mut self.backend {
            Backend::Linear => {}
            Backend::Tree2(tree, u) => {
                let q = apply_matrix(u, &p);
                tree.add(&[q[0].re, q[0].im], i);
            }
            Backend::Tree4(tree, u) => {
                let q = apply_matrix(u, &p);
                tree.add(&[q[0].re, q[0].im, q[1].re, q[1].im], i);
            }
        }
        self.points.push(p);
    }

    pub fn points(&self) -> &[Vec<C64>] {
        &self.points
    }

    /// Indices with Euclidean distance `< radius` from `center`, in
    /// increasing order.
    pub fn within_euclid(&self, center: &[C64], radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        // The tree holds rotated copies; widen its query for the rounding
        // and filter on the original coordinates.
        let q2 = r2 * (1.0 + 1e-10) + 1e-300;
        let mut out: Vec<usize> = match &self.backend {
            Backend::Linear => (0..self.points.len()).filter(|&i| dist2(&self.points[i], center) < r2).collect(),
            Backend::Tree2(tree, u) => {
                let c = apply_matrix(u, center);
                tree.within_unsorted::<SquaredEuclidean>(&[c[0].re, c[0].im], q2)
                    .into_iter()
                    .map(|nn| nn.item as usize)
                    .filter(|&i| dist2(&self.points[i], center) < r2)
                    .collect()
            }
            Backend::Tree4(tree, u) => {
                let c = apply_matrix(u, center);
                tree.within_unsorted::<SquaredEuclidean>(&[c[0].re, c[0].im, c[1].re, c[1].im], q2)
                    .into_iter()
                    .map(|nn| nn.item as usize)
                    .filter(|&i| dist2(&self.points[i], center) < r2)
                    .collect()
            }
        };
        out.sort_unstable();
        out
    }

    /// Indices `k` with `β(center, a_k) < r`, in increasing order.
    pub fn within_bergman(&self, center: &[C64], r: f64) -> Vec<usize> {
        let (c, radius) = bergman_ball_enclosure(center, r);
        self.within_euclid(&c, radius).into_iter().filter(|&k| bergman_raw(center, &self.points[k]) < r).collect()
    }
}

/// Finds the points of a finite set lying in a Korányi region `Γ_γ(ξ)`.
///
/// `z ∈ Γ_γ(ξ)` forces `|ξ − z|² < (γ−1)(1−|z|²)`, so points are grouped
/// by dyadic depth and each group is searched with the Euclidean radius of
/// its shallowest member.
pub(crate) struct ConeIndex {
    gamma: f64,
    points: Vec<Vec<C64>>,
    levels: Vec<(f64, PointIndex, Vec<usize>)>,
}

impl ConeIndex {
    pub fn new(points: Vec<Vec<C64>>, gamma: f64) -> ConeIndex {
        let mut groups: std::collections::BTreeMap<i32, Vec<usize>> = Default::default();
        for (k, p) in points.iter().enumerate() {
            let y = 1.0 - norm_sqr(p);
            groups.entry((-y.log2()).floor() as i32).or_default().push(k);
        }
        let levels = groups
            .into_iter()
            .map(|(level, ids)| {
                let y_max = 2f64.powi(-level).min(1.0);
                let idx = PointIndex::new(ids.iter().map(|&k| points[k].clone()).collect());
                (((gamma - 1.0) * y_max).sqrt() * (1.0 + 1e-9), idx, ids)
            })
            .collect();
        ConeIndex { gamma, points, levels }
    }

    /// Indices `k` with `a_k ∈ Γ_γ(ξ)`, in increasing order.
    pub fn members(&self, xi: &[C64]) -> Vec<usize> {
        let one = C64::new(1.0, 0.0);
        let mut out: Vec<usize> = Vec::new();
        for (radius, idx, ids) in &self.levels {
            for j in idx.within_euclid(xi, *radius) {
                let k = ids[j];
                let a = &self.points[k];
                if (one - dot(a, xi)).norm() < 0.5 * self.gamma * (1.0 - norm_sqr(a)) {
                    out.push(k);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn dist2(a: &[C64], b: &[C64]) -> f64 {
    norm_sqr(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, tag};
    use crate::sampling::uniform_sphere;
    use rand::Rng;

    fn cloud(n: usize, m: usize, seed: u64) -> Vec<Vec<C64>> {
        let mut rng = stream(seed, tag::EXPERIMENT, 0);
        (0..m)
            .map(|_| {
                let rho: f64 = rng.gen::<f64>().powf(0.25) * 0.999;
                uniform_sphere(n, &mut rng).into_iter().map(|c| c * rho).collect()
            })
            .collect()
    }

    #[test]
    fn tree_matches_linear_scan() {
        for n in 1..=2 {
            let pts = cloud(n, 3000, n as u64);
            let idx = PointIndex::new(pts.clone());
            assert!(!matches!(idx.backend, Backend::Linear));
            let queries = cloud(n, 50, 100 + n as u64);
            for q in &queries {
                for r in [0.1, 0.7, 2.5] {
                    let fast = idx.within_bergman(q, r);
                    let slow: Vec<usize> = (0..pts.len()).filter(|&k| bergman_raw(q, &pts[k]) < r).collect();
                    assert_eq!(fast, slow);
                }
            }
        }
    }

    #[test]
    fn axis_aligned_points_are_indexed() {
        let pts: Vec<Vec<C64>> = (0..500).map(|i| vec![C64::new(i as f64 / 501.0, 0.0)]).collect();
        let idx = PointIndex::new(pts);
        assert_eq!(idx.within_euclid(&[C64::new(0.5, 0.0)], 0.01).len(), 10);
    }

    #[test]
    fn duplicates_fall_back_to_scan() {
        let pts = vec![vec![C64::new(0.1, 0.2)]; 100];
        let idx = PointIndex::new(pts);
        assert_eq!(idx.within_bergman(&[C64::new(0.1, 0.2)], 0.1).len(), 100);
    }

    #[test]
    fn cone_index_matches_scan() {
        for n in 1..=2 {
            let pts = cloud(n, 2000, 7 + n as u64);
            let idx = ConeIndex::new(pts.clone(), 2.0);
            let mut rng = stream(9, tag::EXPERIMENT, n as u64);
            for _ in 0..200 {
                let xi = uniform_sphere(n, &mut rng);
                let slow: Vec<usize> = (0..pts.len())
                    .filter(|&k| {
                        let w = C64::new(1.0, 0.0) - dot(&pts[k], &xi);
                        w.norm() < 1.0 - norm_sqr(&pts[k])
                    })
                    .collect();
                assert_eq!(idx.members(&xi), slow);
            }
        }
    }
}
