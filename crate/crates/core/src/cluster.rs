//! k-means regions of competence.
//!
//! Squared distances multiply in `f32` and accumulate in `f64`; the compact
//! interpreter and the emitted C source use the same arithmetic, so cluster
//! assignment is bit-identical across all three.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::seed;

/// Squared L2 distance: `f32` differences and products, `f64` accumulation.
#[inline]
pub fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc += (d * d) as f64;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
    /// Convergence threshold on the largest centroid L2 shift.
    pub tol: f64,
    /// Independent k-means++ restarts; the lowest inertia wins.
    pub n_init: usize,
}

impl KMeansParams {
    pub fn new(k: usize) -> Self {
        KMeansParams {
            k,
            max_iter: 300,
            tol: 1e-4,
            n_init: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    centroids: Matrix,
    inertia: f64,
    iterations_run: usize,
    /// Inertia after each assignment step, then the final inertia.
    inertia_trace: Vec<f64>,
}

impl KMeansModel {
    pub fn from_centroids(centroids: Matrix) -> Result<Self> {
        if centroids.rows() == 0 || centroids.cols() == 0 {
            return Err(Error::Cluster(
                "model needs at least one non-empty centroid".into(),
            ));
        }
        Ok(KMeansModel {
            centroids,
            inertia: 0.0,
            iterations_run: 0,
            inertia_trace: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn n_features(&self) -> usize {
        self.centroids.cols()
    }

    pub fn centroids(&self) -> &Matrix {
        &self.centroids
    }

    pub fn centroid(&self, c: usize) -> &[f32] {
        self.centroids.row(c)
    }

    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    pub fn iterations_run(&self) -> usize {
        self.iterations_run
    }

    pub fn inertia_trace(&self) -> &[f64] {
        &self.inertia_trace
    }

    /// Nearest centroid and its squared distance; ties go to the smaller id.
    pub fn assign(&self, x: &[f32]) -> Result<(usize, f64)> {
        if x.len() != self.n_features() {
            return Err(Error::shape(self.n_features(), x.len()));
        }
        Ok(nearest(&self.centroids, x))
    }
}

#[inline]
fn nearest(centroids: &Matrix, x: &[f32]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.iter_rows().enumerate() {
        let d = sq_dist(x, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: first centre uniform, the rest drawn proportionally to
/// the squared distance to the nearest chosen centre.
fn init_plus_plus(points: &Matrix, k: usize, rng: &mut impl Rng) -> Matrix {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = points
        .iter_rows()
        .map(|p| sq_dist(p, centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, p) in points.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centroids.row(c)));
        }
    }
    centroids
}

fn lloyd(points: &Matrix, params: &KMeansParams, seed: u64) -> KMeansModel {
    let (n, dim, k) = (points.rows(), points.cols(), params.k);
    let mut rng = seed::rng(seed);
    let mut centroids = init_plus_plus(points, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0f64; n];
    let mut trace = Vec::new();
    let mut iterations_run = 0;

    for it in 1..=params.max_iter.max(1) {
        let mut inertia = 0.0;
        for (i, p) in points.iter_rows().enumerate() {
            let (c, d) = nearest(&centroids, p);
            labels[i] = c;
            dists[i] = d;
            inertia += d;
        }
        trace.push(inertia);

        let mut counts = vec![0usize; k];
        for &c in &labels {
            counts[c] += 1;
        }
        // empty clusters seize the point farthest from its own centroid
        let mut seized = vec![None; k];
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far =
                (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dists[b] >= dists[i] => Some(b),
                        _ => Some(i),
                    });
            if let Some(i) = far {
                counts[labels[i]] -= 1;
                labels[i] = c;
                dists[i] = 0.0;
                counts[c] = 1;
                seized[c] = Some(i);
            }
        }

        let mut sums = vec![0.0f64; k * dim];
        for (i, p) in points.iter_rows().enumerate() {
            let s = &mut sums[labels[i] * dim..(labels[i] + 1) * dim];
            for (acc, &v) in s.iter_mut().zip(p) {
                *acc += v as f64;
            }
        }
        let mut next = Matrix::zeros(k, dim);
        for c in 0..k {
            if counts[c] == 0 {
                next.row_mut(c).copy_from_slice(centroids.row(c));
                continue;
            }
            if let Some(i) = seized[c] {
                next.row_mut(c).copy_from_slice(points.row(i));
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            for (dst, &s) in next
                .row_mut(c)
                .iter_mut()
                .zip(&sums[c * dim..(c + 1) * dim])
            {
                *dst = (s * inv) as f32;
            }
        }
        let shift = (0..k)
            .map(|c| sq_dist(centroids.row(c), next.row(c)).sqrt())
            .fold(0.0f64, f64::max);
        centroids = next;
        iterations_run = it;
        if shift < params.tol {
            break;
        }
    }

    let inertia: f64 = points.iter_rows().map(|p| nearest(&centroids, p).1).sum();
    trace.push(inertia);
    KMeansModel {
        centroids,
        inertia,
        iterations_run,
        inertia_trace: trace,
    }
}

/// Fits k-means with k-means++ initialization and Lloyd iterations.
pub fn fit_kmeans(points: &Matrix, params: &KMeansParams, seed: u64) -> Result<KMeansModel> {
    if params.k == 0 {
        return Err(Error::Cluster("k must be >= 1".into()));
    }
    if points.rows() < params.k {
        return Err(Error::Cluster(format!(
            "{} points cannot form {} clusters",
            points.rows(),
            params.k
        )));
    }
    if points.cols() == 0 {
        return Err(Error::Cluster("points have no features".into()));
    }
    let mut best: Option<KMeansModel> = None;
    for run in 0..params.n_init.max(1) {
        let run_seed = if run == 0 {
            seed
        } else {
            seed::derive(seed, run as u64)
        };
        let model = lloyd(points, params, run_seed);
        if best.as_ref().is_none_or(|b| model.inertia < b.inertia) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one run"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use proptest::prelude::*;

    fn pts(rows: &[[f32; 2]]) -> Matrix {
        Matrix::new(rows.len(), 2, rows.iter().flatten().copied().collect()).unwrap()
    }

    fn sorted_centroids(m: &KMeansModel) -> Vec<Vec<f32>> {
        let mut c: Vec<Vec<f32>> = m.centroids().iter_rows().map(|r| r.to_vec()).collect();
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        c
    }

    /// Brute-force optimum over all 2-partitions of a tiny point set.
    fn best_two_partition(points: &[[f32; 2]]) -> (f64, Vec<Vec<f32>>) {
        let n = points.len();
        let mut best = (f64::INFINITY, Vec::new());
        for mask in 1u32..(1 << n) - 1 {
            let mut cents = Vec::new();
            let mut cost = 0.0;
            for side in [true, false] {
                let members: Vec<&[f32; 2]> = (0..n)
                    .filter(|&i| (mask >> i & 1 == 1) == side)
                    .map(|i| &points[i])
                    .collect();
                let m = members.len() as f64;
                let c = [
                    members.iter().map(|p| p[0] as f64).sum::<f64>() / m,
                    members.iter().map(|p| p[1] as f64).sum::<f64>() / m,
                ];
                cost += members
                    .iter()
                    .map(|p| (p[0] as f64 - c[0]).powi(2) + (p[1] as f64 - c[1]).powi(2))
                    .sum::<f64>();
                cents.push(vec![c[0] as f32, c[1] as f32]);
            }
            if cost < best.0 {
                cents.sort_by(|a, b| a[0].total_cmp(&b[0]));
                best = (cost, cents);
            }
        }
        best
    }

    #[test]
    fn two_clear_pairs() {
        let raw = [[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]];
        let (cost, cents) = best_two_partition(&raw);
        assert_eq!(cents, vec![vec![0.0, 0.5], vec![10.0, 10.5]]);
        for seed in 0..10 {
            let m = fit_kmeans(&pts(&raw), &KMeansParams::new(2), seed).unwrap();
            assert_eq!(sorted_centroids(&m), cents);
            assert!((m.inertia() - cost).abs() < 1e-9);
        }
    }

    #[test]
    fn assign_examples() {
        let m = fit_kmeans(
            &pts(&[[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]]),
            &KMeansParams::new(2),
            0,
        )
        .unwrap();
        let far = (0..2).find(|&c| m.centroid(c)[0] == 10.0).unwrap();
        let (c, d) = m.assign(&[9.0, 9.0]).unwrap();
        assert_eq!(c, far);
        assert_eq!(d, 1.0 + 1.5 * 1.5);
        let other = m.assign(&[0.0, 0.0]).unwrap().1;
        assert!(other < d);
        assert!(matches!(m.assign(&[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn assign_identity_and_ties() {
        let cents = Matrix::new(4, 1, vec![0.0, 1.0, 3.0, 7.0]).unwrap();
        let m = KMeansModel::from_centroids(cents).unwrap();
        assert_eq!(m.assign(&[7.0]).unwrap().0, 3);
        // equidistant from centroids 1 and 2
        assert_eq!(m.assign(&[2.0]).unwrap().0, 1);
    }

    #[test]
    fn single_cluster_is_mean() {
        let raw = [[1.0, 2.0], [3.0, 6.0], [5.0, 1.0]];
        let m = fit_kmeans(&pts(&raw), &KMeansParams::new(1), 3).unwrap();
        assert_eq!(m.centroid(0), &[3.0, 3.0]);
        // total variance x n: (4+0+4) + (1+9+4)
        assert!((m.inertia() - 22.0).abs() < 1e-9);
    }

    #[test]
    fn k_equals_n() {
        let raw = [[1.0, 2.0], [3.0, 6.0], [5.0, 1.0], [0.0, 0.0]];
        let m = fit_kmeans(&pts(&raw), &KMeansParams::new(4), 9).unwrap();
        assert_eq!(m.inertia(), 0.0);
        let mut c = sorted_centroids(&m);
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want: Vec<Vec<f32>> = raw.iter().map(|r| r.to_vec()).collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(c, want);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            fit_kmeans(&pts(&[[0.0, 0.0]]), &KMeansParams::new(2), 0),
            Err(Error::Cluster(_))
        ));
    }

    #[test]
    fn deterministic_and_restarts_never_worse() {
        let d = synthetic::blobs(40, 5, 6, 2.5, 4);
        let p = KMeansParams::new(5);
        let a = fit_kmeans(d.features(), &p, 11).unwrap();
        assert_eq!(a, fit_kmeans(d.features(), &p, 11).unwrap());
        let multi = fit_kmeans(d.features(), &KMeansParams { n_init: 4, ..p }, 11).unwrap();
        assert!(multi.inertia() <= a.inertia());
    }

    proptest! {
        #[test]
        fn lloyd_invariants(
            rows in prop::collection::vec((-20i8..20, -20i8..20, -20i8..20), 6..60),
            k in 1usize..6,
            seed in any::<u64>(),
        ) {
            let flat: Vec<f32> = rows.iter().flat_map(|&(a, b, c)| [a as f32, b as f32, c as f32]).collect();
            let points = Matrix::new(rows.len(), 3, flat).unwrap();
            let mut distinct = rows.clone();
            distinct.sort();
            distinct.dedup();
            prop_assume!(distinct.len() >= k);
            let m = fit_kmeans(&points, &KMeansParams::new(k), seed).unwrap();

            // inertia never increases (up to f32 rounding of the centroids)
            for w in m.inertia_trace().windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-6) + 1e-6, "{:?}", m.inertia_trace());
            }
            // every point's assignment is its true nearest centroid
            let mut owned = vec![0usize; k];
            for p in points.iter_rows() {
                let (c, d) = m.assign(p).unwrap();
                for j in 0..k {
                    let dj = sq_dist(p, m.centroid(j));
                    prop_assert!(d < dj || (d == dj && c <= j));
                }
                owned[c] += 1;
            }
            // no empty clusters, no duplicate centroids
            prop_assert!(owned.iter().all(|&o| o > 0), "{:?}", owned);
            for a in 0..k {
                for b in a + 1..k {
                    prop_assert!(sq_dist(m.centroid(a), m.centroid(b)).sqrt() > 1e-9);
                }
            }
        }
    }
}
