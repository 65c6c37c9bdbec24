use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Backend, ClusterAssignment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansOutcome {
    pub assignment: ClusterAssignment,
    pub centroids: Array2<f64>,
    /// Inertia after each assignment step.
    pub inertia: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid per point, lowest index on ties, and the total
/// squared distance.
pub fn assign_nearest(points: &Array2<f64>, centroids: &Array2<f64>) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = points
        .outer_iter()
        .map(|p| {
            let mut best = (f64::INFINITY, 0);
            for (c, row) in centroids.outer_iter().enumerate() {
                let d = sq_dist(p, row);
                if d < best.0 {
                    best = (d, c);
                }
            }
            inertia += best.0;
            best.1
        })
        .collect();
    (labels, inertia)
}

/// Candidates drawn per center by greedy k-means++.
pub fn greedy_trials(k: usize) -> usize {
    2 + (k as f64).ln().floor() as usize
}

fn draw_weighted(nearest: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let n = nearest.len();
    if total <= 0.0 {
        return rng.random_range(0..n);
    }
    let mut u = rng.random::<f64>() * total;
    for (i, &d) in nearest.iter().enumerate() {
        if d > 0.0 && u < d {
            return i;
        }
        u -= d;
    }
    n - 1
}

/// Greedy k-means++ seeding: first center uniform; each later center is
/// the best of `greedy_trials(k)` candidates drawn proportional to the
/// squared distance to the nearest chosen center, scored by the resulting
/// potential. The first candidate wins ties.
pub fn kmeans_plus_plus(points: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut centroids = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&points.row(first));
    let mut nearest: Vec<f64> = points.outer_iter().map(|p| sq_dist(p, points.row(first))).collect();
    let trials = greedy_trials(k);
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let cand = draw_weighted(&nearest, total, rng);
            let updated: Vec<f64> = points
                .outer_iter()
                .zip(&nearest)
                .map(|(p, &d)| d.min(sq_dist(p, points.row(cand))))
                .collect();
            let potential: f64 = updated.iter().sum();
            if best.as_ref().is_none_or(|b| potential < b.0) {
                best = Some((potential, cand, updated));
            }
        }
        let (_, pick, updated) = best.expect("at least two trials");
        centroids.row_mut(c).assign(&points.row(pick));
        nearest = updated;
    }
    centroids
}

/// Lloyd iterations from a seeded k-means++ start until the assignment is
/// a fixed point or `max_iter` updates have run. An empty cluster is
/// re-seeded at the point farthest from its own centroid.
pub fn kmeans(points: &Array2<f64>, k: usize, seed: u64, max_iter: usize) -> Result<KMeansOutcome> {
    let n = points.nrows();
    if k == 0 || n < k {
        return Err(Error::Input(format!("k-means needs at least k = {k} >= 1 points, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(points, k, &mut rng);
    let (mut labels, first) = assign_nearest(points, &centroids);
    let mut inertia = vec![first];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; k];
        for (p, &l) in points.outer_iter().zip(&labels) {
            let mut row = sums.row_mut(l);
            row += &p;
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mean = &sums.row(c) / counts[c] as f64;
                centroids.row_mut(c).assign(&mean);
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut far = (-1.0, 0);
            for (i, p) in points.outer_iter().enumerate() {
                if counts[labels[i]] < 2 {
                    continue;
                }
                let d = sq_dist(p, centroids.row(labels[i]));
                if d > far.0 {
                    far = (d, i);
                }
            }
            let i = far.1;
            counts[labels[i]] -= 1;
            counts[c] = 1;
            labels[i] = c;
            centroids.row_mut(c).assign(&points.row(i));
        }
        let (next, cost) = assign_nearest(points, &centroids);
        inertia.push(cost);
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
    }
    Ok(KMeansOutcome {
        assignment: ClusterAssignment { backend: Backend::KMeans, labels, q: k },
        centroids,
        inertia,
        iterations,
        converged,
    })
}
