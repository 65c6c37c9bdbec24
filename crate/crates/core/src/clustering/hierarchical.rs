use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Backend, ClusterAssignment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    /// Merge cost is the increase in within-cluster sum of squares.
    #[default]
    Ward,
    /// Mean pairwise Euclidean distance.
    Average,
    /// Largest pairwise Euclidean distance.
    Complete,
}

/// One agglomeration step. Clusters are named by their smallest member
/// index, so `a < b` and the merged cluster keeps the name `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalOutcome {
    pub assignment: ClusterAssignment,
    pub merges: Vec<Merge>,
}

fn sq_dist(points: &Array2<f64>, i: usize, j: usize) -> f64 {
    points.row(i).iter().zip(points.row(j)).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Agglomerates until `k` clusters remain, updating the cluster distance
/// matrix by the Lance-Williams recurrence. Ties go to the lowest
/// `(a, b)` pair. Labels number the final clusters by smallest member.
pub fn hierarchical(points: &Array2<f64>, k: usize, linkage: Linkage) -> Result<HierarchicalOutcome> {
    let n = points.nrows();
    if k == 0 || n < k {
        return Err(Error::Input(format!(
            "hierarchical clustering needs at least k = {k} >= 1 points, got {n}"
        )));
    }
    let mut d = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let sq = sq_dist(points, i, j);
            let v = match linkage {
                Linkage::Ward => 0.5 * sq,
                Linkage::Average | Linkage::Complete => sq.sqrt(),
            };
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut owner: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - k);
    for _ in 0..n - k {
        let mut best = (f64::INFINITY, 0, 0);
        for a in (0..n).filter(|&a| active[a]) {
            for b in (a + 1..n).filter(|&b| active[b]) {
                if d[[a, b]] < best.0 {
                    best = (d[[a, b]], a, b);
                }
            }
        }
        let (cost, a, b) = best;
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for c in (0..n).filter(|&c| active[c] && c != a && c != b) {
            let nc = size[c] as f64;
            let v = match linkage {
                Linkage::Ward => {
                    ((na + nc) * d[[a, c]] + (nb + nc) * d[[b, c]] - nc * cost) / (na + nb + nc)
                }
                Linkage::Average => (na * d[[a, c]] + nb * d[[b, c]]) / (na + nb),
                Linkage::Complete => d[[a, c]].max(d[[b, c]]),
            };
            d[[a, c]] = v;
            d[[c, a]] = v;
        }
        active[b] = false;
        size[a] += size[b];
        for o in owner.iter_mut().filter(|o| **o == b) {
            *o = a;
        }
        merges.push(Merge { a, b, cost });
    }
    let mut names: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
    names.sort_unstable();
    let labels = owner
        .iter()
        .map(|o| names.binary_search(o).expect("owner is active"))
        .collect();
    Ok(HierarchicalOutcome {
        assignment: ClusterAssignment { backend: Backend::Hierarchical, labels, q: k },
        merges,
    })
}
