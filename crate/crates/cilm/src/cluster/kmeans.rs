//! Lloyd's K-means on spatial coordinates.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::ClusterAssignment;
use crate::population::Population;

/// Cluster the population into `k` groups of nearby points. Nearest-centroid
/// ties go to the lowest centroid index; a cluster that empties out is
/// re-seeded with the point farthest from its current centroid.
pub fn kmeans(
    pop: &Population,
    k: usize,
    rng: &mut impl Rng,
    max_iters: usize,
) -> Result<ClusterAssignment> {
    let n = pop.len();
    if k < 1 || k > n {
        return Err(Error::Clustering(format!("k {k} outside 1..={n}")));
    }
    let mut centroids: Vec<(f64, f64)> =
        sample(rng, n, k).into_iter().map(|i| pop.coord(i)).collect();
    let mut labels = vec![0usize; n];
    for _ in 0..max_iters.max(1) {
        let mut next = vec![0usize; n];
        for i in 0..n {
            let p = pop.coord(i);
            let mut best = 0usize;
            let mut best_d = sq_dist(p, centroids[0]);
            for (m, &c) in centroids.iter().enumerate().skip(1) {
                let d = sq_dist(p, c);
                if d < best_d {
                    best = m;
                    best_d = d;
                }
            }
            next[i] = best;
        }
        reseed_empty_clusters(pop, k, &mut next, &centroids);
        let converged = next == labels;
        labels = next;
        for m in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == m).collect();
            let inv = 1.0 / members.len() as f64;
            let (sx, sy) = members
                .iter()
                .fold((0.0, 0.0), |(sx, sy), &i| (sx + pop.coord(i).0, sy + pop.coord(i).1));
            centroids[m] = (sx * inv, sy * inv);
        }
        if converged {
            break;
        }
    }
    ClusterAssignment::from_membership(pop, labels)
}

fn sq_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy
}

fn reseed_empty_clusters(
    pop: &Population,
    k: usize,
    labels: &mut [usize],
    centroids: &[(f64, f64)],
) {
    loop {
        let mut counts = vec![0usize; k];
        for &m in labels.iter() {
            counts[m] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else { return };
        // Take the point farthest from its centroid, from a cluster that can
        // spare one; lowest id on ties.
        let mut far: Option<(usize, f64)> = None;
        for (i, &m) in labels.iter().enumerate() {
            if counts[m] <= 1 {
                continue;
            }
            let d = sq_dist(pop.coord(i), centroids[m]);
            if far.map_or(true, |(_, fd)| d > fd) {
                far = Some((i, d));
            }
        }
        let (steal, _) = far.expect("k <= n leaves a donor cluster");
        labels[steal] = empty;
    }
}
