use rayon::prelude::*;

use crate::perturb::rng::CounterRng;
use crate::Real;

pub const KMEANS_MAX_ITER: usize = 50;
/// Stop when total centroid movement falls below this fraction of the
/// total centroid norm.
pub const KMEANS_TOLERANCE: f64 = 1e-4;

// Below this many points assignment runs on the calling thread.
const PAR_THRESHOLD: usize = 4096;

#[derive(Clone, Debug)]
pub struct KMeansResult<T> {
    /// `k * dim` row-major centroids.
    pub centroids: Vec<T>,
    pub iterations: usize,
}

pub(crate) fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Nearest row of `table` (ties resolve to the lowest index).
pub(crate) fn nearest<T: Real>(table: &[T], dim: usize, x: &[T]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (j, c) in table.chunks_exact(dim).enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign<T: Real>(points: &[T], dim: usize, centroids: &[T]) -> Vec<(usize, T)> {
    if points.len() / dim >= PAR_THRESHOLD {
        points
            .par_chunks_exact(dim)
            .map(|p| nearest(centroids, dim, p))
            .collect()
    } else {
        points
            .chunks_exact(dim)
            .map(|p| nearest(centroids, dim, p))
            .collect()
    }
}

/// Lloyd's k-means with k-means++ seeding.
///
/// `points` is `n * dim` row-major. When `fixed_zero` is set, centroid 0 is
/// pinned to the origin and only the remaining `k - 1` move. Empty clusters
/// are re-seeded from the point farthest from its centroid. Assignment may
/// run in parallel; all reductions are sequential in point order so the
/// result does not depend on thread count.
pub fn kmeans<T: Real>(
    points: &[T],
    dim: usize,
    k: usize,
    fixed_zero: bool,
    seed: u64,
) -> KMeansResult<T> {
    assert!(dim > 0 && k > 0 && points.len().is_multiple_of(dim));
    let n = points.len() / dim;
    assert!(n > 0, "k-means needs data");
    let mut rng = CounterRng::new(seed);
    let mut centroids = vec![T::zero(); k * dim];

    // k-means++ seeding.
    if !fixed_zero {
        let first = rng.below(n);
        centroids[..dim].copy_from_slice(&points[first * dim..(first + 1) * dim]);
    }
    let mut chosen = 1;
    let mut d2: Vec<T> = points
        .chunks_exact(dim)
        .map(|p| sq_dist(p, &centroids[..dim]))
        .collect();
    while chosen < k {
        let total: f64 = d2.iter().map(|d| d.as_f64()).sum();
        let pick = if total > 0.0 {
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d.as_f64();
                if acc > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.below(n)
        };
        let row = &points[pick * dim..(pick + 1) * dim];
        centroids[chosen * dim..(chosen + 1) * dim].copy_from_slice(row);
        for (d, p) in d2.iter_mut().zip(points.chunks_exact(dim)) {
            *d = d.min(sq_dist(p, row));
        }
        chosen += 1;
    }

    let first_free = usize::from(fixed_zero);
    let mut iterations = 0;
    for _ in 0..KMEANS_MAX_ITER {
        iterations += 1;
        let assignment = assign(points, dim, &centroids);

        let mut sums = vec![T::zero(); k * dim];
        let mut counts = vec![0usize; k];
        for (p, &(j, _)) in points.chunks_exact(dim).zip(&assignment) {
            counts[j] += 1;
            for (s, &v) in sums[j * dim..(j + 1) * dim].iter_mut().zip(p) {
                *s = *s + v;
            }
        }

        let mut far: Vec<T> = assignment.iter().map(|a| a.1).collect();
        let mut updated = centroids.clone();
        for j in first_free..k {
            let row = &mut updated[j * dim..(j + 1) * dim];
            if counts[j] > 0 {
                let c = T::from_usize_lossy(counts[j]);
                for (u, &s) in row.iter_mut().zip(&sums[j * dim..(j + 1) * dim]) {
                    *u = s / c;
                }
            } else {
                let mut idx = 0;
                for (i, &d) in far.iter().enumerate() {
                    if d > far[idx] {
                        idx = i;
                    }
                }
                row.copy_from_slice(&points[idx * dim..(idx + 1) * dim]);
                far[idx] = T::zero();
            }
        }

        let shift: f64 = sq_dist(&updated, &centroids).as_f64().sqrt();
        let norm: f64 = centroids.iter().map(|v| (*v * *v).as_f64()).sum::<f64>().sqrt();
        centroids = updated;
        if shift <= KMEANS_TOLERANCE * norm.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    KMeansResult {
        centroids,
        iterations,
    }
}
