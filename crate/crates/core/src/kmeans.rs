//! Lloyd's k-means with k-means++ seeding, deterministic for a given seed.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = dist2(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

pub(crate) fn kmeans(data: &[Vec<f64>], k: usize, seed: u64, max_iter: usize, tol: f64) -> KMeans {
    assert!(k >= 1 && data.len() >= k);
    let dim = data[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++
    let mut centroids = Vec::with_capacity(k);
    centroids.push(data[rng.random_range(0..data.len())].clone());
    let mut d2: Vec<f64> = data.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = data.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.random_range(0..data.len())
        };
        centroids.push(data[pick].clone());
        let newest = &centroids[centroids.len() - 1];
        for (d, p) in d2.iter_mut().zip(data) {
            *d = d.min(dist2(p, newest));
        }
    }

    let mut assign = vec![0usize; data.len()];
    let mut prev_inertia = f64::INFINITY;
    for _ in 0..max_iter {
        let mut inertia = 0.0;
        for (a, p) in assign.iter_mut().zip(data) {
            let (j, d) = nearest(p, &centroids);
            *a = j;
            inertia += d;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assign.iter().zip(data) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let n = counts[j] as f64;
                centroids[j] = sums[j].iter().map(|s| s / n).collect();
            } else {
                // re-seed an empty cluster with the worst-fit point
                let far = (0..data.len())
                    .max_by(|&x, &y| {
                        dist2(&data[x], &centroids[assign[x]])
                            .total_cmp(&dist2(&data[y], &centroids[assign[y]]))
                            .then(y.cmp(&x))
                    })
                    .unwrap();
                centroids[j] = data[far].clone();
                assign[far] = j;
            }
        }

        let converged =
            prev_inertia.is_finite() && (prev_inertia - inertia).abs() <= tol * prev_inertia.max(f64::MIN_POSITIVE);
        prev_inertia = inertia;
        if converged {
            break;
        }
    }

    let mut counts = vec![0usize; k];
    for p in data {
        counts[nearest(p, &centroids).0] += 1;
    }
    KMeans { centroids, counts }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_blobs_and_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut data = Vec::new();
        for i in 0..200 {
            let c = if i % 2 == 0 { 5.0 } else { -5.0 };
            data.push(vec![c + rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5]);
        }
        let a = kmeans(&data, 2, 11, 100, 1e-6);
        let b = kmeans(&data, 2, 11, 100, 1e-6);
        assert_eq!(a.centroids, b.centroids);
        assert_eq!(a.counts.iter().sum::<usize>(), 200);
        assert_eq!(a.counts, vec![100, 100]);
        let mut xs: Vec<f64> = a.centroids.iter().map(|c| c[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 5.0).abs() < 0.2 && (xs[1] - 5.0).abs() < 0.2);
    }

    #[test]
    fn identical_points_single_cluster() {
        let data = vec![vec![1.0, 2.0, 3.0]; 20];
        let r = kmeans(&data, 1, 0, 100, 1e-6);
        assert_eq!(r.centroids[0], vec![1.0, 2.0, 3.0]);
    }
}
