//! Seeded multi-restart Lloyd k-means over matrix rows.
//!
//! Centroid initialization is the standard distance-weighted sampling
//! scheme; every restart draws from its own named RNG sub-stream, so
//! results are reproducible and independent of restart execution order.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{validation, Error, Result};
use crate::par;
use crate::seeds::substream_rng;

#[derive(Debug, Clone)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            restarts: 10,
            max_iters: 300,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansOutcome {
    pub labels: Vec<usize>,
    pub inertia: f64,
    /// Restarts that ended with an empty cluster and were discarded.
    pub degenerate_restarts: usize,
}

struct RestartResult {
    labels: Vec<usize>,
    inertia: f64,
    degenerate: bool,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lloyd(flat: &[f64], npoints: usize, dim: usize, cfg: &KMeansConfig, restart: usize) -> RestartResult {
    let k = cfg.k;
    let point = |i: usize| &flat[i * dim..(i + 1) * dim];
    let mut rng = substream_rng(cfg.seed, "kmeans:restart", restart as u64);

    // Distance-weighted seeding: first center uniform, then each next
    // center drawn proportionally to the squared distance to the nearest
    // chosen center. All-zero weights fall back to the first unchosen point.
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; npoints];
    let first = rng.random_range(0..npoints);
    chosen[first] = true;
    centers.push(point(first).to_vec());
    let mut near2: Vec<f64> = (0..npoints).map(|i| dist2(point(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = near2.iter().sum();
        let idx = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = npoints - 1;
            for (i, &w) in near2.iter().enumerate() {
                cum += w;
                if cum > u {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            (0..npoints).find(|&i| !chosen[i]).unwrap_or(0)
        };
        chosen[idx] = true;
        centers.push(point(idx).to_vec());
        let c = centers.last().unwrap();
        for i in 0..npoints {
            let d = dist2(point(i), c);
            if d < near2[i] {
                near2[i] = d;
            }
        }
    }

    let mut labels = vec![0usize; npoints];
    let mut counts = vec![0usize; k];
    for _ in 0..cfg.max_iters {
        // Assignment; ties go to the lowest centroid index.
        let mut changed = false;
        for i in 0..npoints {
            let p = point(i);
            let mut best = 0usize;
            let mut best_d = dist2(p, &centers[0]);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = dist2(p, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        // Update: empty clusters keep their previous centroid.
        let mut sums = vec![vec![0.0f64; dim]; k];
        counts.iter_mut().for_each(|c| *c = 0);
        for i in 0..npoints {
            counts[labels[i]] += 1;
            let p = point(i);
            for (s, &x) in sums[labels[i]].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (center, sum) in centers[c].iter_mut().zip(&sums[c]) {
                    *center = sum / counts[c] as f64;
                }
            }
        }
    }

    counts.iter_mut().for_each(|c| *c = 0);
    let mut inertia = 0.0;
    for i in 0..npoints {
        counts[labels[i]] += 1;
        inertia += dist2(point(i), &centers[labels[i]]);
    }
    RestartResult {
        labels,
        inertia,
        degenerate: counts.iter().any(|&c| c == 0),
    }
}

/// Cluster the rows of `points` into `cfg.k` groups; returns the labels of
/// the best (lowest-inertia) non-degenerate restart.
pub fn kmeans_rows(points: &DMatrix<f64>, cfg: &KMeansConfig) -> Result<KMeansOutcome> {
    let npoints = points.nrows();
    let dim = points.ncols();
    if cfg.k == 0 {
        return Err(validation("k-means needs k >= 1"));
    }
    if npoints < cfg.k {
        return Err(validation(format!(
            "k-means needs at least k={} points, found {npoints}",
            cfg.k
        )));
    }
    if cfg.restarts == 0 {
        return Err(validation("k-means needs at least one restart"));
    }
    // Row-major copy for contiguous point access.
    let mut flat = vec![0.0f64; npoints * dim];
    for i in 0..npoints {
        for j in 0..dim {
            flat[i * dim + j] = points[(i, j)];
        }
    }

    let results = par::map_range(cfg.restarts, |r| lloyd(&flat, npoints, dim, cfg, r));
    let degenerate_restarts = results.iter().filter(|r| r.degenerate).count();
    let best = results
        .into_iter()
        .filter(|r| !r.degenerate)
        .reduce(|a, b| if b.inertia < a.inertia { b } else { a });
    match best {
        Some(r) => Ok(KMeansOutcome {
            labels: r.labels,
            inertia: r.inertia,
            degenerate_restarts,
        }),
        None => Err(Error::Degenerate(format!(
            "all {} k-means restarts produced an empty cluster",
            cfg.restarts
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_blobs() -> DMatrix<f64> {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push([0.0 + 0.01 * i as f64, 0.0]);
        }
        for i in 0..10 {
            pts.push([5.0 + 0.01 * i as f64, 5.0]);
        }
        DMatrix::from_fn(20, 2, |r, c| pts[r][c])
    }

    #[test]
    fn separates_clear_blobs() {
        let out = kmeans_rows(&two_blobs(), &KMeansConfig::new(2, 0)).unwrap();
        let first = out.labels[0];
        assert!(out.labels[..10].iter().all(|&l| l == first));
        assert!(out.labels[10..].iter().all(|&l| l != first));
    }

    #[test]
    fn deterministic_per_seed() {
        let pts = two_blobs();
        let a = kmeans_rows(&pts, &KMeansConfig::new(2, 42)).unwrap();
        let b = kmeans_rows(&pts, &KMeansConfig::new(2, 42)).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.inertia, b.inertia);
    }

    #[test]
    fn too_few_points_rejected() {
        let pts = DMatrix::from_row_slice(1, 1, &[0.5]);
        assert!(matches!(
            kmeans_rows(&pts, &KMeansConfig::new(2, 0)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn identical_points_degenerate() {
        let pts = DMatrix::from_element(8, 2, 1.0);
        assert!(matches!(
            kmeans_rows(&pts, &KMeansConfig::new(2, 0)),
            Err(Error::Degenerate(_))
        ));
    }
}
