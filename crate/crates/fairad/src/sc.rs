//! Plain (unfair) spectral clustering baseline and the NCut objective.

use crate::eigen::{dense_smallest, smallest_eigenpairs};
use crate::error::{validation, Result};
use crate::graph::{NormalizedLaplacian, SparseGraph};
use crate::kmeans::{kmeans_rows, KMeansConfig};
use crate::solver::ClusterAssignment;

/// Above this size the eigenproblem runs on the sparse operator; below it a
/// dense decomposition is cheaper and exact.
const DENSE_THRESHOLD: usize = 500;

#[derive(Debug, Clone)]
pub struct ScConfig {
    pub k: usize,
    /// Per-pair residual target `||L v - lambda v|| <= eig_tol`.
    pub eig_tol: f64,
    /// Operator-application budget of the iterative eigensolver.
    pub eig_max_iters: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
    pub seed: u64,
}

impl ScConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        ScConfig {
            k,
            eig_tol: 1e-8,
            eig_max_iters: 40_000,
            kmeans_restarts: 10,
            kmeans_max_iters: 300,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(validation(format!("need k >= 2 clusters, got {}", self.k)));
        }
        if !(self.eig_tol > 0.0) {
            return Err(validation("eig_tol must be > 0"));
        }
        Ok(())
    }
}

/// Spectral clustering: k-means on the rows of the first `k` eigenvectors
/// of the normalized Laplacian.
pub fn run_sc(g: &SparseGraph, cfg: &ScConfig) -> Result<ClusterAssignment> {
    cfg.validate()?;
    let n = g.num_nodes();
    if n < cfg.k {
        return Err(validation(format!(
            "graph has {n} nodes, fewer than k = {}",
            cfg.k
        )));
    }
    let lap = NormalizedLaplacian::new(g)?;
    let embedding = if n <= DENSE_THRESHOLD {
        dense_smallest(&lap.to_dense(), cfg.k).1
    } else {
        smallest_eigenpairs(&lap, cfg.k, cfg.eig_tol, cfg.eig_max_iters, cfg.seed)?.vectors
    };
    let outcome = kmeans_rows(
        &embedding,
        &KMeansConfig {
            k: cfg.k,
            restarts: cfg.kmeans_restarts,
            max_iters: cfg.kmeans_max_iters,
            seed: cfg.seed,
        },
    )?;
    ClusterAssignment::from_labels(outcome.labels, cfg.k)
}

/// NCut over the nonempty clusters: `(1/2) sum W(C, ~C) / Vol(C)`.
/// `strict` rejects empty clusters instead of skipping them.
pub(crate) fn ncut_partial(g: &SparseGraph, a: &ClusterAssignment, strict: bool) -> Result<f64> {
    if a.num_nodes() != g.num_nodes() {
        return Err(validation(format!(
            "assignment covers {} nodes but the graph has {}",
            a.num_nodes(),
            g.num_nodes()
        )));
    }
    let k = a.num_clusters();
    let labels = a.labels();
    let mut cut = vec![0.0f64; k];
    let mut vol = vec![0.0f64; k];
    for i in 0..g.num_nodes() {
        let li = labels[i];
        vol[li] += g.degree(i);
        let (cols, ws) = g.row(i);
        for (&j, &w) in cols.iter().zip(ws) {
            if labels[j] != li {
                cut[li] += w;
            }
        }
    }
    let sizes = a.cluster_sizes();
    let mut total = 0.0;
    for l in 0..k {
        if sizes[l] == 0 {
            if strict {
                return Err(validation(format!("cluster {l} is empty")));
            }
            continue;
        }
        if vol[l] <= 0.0 {
            return Err(validation(format!(
                "cluster {l} has zero volume (isolated nodes only)"
            )));
        }
        total += cut[l] / vol[l];
    }
    Ok(0.5 * total)
}

/// NCut objective of an assignment; every cluster must be nonempty with
/// positive volume.
pub fn ncut_value(g: &SparseGraph, a: &ClusterAssignment) -> Result<f64> {
    ncut_partial(g, a, true)
}
