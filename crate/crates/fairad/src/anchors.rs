//! Coarse-level selection, spectral clustering of the coarse graph, and the
//! anchor constraint system for the final solve.

use crate::coarsen::CoarseHierarchy;
use crate::eigen::dense_smallest;
use crate::error::{validation, Error, Result};
use crate::graph::{NormalizedLaplacian, SparseGraph};
use crate::kmeans::{kmeans_rows, KMeansConfig};

#[derive(Debug, Clone)]
pub struct AnchorConfig {
    /// Minimum number of representative nodes (the paper suggests 15-50
    /// for fewer than 10 clusters).
    pub m: usize,
    pub k: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
    pub seed: u64,
}

impl AnchorConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        AnchorConfig {
            m: 30,
            k,
            kmeans_restarts: 10,
            kmeans_max_iters: 300,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(validation(format!("need k >= 2 clusters, got {}", self.k)));
        }
        if self.m <= self.k {
            return Err(validation(format!(
                "anchor count m must exceed k (m = {}, k = {})",
                self.m, self.k
            )));
        }
        Ok(())
    }
}

pub(crate) fn select_level_from_sizes(sizes: &[usize], m: usize) -> Result<usize> {
    for level in (0..sizes.len()).rev() {
        if sizes[level] >= m {
            return Ok(level);
        }
    }
    Err(validation(format!(
        "no level holds at least m = {m} nodes (finest level has {}); pick a smaller m",
        sizes.first().copied().unwrap_or(0)
    )))
}

/// First level, scanning from the coarsest toward the finest, whose node
/// count is at least `m`.
pub fn select_coarse_level(hierarchy: &CoarseHierarchy, m: usize) -> Result<usize> {
    select_level_from_sizes(&hierarchy.level_sizes(), m)
}

/// Cluster a coarse graph: dense eigendecomposition of its normalized
/// Laplacian, then k-means on the rows of the first `k` eigenvectors.
pub fn spectral_cluster_coarse(w_c: &SparseGraph, cfg: &AnchorConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    let m = w_c.num_nodes();
    if m < cfg.k {
        return Err(validation(format!(
            "coarse graph has {m} nodes, fewer than k = {}",
            cfg.k
        )));
    }
    let lap = NormalizedLaplacian::new(w_c)?;
    let dense = lap.to_dense();
    let (_, embedding) = dense_smallest(&dense, cfg.k);
    let outcome = kmeans_rows(
        &embedding,
        &KMeansConfig {
            k: cfg.k,
            restarts: cfg.kmeans_restarts,
            max_iters: cfg.kmeans_max_iters,
            seed: cfg.seed,
        },
    )?;
    Ok(outcome.labels)
}

/// Anchor constraint system: the one-hot selector `B` (one row per
/// representative) and the per-cluster membership vectors `c_i`, stored
/// compactly as the representatives' original ids and labels.
#[derive(Debug, Clone)]
pub struct AnchorSet {
    n: usize,
    k: usize,
    rep_nodes: Vec<usize>,
    rep_labels: Vec<usize>,
}

impl AnchorSet {
    pub fn new(n: usize, k: usize, rep_nodes: Vec<usize>, rep_labels: Vec<usize>) -> Result<Self> {
        if rep_nodes.len() != rep_labels.len() {
            return Err(validation("representative ids and labels differ in length"));
        }
        if rep_nodes.is_empty() {
            return Err(validation("anchor set must contain at least one representative"));
        }
        let mut seen = vec![false; n];
        for &r in &rep_nodes {
            if r >= n {
                return Err(validation(format!("representative {r} out of range for {n} nodes")));
            }
            if seen[r] {
                return Err(validation(format!("representative {r} appears twice")));
            }
            seen[r] = true;
        }
        let mut cluster_counts = vec![0usize; k];
        for &l in &rep_labels {
            if l >= k {
                return Err(validation(format!("representative label {l} out of range for k = {k}")));
            }
            cluster_counts[l] += 1;
        }
        if let Some(missing) = cluster_counts.iter().position(|&c| c == 0) {
            return Err(Error::Degenerate(format!(
                "cluster {missing} has no representative anchor"
            )));
        }
        Ok(AnchorSet {
            n,
            k,
            rep_nodes,
            rep_labels,
        })
    }

    /// Number of representatives, `m*`.
    pub fn len(&self) -> usize {
        self.rep_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rep_nodes.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_clusters(&self) -> usize {
        self.k
    }

    /// Original-graph node id of each representative (the one-hot column of
    /// the corresponding row of `B`).
    pub fn rep_nodes(&self) -> &[usize] {
        &self.rep_nodes
    }

    pub fn rep_labels(&self) -> &[usize] {
        &self.rep_labels
    }

    /// `c_i` over representatives: 1 where the representative carries
    /// label `i`.
    pub fn cluster_indicator(&self, i: usize) -> Vec<f64> {
        self.rep_labels
            .iter()
            .map(|&l| if l == i { 1.0 } else { 0.0 })
            .collect()
    }

    /// `mu * B^T c_i` as a length-`n` vector: `mu` at the representatives
    /// labeled `i`, zero elsewhere.
    pub fn penalty_rhs(&self, i: usize, mu: f64) -> Vec<f64> {
        let mut rhs = vec![0.0; self.n];
        for (&r, &l) in self.rep_nodes.iter().zip(&self.rep_labels) {
            if l == i {
                rhs[r] = mu;
            }
        }
        rhs
    }
}

/// Map coarse-level labels back to original node ids and assemble the
/// anchor system.
pub fn build_anchor_constraints(
    level: usize,
    hierarchy: &CoarseHierarchy,
    labels: &[usize],
    k: usize,
) -> Result<AnchorSet> {
    let rep_nodes = hierarchy.original_ids(level);
    if rep_nodes.len() != labels.len() {
        return Err(Error::Internal(format!(
            "level {level} has {} nodes but {} labels were provided",
            rep_nodes.len(),
            labels.len()
        )));
    }
    AnchorSet::new(hierarchy.level_size(0), k, rep_nodes, labels.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarsen::{build_hierarchy, CoarseningConfig};

    #[test]
    fn level_selection_scans_from_coarsest() {
        assert_eq!(select_level_from_sizes(&[1000, 200, 40, 12], 30).unwrap(), 2);
        assert_eq!(select_level_from_sizes(&[50], 30).unwrap(), 0);
        assert!(matches!(
            select_level_from_sizes(&[20], 30),
            Err(Error::Validation(_))
        ));
    }

    fn two_triangles_with_bridge(eps: f64) -> SparseGraph {
        SparseGraph::from_edges(
            6,
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (0, 2, 1.0),
                (3, 4, 1.0),
                (4, 5, 1.0),
                (3, 5, 1.0),
                (2, 3, eps),
            ],
        )
        .unwrap()
    }

    #[test]
    fn spectral_separates_weakly_joined_triangles() {
        let g = two_triangles_with_bridge(1e-6);
        let mut cfg = AnchorConfig::new(2, 0);
        cfg.m = 3; // not used by the clustering itself
        let labels = spectral_cluster_coarse(&g, &cfg).unwrap();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[1], labels[2]);
        assert_eq!(labels[3], labels[4]);
        assert_eq!(labels[4], labels[5]);
        assert_ne!(labels[0], labels[3]);
    }

    #[test]
    fn spectral_two_nodes_one_each() {
        let g = SparseGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let mut cfg = AnchorConfig::new(2, 0);
        cfg.m = 3;
        let labels = spectral_cluster_coarse(&g, &cfg).unwrap();
        assert_ne!(labels[0], labels[1]);
    }

    #[test]
    fn spectral_complete_graph_nonempty_contract() {
        let mut edges = Vec::new();
        for i in 0..8 {
            for j in (i + 1)..8 {
                edges.push((i, j, 1.0));
            }
        }
        let g = SparseGraph::from_edges(8, &edges).unwrap();
        let mut cfg = AnchorConfig::new(2, 1);
        cfg.m = 3;
        let labels = spectral_cluster_coarse(&g, &cfg).unwrap();
        assert!(labels.iter().any(|&l| l == 0));
        assert!(labels.iter().any(|&l| l == 1));
    }

    #[test]
    fn anchor_set_structure() {
        let set = AnchorSet::new(16, 2, vec![5, 9, 11], vec![0, 1, 0]).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.cluster_indicator(0), vec![1.0, 0.0, 1.0]);
        assert_eq!(set.cluster_indicator(1), vec![0.0, 1.0, 0.0]);
        let rhs = set.penalty_rhs(0, 2.0);
        assert_eq!(rhs[5], 2.0);
        assert_eq!(rhs[11], 2.0);
        assert_eq!(rhs[9], 0.0);
        assert_eq!(rhs.iter().filter(|&&v| v != 0.0).count(), 2);
        // Sum of cluster indicators is all-ones over representatives.
        let sum: Vec<f64> = (0..3)
            .map(|t| set.cluster_indicator(0)[t] + set.cluster_indicator(1)[t])
            .collect();
        assert_eq!(sum, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn anchor_set_rejects_duplicates_and_empty_clusters() {
        assert!(AnchorSet::new(10, 2, vec![1, 1], vec![0, 1]).is_err());
        assert!(matches!(
            AnchorSet::new(10, 2, vec![1, 2], vec![0, 0]),
            Err(Error::Degenerate(_))
        ));
        assert!(AnchorSet::new(10, 2, vec![], vec![]).is_err());
    }

    #[test]
    fn constraints_at_level_zero_are_identity() {
        let g = SparseGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let cfg = CoarseningConfig {
            alpha: 1.0, // stagnates immediately: only level 0 exists
            ..CoarseningConfig::default()
        };
        let h = build_hierarchy(&g, &cfg).unwrap();
        let set = build_anchor_constraints(0, &h, &[0, 1, 0], 2).unwrap();
        assert_eq!(set.rep_nodes(), &[0, 1, 2]);
    }

    #[test]
    fn constraints_map_through_hierarchy() {
        let g = SparseGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let h = build_hierarchy(&g, &CoarseningConfig::default()).unwrap();
        assert_eq!(h.num_coarse_levels(), 1);
        // Level 1 holds the single selected node, which is original node 0.
        let ids = h.original_ids(1);
        assert_eq!(ids, vec![0]);
    }
}
