//! Fair graph clustering via algebraic distance.
//!
//! The pipeline partitions an undirected weighted graph into `k` clusters
//! while keeping every protected group represented in each cluster at close
//! to its global proportion:
//!
//! 1. Relax test vectors with a fairness-constrained Jacobi iteration; each
//!    step solves a penalized saddle system through the Woodbury identity.
//! 2. Reweight the edges by `exp(-beta * s(i,j))`, where `s` is the maximum
//!    coordinate gap across test vectors (the algebraic distance).
//! 3. Coarsen the reweighted graph recursively, selecting mutually weakly
//!    connected representatives and projecting through row-stochastic
//!    interpolation (Galerkin products), scanning nodes in volume order.
//! 4. Spectrally cluster the first coarse level with at least `m` nodes and
//!    use its nodes as anchors: per-cluster indicator vectors come from `k`
//!    penalized sparse SPD solves, and labels are the row-wise argmax.
//!
//! The crate also ships a plain spectral-clustering baseline, a modified
//! stochastic-block-model generator with planted fair clusters, and the
//! evaluation metrics (permutation-minimized error rate, balance, NCut).
//!
//! Data-parallel stages (test vectors, indicator solves, k-means restarts,
//! Galerkin rows) run on rayon when the default `parallel` feature is
//! enabled and fall back to sequential loops without it; results are
//! identical either way.

pub mod algdist;
pub mod anchors;
pub mod coarsen;
pub mod fairness;
pub mod graph;
pub mod kmeans;
pub mod metrics;
pub mod msbm;
pub mod sc;
pub mod solver;

mod eigen;
mod error;
mod par;
mod seeds;

pub use error::{Error, Result};

pub use algdist::{
    build_algebraic_affinity, constrained_jacobi, relax_test_vectors, woodbury_apply,
    AlgebraicAffinity, RelaxationConfig, TestVectorSet, WoodburySolver,
};
pub use anchors::{
    build_anchor_constraints, select_coarse_level, spectral_cluster_coarse, AnchorConfig,
    AnchorSet,
};
pub use coarsen::{
    build_hierarchy, coarsen_level, galerkin_coarse_affinity, interpolation_matrix,
    volume_ordering, CoarseHierarchy, CoarseLevel, CoarseningConfig, Interpolation,
};
pub use fairness::{
    average_balance, balance, build_fairness_matrix, fairness_residual, FairnessMatrix,
    GroupPartition,
};
pub use graph::{
    degree_vector, largest_connected_component, load_edge_list, normalized_laplacian_apply,
    save_edge_list, EdgeListLoad, NormalizedLaplacian, SparseGraph,
};
pub use kmeans::{kmeans_rows, KMeansConfig, KMeansOutcome};
pub use metrics::{compile_report, error_rate, optimal_permutation, MetricsReport};
pub use msbm::{msbm_generate, write_instance, MsbmConfig, MsbmInstance};
pub use sc::{ncut_value, run_sc, ScConfig};
pub use solver::{
    assign_labels, run_fairad, solve_indicator, AnchoredSystem, ClusterAssignment, FairadConfig,
    FairadDiagnostics,
};
