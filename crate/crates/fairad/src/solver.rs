//! The anchored constrained solve and the end-to-end pipeline.
//!
//! With anchors `B`, `c_i` from the coarse level, each cluster indicator is
//! the one-step Uzawa solution `v_i = mu * A^{-1} B^T c_i` where
//! `A = L_norm + mu B^T B` is sparse SPD (`B^T B` is a 0/1 diagonal). The k
//! systems are independent and solved by preconditioned conjugate
//! gradients; labels are the per-node argmax across indicators.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::algdist::{build_algebraic_affinity, relax_test_vectors, RelaxationConfig};
use crate::anchors::{build_anchor_constraints, select_coarse_level, spectral_cluster_coarse, AnchorConfig, AnchorSet};
use crate::coarsen::{build_hierarchy, CoarseningConfig};
use crate::error::{validation, Error, Result};
use crate::fairness::{build_fairness_matrix, fairness_residual, GroupPartition};
use crate::graph::{largest_connected_component, NormalizedLaplacian, SparseGraph};
use crate::par;

/// Final clustering: hard labels plus the soft indicator vectors they were
/// derived from. `labels[j]` is always the argmax of row `j` of the
/// indicators (ties to the lowest cluster id).
#[derive(Debug, Clone)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    indicators: DMatrix<f64>,
    k: usize,
}

impl ClusterAssignment {
    /// Build from soft indicators (`n x k`), taking row-wise argmax labels.
    pub fn from_indicators(indicators: DMatrix<f64>) -> Result<Self> {
        let k = indicators.ncols();
        if k == 0 || indicators.nrows() == 0 {
            return Err(validation("indicator matrix must be nonempty"));
        }
        if indicators.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite cluster indicator".into()));
        }
        let labels = (0..indicators.nrows())
            .map(|j| {
                let mut best = 0usize;
                let mut best_v = indicators[(j, 0)];
                for i in 1..k {
                    if indicators[(j, i)] > best_v {
                        best_v = indicators[(j, i)];
                        best = i;
                    }
                }
                best
            })
            .collect();
        Ok(ClusterAssignment {
            labels,
            indicators,
            k,
        })
    }

    /// Build from hard labels; indicators become one-hot rows.
    pub fn from_labels(labels: Vec<usize>, k: usize) -> Result<Self> {
        if labels.is_empty() || k == 0 {
            return Err(validation("assignment must cover at least one node and one cluster"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(validation(format!("label {bad} out of range for k = {k}")));
        }
        let mut indicators = DMatrix::zeros(labels.len(), k);
        for (j, &l) in labels.iter().enumerate() {
            indicators[(j, l)] = 1.0;
        }
        Ok(ClusterAssignment {
            labels,
            indicators,
            k,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn indicators(&self) -> &DMatrix<f64> {
        &self.indicators
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_clusters(&self) -> usize {
        self.k
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn empty_clusters(&self) -> Vec<usize> {
        self.cluster_sizes()
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 0)
            .map(|(l, _)| l)
            .collect()
    }
}

/// Row-wise argmax labeling of an indicator matrix.
pub fn assign_labels(indicators: DMatrix<f64>) -> Result<ClusterAssignment> {
    ClusterAssignment::from_indicators(indicators)
}

/// Sparse SPD operator `L_norm + mu B^T B` with the per-cluster right-hand
/// sides `mu B^T c_i`. The penalty is applied as a diagonal update; nothing
/// is densified.
pub struct AnchoredSystem<'a> {
    laplacian: NormalizedLaplacian<'a>,
    anchors: &'a AnchorSet,
    mu: f64,
    penalty: Vec<f64>,
}

impl<'a> AnchoredSystem<'a> {
    pub fn new(w_alg: &'a SparseGraph, anchors: &'a AnchorSet, mu: f64) -> Result<Self> {
        if anchors.num_nodes() != w_alg.num_nodes() {
            return Err(validation(format!(
                "anchor set covers {} nodes but the graph has {}",
                anchors.num_nodes(),
                w_alg.num_nodes()
            )));
        }
        if !(mu > 0.0) {
            return Err(validation(format!("mu must be > 0, got {mu}")));
        }
        let laplacian = NormalizedLaplacian::new(w_alg)?;
        let mut penalty = vec![0.0; w_alg.num_nodes()];
        for &r in anchors.rep_nodes() {
            penalty[r] = mu;
        }
        Ok(AnchoredSystem {
            laplacian,
            anchors,
            mu,
            penalty,
        })
    }

    pub fn dim(&self) -> usize {
        self.penalty.len()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn anchors(&self) -> &AnchorSet {
        self.anchors
    }

    /// `y = (L_norm + mu B^T B) x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.laplacian.apply(x, y);
        for i in 0..x.len() {
            y[i] += self.penalty[i] * x[i];
        }
    }

    /// Right-hand side `mu B^T c_i`.
    pub fn rhs(&self, cluster: usize) -> Vec<f64> {
        self.anchors.penalty_rhs(cluster, self.mu)
    }

    /// Jacobi preconditioner diagonal (`diag(L_norm) = 1` on positive
    /// degrees, plus the anchor penalty).
    fn precond_diag(&self) -> Vec<f64> {
        self.penalty.iter().map(|&p| 1.0 + p).collect()
    }
}

/// Convergence record of one indicator solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final `||A v - b|| / ||b||`.
    pub residual: f64,
}

/// Solve `(L_norm + mu B^T B) v = mu B^T c_i` by Jacobi-preconditioned
/// conjugate gradients to `||A v - b|| <= tol * ||b||`.
pub fn solve_indicator(
    sys: &AnchoredSystem<'_>,
    cluster: usize,
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    if !(tol > 0.0) {
        return Err(validation(format!("solver tolerance must be > 0, got {tol}")));
    }
    if cluster >= sys.anchors().num_clusters() {
        return Err(validation(format!(
            "cluster {cluster} out of range for k = {}",
            sys.anchors().num_clusters()
        )));
    }
    let n = sys.dim();
    let b = sys.rhs(cluster);
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    debug_assert!(bnorm > 0.0, "every cluster has at least one anchor");
    let minv: Vec<f64> = sys.precond_diag().iter().map(|d| 1.0 / d).collect();

    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&minv).map(|(&ri, &mi)| ri * mi).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut q = vec![0.0; n];

    let mut residual = 1.0;
    for it in 1..=max_iters {
        sys.apply(&p, &mut q);
        let pq: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
        if pq <= 0.0 || !pq.is_finite() {
            return Err(Error::Numerical(format!(
                "conjugate gradients lost positive definiteness at iteration {it} (p^T A p = {pq})"
            )));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        residual = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
        if residual <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: it,
                    residual,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] * minv[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
    }
    Err(Error::NoConvergence {
        iters: max_iters,
        residual,
    })
}

/// Knobs of the end-to-end pipeline. `relaxation.mu` is also the penalty of
/// the anchored solve, and `relaxation.seed` drives every random sub-stream.
#[derive(Debug, Clone)]
pub struct FairadConfig {
    pub relaxation: RelaxationConfig,
    pub coarsening: CoarseningConfig,
    /// Minimum representative count at the selected coarse level.
    pub min_anchors: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
    /// Relative residual target of the indicator solves.
    pub solve_tol: f64,
    /// Defaults to `10 * n` when unset.
    pub solve_max_iters: Option<usize>,
}

impl FairadConfig {
    /// Paper-style defaults for a graph with `n` nodes.
    pub fn for_graph(n: usize, seed: u64) -> Self {
        FairadConfig {
            relaxation: RelaxationConfig::for_graph(n, seed),
            coarsening: CoarseningConfig::default(),
            min_anchors: 30,
            kmeans_restarts: 10,
            kmeans_max_iters: 300,
            solve_tol: 1e-8,
            solve_max_iters: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub ms: f64,
}

/// Per-stage timings and numerical health indicators of one pipeline run.
#[derive(Debug, Clone, Serialize)]
pub struct FairadDiagnostics {
    pub stages: Vec<StageTiming>,
    /// `||F^T x_r|| / ||x_r||` per test vector.
    pub fairness_residuals: Vec<f64>,
    pub level_sizes: Vec<usize>,
    pub selected_level: usize,
    pub num_anchors: usize,
    pub solver_iterations: Vec<usize>,
    pub solver_residuals: Vec<f64>,
    pub beta: f64,
}

impl FairadDiagnostics {
    pub fn stage_ms(&self) -> impl Iterator<Item = (&str, f64)> {
        self.stages.iter().map(|s| (s.stage.as_str(), s.ms))
    }
}

fn is_connected(g: &SparseGraph) -> bool {
    if g.num_nodes() == 0 {
        return false;
    }
    largest_connected_component(g).0.num_nodes() == g.num_nodes()
}

/// Run the whole FairAD pipeline on a connected graph.
pub fn run_fairad(
    g: &SparseGraph,
    groups: &GroupPartition,
    k: usize,
    cfg: &FairadConfig,
) -> Result<(ClusterAssignment, FairadDiagnostics)> {
    let stage = |name: &'static str| move |e: Error| e.in_stage(name);
    let mut stages: Vec<StageTiming> = Vec::new();
    let mut clock = Instant::now();
    let lap = |stages: &mut Vec<StageTiming>, name: &str, clock: &mut Instant| {
        stages.push(StageTiming {
            stage: name.to_string(),
            ms: clock.elapsed().as_secs_f64() * 1e3,
        });
        *clock = Instant::now();
    };

    if k < 2 {
        return Err(validation(format!("need k >= 2 clusters, got {k}")).in_stage("validate"));
    }
    if groups.num_nodes() != g.num_nodes() {
        return Err(validation(format!(
            "group partition covers {} nodes but the graph has {}",
            groups.num_nodes(),
            g.num_nodes()
        ))
        .in_stage("validate"));
    }
    if groups.num_groups() < 2 {
        return Err(validation("fair clustering needs at least two protected groups")
            .in_stage("validate"));
    }
    if !is_connected(g) {
        return Err(validation(
            "graph is disconnected; run the largest-connected-component pass first",
        )
        .in_stage("validate"));
    }
    lap(&mut stages, "validate", &mut clock);

    let fairness = build_fairness_matrix(groups).map_err(stage("fairness_matrix"))?;
    lap(&mut stages, "fairness_matrix", &mut clock);

    let tv = relax_test_vectors(g, &fairness, &cfg.relaxation).map_err(stage("test_vectors"))?;
    let fairness_residuals: Vec<f64> = (0..tv.num_vectors())
        .map(|r| fairness_residual(&fairness, tv.vector(r)))
        .collect();
    lap(&mut stages, "test_vectors", &mut clock);

    let affinity =
        build_algebraic_affinity(g, &tv, cfg.relaxation.beta).map_err(stage("affinity"))?;
    lap(&mut stages, "affinity", &mut clock);

    let hierarchy =
        build_hierarchy(affinity.graph(), &cfg.coarsening).map_err(stage("coarsening"))?;
    let level_sizes = hierarchy.level_sizes();
    lap(&mut stages, "coarsening", &mut clock);

    let level = select_coarse_level(&hierarchy, cfg.min_anchors).map_err(stage("level_selection"))?;
    lap(&mut stages, "level_selection", &mut clock);

    let anchor_cfg = AnchorConfig {
        m: cfg.min_anchors,
        k,
        kmeans_restarts: cfg.kmeans_restarts,
        kmeans_max_iters: cfg.kmeans_max_iters,
        seed: cfg.relaxation.seed,
    };
    let coarse_graph: &SparseGraph = if level == 0 {
        affinity.graph()
    } else {
        &hierarchy.coarse_level(level).graph
    };
    let coarse_labels =
        spectral_cluster_coarse(coarse_graph, &anchor_cfg).map_err(stage("coarse_clustering"))?;
    lap(&mut stages, "coarse_clustering", &mut clock);

    let anchors = build_anchor_constraints(level, &hierarchy, &coarse_labels, k)
        .map_err(stage("anchor_constraints"))?;
    lap(&mut stages, "anchor_constraints", &mut clock);

    let system = AnchoredSystem::new(affinity.graph(), &anchors, cfg.relaxation.mu)
        .map_err(stage("indicator_solves"))?;
    let max_iters = cfg.solve_max_iters.unwrap_or(10 * g.num_nodes());
    let solves = par::try_map_range(k, |i| {
        solve_indicator(&system, i, cfg.solve_tol, max_iters)
    })
    .map_err(stage("indicator_solves"))?;
    let mut indicators = DMatrix::zeros(g.num_nodes(), k);
    let mut solver_iterations = Vec::with_capacity(k);
    let mut solver_residuals = Vec::with_capacity(k);
    for (i, (v, stats)) in solves.into_iter().enumerate() {
        for (j, &x) in v.iter().enumerate() {
            indicators[(j, i)] = x;
        }
        solver_iterations.push(stats.iterations);
        solver_residuals.push(stats.residual);
    }
    lap(&mut stages, "indicator_solves", &mut clock);

    let num_anchors = anchors.len();
    let assignment = assign_labels(indicators).map_err(stage("label_assignment"))?;
    lap(&mut stages, "label_assignment", &mut clock);

    let diagnostics = FairadDiagnostics {
        stages,
        fairness_residuals,
        level_sizes,
        selected_level: level,
        num_anchors,
        solver_iterations,
        solver_residuals,
        beta: cfg.relaxation.beta,
    };
    Ok((assignment, diagnostics))
}
