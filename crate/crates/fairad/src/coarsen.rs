//! Recursive weighted-aggregation coarsening.
//!
//! Each level scans the previous level's nodes in descending volume order
//! and keeps the ones that are only weakly connected to the nodes selected
//! so far (`max_{j in selected} W[i][j] <= alpha * rowsum(i)`). Fine nodes
//! interpolate from their selected neighbors through a row-stochastic
//! matrix `P`, and the coarse affinity is the Galerkin product `P^T W P`
//! with the diagonal removed.

use crate::error::{validation, Error, Result};
use crate::graph::SparseGraph;
use crate::par;

#[derive(Debug, Clone)]
pub struct CoarseningConfig {
    /// Weak-connection threshold; the useful range is `0 <= alpha < 1`
    /// (values >= 1 select every node and the hierarchy stops immediately).
    pub alpha: f64,
    /// Cap on the number of coarsening steps.
    pub max_levels: usize,
    /// Stop once a level has fewer nodes than this.
    pub min_coarse_size: usize,
}

impl Default for CoarseningConfig {
    fn default() -> Self {
        CoarseningConfig {
            alpha: 1e-4,
            max_levels: 20,
            min_coarse_size: 2,
        }
    }
}

impl CoarseningConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(validation(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if self.max_levels < 1 {
            return Err(validation("max_levels must be >= 1"));
        }
        Ok(())
    }
}

/// Sparse row-stochastic interpolation matrix between two adjacent levels.
#[derive(Debug, Clone)]
pub struct Interpolation {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl Interpolation {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col[s..e], &self.val[s..e])
    }

    /// `nu P`: push volumes from the fine level to the coarse level.
    pub fn update_volumes(&self, volumes: &[f64]) -> Vec<f64> {
        debug_assert_eq!(volumes.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[c] += volumes[i] * v;
            }
        }
        out
    }

    /// Column-major (transposed) view: for each coarse node, its fine
    /// supporters in ascending fine-id order.
    fn transpose(&self) -> Interpolation {
        let mut counts = vec![0usize; self.ncols];
        for &c in &self.col {
            counts[c] += 1;
        }
        let mut row_ptr = vec![0usize; self.ncols + 1];
        for c in 0..self.ncols {
            row_ptr[c + 1] = row_ptr[c] + counts[c];
        }
        let mut col = vec![0usize; self.col.len()];
        let mut val = vec![0.0f64; self.col.len()];
        let mut cursor = row_ptr.clone();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                col[cursor[c]] = i;
                val[cursor[c]] = v;
                cursor[c] += 1;
            }
        }
        Interpolation {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col,
            val,
        }
    }
}

/// Greedy selection scan. The first node in `order` is always selected;
/// each later node joins iff its maximum weight to the already-selected set
/// stays within `alpha` times its full row sum.
pub fn coarsen_level(w_prev: &SparseGraph, order: &[usize], alpha: f64) -> Vec<usize> {
    let n = w_prev.num_nodes();
    debug_assert_eq!(order.len(), n);
    let mut selected_mask = vec![false; n];
    let mut selected = Vec::new();
    for (pos, &node) in order.iter().enumerate() {
        if pos == 0 {
            selected_mask[node] = true;
            selected.push(node);
            continue;
        }
        let (cols, ws) = w_prev.row(node);
        let mut max_to_selected = 0.0f64;
        for (&j, &w) in cols.iter().zip(ws) {
            if selected_mask[j] && w > max_to_selected {
                max_to_selected = w;
            }
        }
        if max_to_selected <= alpha * w_prev.degree(node) {
            selected_mask[node] = true;
            selected.push(node);
        }
    }
    selected
}

/// Build `P` for the given coarse subset (columns follow the subset order):
/// identity rows for coarse nodes, weight-normalized rows for fine nodes.
pub fn interpolation_matrix(w_prev: &SparseGraph, coarse: &[usize]) -> Result<Interpolation> {
    let n = w_prev.num_nodes();
    let mut coarse_index = vec![usize::MAX; n];
    for (c, &node) in coarse.iter().enumerate() {
        if coarse_index[node] != usize::MAX {
            return Err(Error::Internal(format!(
                "node {node} appears twice in the coarse subset"
            )));
        }
        coarse_index[node] = c;
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col = Vec::new();
    let mut val = Vec::new();
    row_ptr.push(0);
    for i in 0..n {
        if coarse_index[i] != usize::MAX {
            col.push(coarse_index[i]);
            val.push(1.0);
        } else {
            let (cols, ws) = w_prev.row(i);
            let mut entries: Vec<(usize, f64)> = cols
                .iter()
                .zip(ws)
                .filter(|(&j, _)| coarse_index[j] != usize::MAX)
                .map(|(&j, &w)| (coarse_index[j], w))
                .collect();
            let denom: f64 = entries.iter().map(|e| e.1).sum();
            if denom <= 0.0 {
                return Err(Error::Internal(format!(
                    "node {i} has no weight to the coarse set; it should have been selected"
                )));
            }
            entries.sort_unstable_by_key(|e| e.0);
            for (c, w) in entries {
                col.push(c);
                val.push(w / denom);
            }
        }
        row_ptr.push(col.len());
    }
    Ok(Interpolation {
        nrows: n,
        ncols: coarse.len(),
        row_ptr,
        col,
        val,
    })
}

/// `P^T W P` with symmetric assembly. Returns the cleaned coarse graph
/// (zero diagonal, entries below 1e-14 dropped) and the total weight
/// `1^T (P^T W P) 1` before cleanup, for conservation diagnostics.
pub(crate) fn galerkin_product(w: &SparseGraph, p: &Interpolation) -> Result<(SparseGraph, f64)> {
    let nf = w.num_nodes();
    let nc = p.ncols();
    if p.nrows() != nf {
        return Err(validation(format!(
            "interpolation has {} rows but the graph has {} nodes",
            p.nrows(),
            nf
        )));
    }
    const DROP_TOL: f64 = 1e-14;

    // Phase 1: rows of A = W P.
    let a_rows: Vec<(Vec<usize>, Vec<f64>)> = par::map_range(nf, |i| {
        let mut acc = vec![0.0f64; nc];
        let mut touched: Vec<usize> = Vec::new();
        let (cols, ws) = w.row(i);
        for (&j, &wij) in cols.iter().zip(ws) {
            let (pc, pv) = p.row(j);
            for (&c, &v) in pc.iter().zip(pv) {
                if acc[c] == 0.0 {
                    touched.push(c);
                }
                acc[c] += wij * v;
            }
        }
        touched.sort_unstable();
        let vals: Vec<f64> = touched.iter().map(|&c| acc[c]).collect();
        (touched, vals)
    });

    // Phase 2: rows of P^T A; emit the upper triangle and mirror so the
    // result is exactly symmetric.
    let pt = p.transpose();
    let coarse_rows: Vec<(Vec<(usize, f64)>, f64)> = par::map_range(nc, |c| {
        let mut acc = vec![0.0f64; nc];
        let mut touched: Vec<usize> = Vec::new();
        let (fines, pvals) = pt.row(c);
        for (&i, &pic) in fines.iter().zip(pvals) {
            let (ac, av) = &a_rows[i];
            for (&c2, &v) in ac.iter().zip(av) {
                if acc[c2] == 0.0 {
                    touched.push(c2);
                }
                acc[c2] += pic * v;
            }
        }
        touched.sort_unstable();
        let row_total: f64 = touched.iter().map(|&c2| acc[c2]).sum();
        let upper: Vec<(usize, f64)> = touched
            .iter()
            .filter(|&&c2| c2 > c && acc[c2] >= DROP_TOL)
            .map(|&c2| (c2, acc[c2]))
            .collect();
        (upper, row_total)
    });

    let pre_cleanup_weight: f64 = coarse_rows.iter().map(|r| r.1).sum();
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (c, (upper, _)) in coarse_rows.into_iter().enumerate() {
        for (c2, v) in upper {
            edges.push((c, c2, v));
        }
    }
    let graph = SparseGraph::from_edges(nc, &edges)?;
    Ok((graph, pre_cleanup_weight))
}

/// The coarse affinity `P^T W P`, diagonal zeroed and tiny fill dropped.
pub fn galerkin_coarse_affinity(w_prev: &SparseGraph, p: &Interpolation) -> Result<SparseGraph> {
    Ok(galerkin_product(w_prev, p)?.0)
}

/// Permutation of node ids by descending volume, ties by ascending id.
pub fn volume_ordering(volumes: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..volumes.len()).collect();
    order.sort_by(|&a, &b| volumes[b].total_cmp(&volumes[a]).then(a.cmp(&b)));
    order
}

/// One coarsening step: selection, interpolation, coarse affinity, volumes.
#[derive(Debug, Clone)]
pub struct CoarseLevel {
    /// Selected nodes as indices into the previous level, in selection order.
    pub selected: Vec<usize>,
    pub interp: Interpolation,
    pub graph: SparseGraph,
    /// Volumes of this level's nodes (`nu_l = nu_{l-1} P_l`).
    pub volumes: Vec<f64>,
    /// Original (level-0) node id of each coarse node.
    pub to_original: Vec<usize>,
    /// `1^T (P^T W P) 1` before diagonal removal, for conservation checks.
    pub pre_cleanup_weight: f64,
}

/// The full hierarchy. Level 0 is the input graph itself (not stored);
/// levels `1..=kappa` hold the coarsening steps.
#[derive(Debug, Clone)]
pub struct CoarseHierarchy {
    n0: usize,
    levels: Vec<CoarseLevel>,
}

impl CoarseHierarchy {
    /// Number of levels including level 0.
    pub fn num_levels(&self) -> usize {
        self.levels.len() + 1
    }

    /// Number of coarsening steps (kappa).
    pub fn num_coarse_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level_size(&self, level: usize) -> usize {
        if level == 0 {
            self.n0
        } else {
            self.levels[level - 1].graph.num_nodes()
        }
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        (0..self.num_levels()).map(|l| self.level_size(l)).collect()
    }

    /// Coarsening step `level` (1-based).
    pub fn coarse_level(&self, level: usize) -> &CoarseLevel {
        &self.levels[level - 1]
    }

    pub fn levels(&self) -> &[CoarseLevel] {
        &self.levels
    }

    /// Original node ids of the nodes at `level` (identity at level 0).
    pub fn original_ids(&self, level: usize) -> Vec<usize> {
        if level == 0 {
            (0..self.n0).collect()
        } else {
            self.levels[level - 1].to_original.clone()
        }
    }
}

/// Coarsen recursively until the level shrinks below `min_coarse_size`,
/// selection stops making progress, or `max_levels` is reached.
pub fn build_hierarchy(w_alg: &SparseGraph, cfg: &CoarseningConfig) -> Result<CoarseHierarchy> {
    cfg.validate()?;
    let n0 = w_alg.num_nodes();
    if n0 == 0 {
        return Err(validation("cannot coarsen an empty graph"));
    }
    let mut levels: Vec<CoarseLevel> = Vec::new();
    let mut volumes = vec![1.0f64; n0];
    let mut to_original: Vec<usize> = (0..n0).collect();
    loop {
        if levels.len() >= cfg.max_levels {
            break;
        }
        let parent: &SparseGraph = match levels.last() {
            None => w_alg,
            Some(l) => &l.graph,
        };
        let order = volume_ordering(&volumes);
        let selected = coarsen_level(parent, &order, cfg.alpha);
        if selected.len() == parent.num_nodes() {
            break; // no progress; nothing recorded
        }
        let interp = interpolation_matrix(parent, &selected)?;
        let (graph, pre_cleanup_weight) = galerkin_product(parent, &interp)?;
        let new_volumes = interp.update_volumes(&volumes);
        let new_to_original: Vec<usize> = selected.iter().map(|&i| to_original[i]).collect();
        let size = graph.num_nodes();
        levels.push(CoarseLevel {
            selected,
            interp,
            graph,
            volumes: new_volumes.clone(),
            to_original: new_to_original.clone(),
            pre_cleanup_weight,
        });
        volumes = new_volumes;
        to_original = new_to_original;
        if size < cfg.min_coarse_size {
            break;
        }
    }
    Ok(CoarseHierarchy { n0, levels })
}
