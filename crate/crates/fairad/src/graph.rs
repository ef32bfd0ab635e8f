//! Sparse symmetric graph representation, degree/Laplacian views,
//! connectivity preprocessing, and edge-list file I/O.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{validation, Error, Result};

/// Undirected weighted graph stored as symmetric CSR.
///
/// Invariants: the adjacency is symmetric with a zero diagonal, every stored
/// weight is strictly positive, and `degrees[i]` is the row sum of row `i`.
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct SparseGraph {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
}

impl SparseGraph {
    /// Build a graph from undirected edge triples `(u, v, w)`.
    ///
    /// Duplicate edges (in either orientation) are summed; self-loops are
    /// dropped. Weights must be finite and strictly positive.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Ok(Self::assemble(n, edges)?.0)
    }

    /// Like [`SparseGraph::from_edges`], additionally reporting how many
    /// self-loop rows were dropped.
    pub(crate) fn assemble(n: usize, edges: &[(usize, usize, f64)]) -> Result<(Self, usize)> {
        let mut self_loops = 0usize;
        let mut counts = vec![0usize; n];
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(validation(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(validation(format!("edge ({u}, {v}) has weight {w}; weights must be finite and > 0")));
            }
            if u == v {
                self_loops += 1;
            } else {
                counts[u] += 1;
                counts[v] += 1;
            }
        }

        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let nnz = row_ptr[n];
        let mut col = vec![0usize; nnz];
        let mut weights = vec![0.0f64; nnz];
        let mut cursor = row_ptr.clone();
        for &(u, v, w) in edges {
            if u == v {
                continue;
            }
            col[cursor[u]] = v;
            weights[cursor[u]] = w;
            cursor[u] += 1;
            col[cursor[v]] = u;
            weights[cursor[v]] = w;
            cursor[v] += 1;
        }

        // Sort each row by column and merge duplicates in place.
        let mut write = 0usize;
        let mut new_row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            let (start, end) = (row_ptr[i], row_ptr[i + 1]);
            let mut entries: Vec<(usize, f64)> = (start..end).map(|k| (col[k], weights[k])).collect();
            entries.sort_unstable_by_key(|e| e.0);
            new_row_ptr[i] = write;
            let mut iter = entries.into_iter();
            if let Some((mut c, mut w)) = iter.next() {
                for (c2, w2) in iter {
                    if c2 == c {
                        w += w2;
                    } else {
                        col[write] = c;
                        weights[write] = w;
                        write += 1;
                        c = c2;
                        w = w2;
                    }
                }
                col[write] = c;
                weights[write] = w;
                write += 1;
            }
        }
        new_row_ptr[n] = write;
        col.truncate(write);
        weights.truncate(write);

        let mut g = SparseGraph {
            n,
            row_ptr: new_row_ptr,
            col,
            weights,
            degrees: Vec::new(),
        };
        g.degrees = g.row_sums();
        Ok((g, self_loops))
    }

    /// Construct directly from CSR arrays. Callers must provide a symmetric
    /// pattern with zero diagonal and positive weights; `debug_assert`ed.
    pub(crate) fn from_csr(n: usize, row_ptr: Vec<usize>, col: Vec<usize>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(row_ptr.len(), n + 1);
        debug_assert_eq!(*row_ptr.last().unwrap(), col.len());
        debug_assert_eq!(col.len(), weights.len());
        let mut g = SparseGraph {
            n,
            row_ptr,
            col,
            weights,
            degrees: Vec::new(),
        };
        g.degrees = g.row_sums();
        g
    }

    fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.weights[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum())
            .collect()
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.col.len() / 2
    }

    /// Number of stored entries (twice the edge count).
    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    /// Neighbor ids and weights of row `i`, sorted by neighbor id.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col[s..e], &self.weights[s..e])
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Sum of all stored entries, i.e. `1^T W 1` (each edge counted twice).
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `y = W x` with a fixed (row-major) summation order.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.weights[k] * x[self.col[k]];
            }
            y[i] = acc;
        }
    }

    /// Undirected edges as `(u, v, w)` with `u < v`, ascending.
    pub fn edge_iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, ws) = self.row(i);
            cols.iter()
                .zip(ws)
                .filter(move |(&j, _)| i < j)
                .map(move |(&j, &w)| (i, j, w))
        })
    }

    /// Induced subgraph on `keep` (ascending original ids); node `t` of the
    /// result is `keep[t]`.
    pub fn induced_subgraph(&self, keep: &[usize]) -> SparseGraph {
        debug_assert!(keep.windows(2).all(|w| w[0] < w[1]));
        let mut new_of_old = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            new_of_old[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        let mut col = Vec::new();
        let mut weights = Vec::new();
        row_ptr.push(0);
        for &old in keep {
            let (cols, ws) = self.row(old);
            for (&j, &w) in cols.iter().zip(ws) {
                if new_of_old[j] != usize::MAX {
                    col.push(new_of_old[j]);
                    weights.push(w);
                }
            }
            row_ptr.push(col.len());
        }
        SparseGraph::from_csr(keep.len(), row_ptr, col, weights)
    }

    /// Check structural invariants (symmetry, zero diagonal, positive
    /// weights, degree consistency). Intended for tests and debugging.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.n {
            let (cols, ws) = self.row(i);
            for (&j, &w) in cols.iter().zip(ws) {
                if j == i {
                    return Err(Error::Internal(format!("diagonal entry at node {i}")));
                }
                if w <= 0.0 || !w.is_finite() {
                    return Err(Error::Internal(format!("nonpositive weight on edge ({i}, {j})")));
                }
                let (jc, jw) = self.row(j);
                match jc.binary_search(&i) {
                    Ok(p) if jw[p] == w => {}
                    _ => {
                        return Err(Error::Internal(format!("asymmetry at edge ({i}, {j})")));
                    }
                }
            }
            let sum: f64 = ws.iter().sum();
            let scale = sum.abs().max(1.0);
            if (sum - self.degrees[i]).abs() > 1e-12 * scale {
                return Err(Error::Internal(format!("degree mismatch at node {i}")));
            }
        }
        Ok(())
    }
}

/// Result of [`load_edge_list`].
#[derive(Debug)]
pub struct EdgeListLoad {
    pub graph: SparseGraph,
    /// Number of self-loop rows that were dropped.
    pub self_loops_dropped: usize,
}

/// Load an undirected graph from a delimited edge list.
///
/// Rows are `u v` or `u v w` with 0-based integer ids and `w > 0`
/// (default 1.0). Lines starting with `#` are comments; a `# nodes: N`
/// directive sets a minimum node count so isolated trailing nodes survive a
/// save/load round trip. Duplicate edges are summed and self-loops dropped.
pub fn load_edge_list(path: impl AsRef<Path>, delimiter: char) -> Result<EdgeListLoad> {
    let text = fs::read_to_string(path.as_ref())?;
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut min_nodes = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(rest) = comment.trim().strip_prefix("nodes:") {
                if let Ok(n) = rest.trim().parse::<usize>() {
                    min_nodes = min_nodes.max(n);
                }
            }
            continue;
        }
        let fields: Vec<&str> = if delimiter == ' ' {
            line.split_whitespace().collect()
        } else {
            line.split(delimiter).map(str::trim).collect()
        };
        if fields.len() != 2 && fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 2 or 3 fields, found {}", fields.len()),
            });
        }
        let parse_id = |s: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid node id '{s}'"),
            })
        };
        let u = parse_id(fields[0])?;
        let v = parse_id(fields[1])?;
        let w = if fields.len() == 3 {
            let w: f64 = fields[2].parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid weight '{}'", fields[2]),
            })?;
            if !w.is_finite() || w <= 0.0 {
                return Err(validation(format!(
                    "line {line_no}: weight {w} must be finite and > 0"
                )));
            }
            w
        } else {
            1.0
        };
        edges.push((u, v, w));
    }
    let n = edges
        .iter()
        .map(|&(u, v, _)| u.max(v) + 1)
        .max()
        .unwrap_or(0)
        .max(min_nodes);
    let (graph, self_loops_dropped) = SparseGraph::assemble(n, &edges)?;
    Ok(EdgeListLoad {
        graph,
        self_loops_dropped,
    })
}

/// Write a graph as a delimited edge list (one row per undirected edge,
/// ascending), with a `# nodes: N` directive so the round trip is exact.
pub fn save_edge_list(g: &SparseGraph, path: impl AsRef<Path>, delimiter: char) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# nodes: {}", g.num_nodes()).expect("string write");
    for (u, v, w) in g.edge_iter() {
        writeln!(out, "{u}{delimiter}{v}{delimiter}{w}").expect("string write");
    }
    fs::write(path.as_ref(), out)?;
    Ok(())
}

/// Restrict `g` to its largest connected component.
///
/// Returns the induced subgraph and the ascending list of original node ids
/// (`old_ids[new] = old`). Ties between components are broken toward the one
/// containing the smallest node id.
pub fn largest_connected_component(g: &SparseGraph) -> (SparseGraph, Vec<usize>) {
    let n = g.num_nodes();
    if n == 0 {
        return (g.clone(), Vec::new());
    }
    let mut comp = vec![usize::MAX; n];
    let mut best: (usize, usize) = (0, 0); // (size, representative component id)
    let mut ncomp = 0usize;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = ncomp;
        ncomp += 1;
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(u) = queue.pop_front() {
            size += 1;
            let (cols, _) = g.row(u);
            for &v in cols {
                if comp[v] == usize::MAX {
                    comp[v] = id;
                    queue.push_back(v);
                }
            }
        }
        // Strict '>' keeps the earlier component (smaller min id) on ties.
        if size > best.0 {
            best = (size, id);
        }
    }
    let old_ids: Vec<usize> = (0..n).filter(|&u| comp[u] == best.1).collect();
    (g.induced_subgraph(&old_ids), old_ids)
}

/// Per-node degrees `d_i = sum_j W_{i,j}`; isolated nodes yield 0.
pub fn degree_vector(g: &SparseGraph) -> Vec<f64> {
    g.degrees().to_vec()
}

/// Operator view of `D^{-1/2} (D - W) D^{-1/2}` over a [`SparseGraph`].
pub struct NormalizedLaplacian<'a> {
    graph: &'a SparseGraph,
    inv_sqrt_deg: Vec<f64>,
}

impl<'a> NormalizedLaplacian<'a> {
    /// Fails with [`Error::ZeroDegree`] if any node is isolated.
    pub fn new(graph: &'a SparseGraph) -> Result<Self> {
        let mut inv_sqrt_deg = Vec::with_capacity(graph.num_nodes());
        for (i, &d) in graph.degrees().iter().enumerate() {
            if d <= 0.0 {
                return Err(Error::ZeroDegree(i));
            }
            inv_sqrt_deg.push(1.0 / d.sqrt());
        }
        Ok(NormalizedLaplacian { graph, inv_sqrt_deg })
    }

    pub fn dim(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn inv_sqrt_degrees(&self) -> &[f64] {
        &self.inv_sqrt_deg
    }

    /// `y = x - D^{-1/2} W D^{-1/2} x`, never materializing a dense matrix.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = self.graph;
        let s = &self.inv_sqrt_deg;
        for i in 0..g.n {
            let mut acc = 0.0;
            for k in g.row_ptr[i]..g.row_ptr[i + 1] {
                let j = g.col[k];
                acc += g.weights[k] * s[j] * x[j];
            }
            y[i] = x[i] - s[i] * acc;
        }
    }

    /// Dense materialization; used by the small-graph spectral path.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
            let (cols, ws) = self.graph.row(i);
            for (&j, &w) in cols.iter().zip(ws) {
                m[(i, j)] = -w * self.inv_sqrt_deg[i] * self.inv_sqrt_deg[j];
            }
        }
        m
    }
}

impl crate::eigen::SymOp for NormalizedLaplacian<'_> {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        NormalizedLaplacian::apply(self, x, y);
    }
}

/// `D^{-1/2} (D - W) D^{-1/2} x` as a one-shot call.
pub fn normalized_laplacian_apply(g: &SparseGraph, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != g.num_nodes() {
        return Err(validation(format!(
            "vector length {} does not match node count {}",
            x.len(),
            g.num_nodes()
        )));
    }
    let op = NormalizedLaplacian::new(g)?;
    let mut y = vec![0.0; x.len()];
    op.apply(x, &mut y);
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_path_graph() {
        let f = write_temp("0 1\n1 2\n");
        let load = load_edge_list(f.path(), ' ').unwrap();
        let g = &load.graph;
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.degrees(), &[1.0, 2.0, 1.0]);
        assert_eq!(load.self_loops_dropped, 0);
        g.validate().unwrap();
    }

    #[test]
    fn duplicate_rows_sum() {
        let f = write_temp("0 1 2.0\n1 0 3.0\n");
        let g = load_edge_list(f.path(), ' ').unwrap().graph;
        assert_eq!(g.num_edges(), 1);
        let (cols, ws) = g.row(0);
        assert_eq!(cols, &[1]);
        assert_eq!(ws, &[5.0]);
        let (cols, ws) = g.row(1);
        assert_eq!(cols, &[0]);
        assert_eq!(ws, &[5.0]);
    }

    #[test]
    fn self_loops_dropped_with_count() {
        let f = write_temp("0 0 1.0\n");
        let load = load_edge_list(f.path(), ' ').unwrap();
        assert_eq!(load.graph.num_nodes(), 1);
        assert_eq!(load.graph.num_edges(), 0);
        assert_eq!(load.self_loops_dropped, 1);
    }

    #[test]
    fn malformed_row_reports_line() {
        let f = write_temp("0 1\nnot an edge row\n");
        match load_edge_list(f.path(), ' ') {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn negative_weight_rejected() {
        let f = write_temp("0 1 -2.0\n");
        match load_edge_list(f.path(), ' ') {
            Err(Error::Validation(_)) => {}
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_nodes_directive() {
        let f = write_temp("# nodes: 5\n# a comment\n\n0 1\n");
        let g = load_edge_list(f.path(), ' ').unwrap().graph;
        assert_eq!(g.num_nodes(), 5);
        assert_eq!(g.degrees(), &[1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn tab_delimited() {
        let f = write_temp("0\t1\t2.5\n");
        let g = load_edge_list(f.path(), '\t').unwrap().graph;
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.row(0).1, &[2.5]);
    }

    #[test]
    fn save_load_round_trip() {
        let g = SparseGraph::from_edges(
            5,
            &[(0, 1, 0.125), (1, 2, 3.0), (2, 3, 0.1), (0, 3, 7.25)],
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_edge_list(&g, f.path(), '\t').unwrap();
        let g2 = load_edge_list(f.path(), '\t').unwrap().graph;
        assert_eq!(g2.num_nodes(), g.num_nodes());
        let e1: Vec<_> = g.edge_iter().collect();
        let e2: Vec<_> = g2.edge_iter().collect();
        assert_eq!(e1, e2);
    }

    #[test]
    fn degree_examples() {
        let tri = SparseGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        assert_eq!(degree_vector(&tri), vec![2.0, 2.0, 2.0]);
        let single = SparseGraph::from_edges(2, &[(0, 1, 3.0)]).unwrap();
        assert_eq!(degree_vector(&single), vec![3.0, 3.0]);
        let empty = SparseGraph::from_edges(2, &[]).unwrap();
        assert_eq!(degree_vector(&empty), vec![0.0, 0.0]);
    }

    #[test]
    fn lcc_two_triangles_tie_break() {
        let g = SparseGraph::from_edges(
            6,
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (0, 2, 1.0),
                (3, 4, 1.0),
                (4, 5, 1.0),
                (3, 5, 1.0),
            ],
        )
        .unwrap();
        let (lcc, old_ids) = largest_connected_component(&g);
        assert_eq!(lcc.num_nodes(), 3);
        assert_eq!(old_ids, vec![0, 1, 2]);
    }

    #[test]
    fn lcc_connected_is_identity() {
        let g = SparseGraph::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let (lcc, old_ids) = largest_connected_component(&g);
        assert_eq!(lcc.num_nodes(), 4);
        assert_eq!(old_ids, vec![0, 1, 2, 3]);
        let e1: Vec<_> = g.edge_iter().collect();
        let e2: Vec<_> = lcc.edge_iter().collect();
        assert_eq!(e1, e2);
    }

    #[test]
    fn lcc_drops_isolated_node() {
        let g = SparseGraph::from_edges(
            6,
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)],
        )
        .unwrap();
        let (lcc, old_ids) = largest_connected_component(&g);
        assert_eq!(lcc.num_nodes(), 5);
        assert_eq!(old_ids, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn laplacian_kernel_vector() {
        let g = SparseGraph::from_edges(4, &[(0, 1, 2.0), (1, 2, 1.0), (2, 3, 4.0), (0, 3, 0.5)])
            .unwrap();
        let x: Vec<f64> = g.degrees().iter().map(|d| d.sqrt()).collect();
        let y = normalized_laplacian_apply(&g, &x).unwrap();
        let norm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let xnorm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= 1e-10 * xnorm, "kernel residual {norm}");
    }

    #[test]
    fn laplacian_two_node_hand_value() {
        let g = SparseGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let y = normalized_laplacian_apply(&g, &[1.0, -1.0]).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-12);
        assert!((y[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_matches_dense_oracle() {
        // Dense oracle assembled straight from the edge list, independent of
        // the CSR apply path.
        let edges = [
            (0, 1, 0.7),
            (1, 2, 1.3),
            (2, 3, 0.2),
            (3, 4, 2.0),
            (4, 5, 0.9),
            (5, 6, 1.1),
            (6, 7, 0.4),
            (0, 7, 0.6),
            (2, 5, 1.5),
            (1, 6, 0.8),
        ];
        let n = 8;
        let g = SparseGraph::from_edges(n, &edges).unwrap();
        let mut dense = vec![vec![0.0f64; n]; n];
        let mut deg = vec![0.0f64; n];
        for &(u, v, w) in &edges {
            dense[u][v] += w;
            dense[v][u] += w;
            deg[u] += w;
            deg[v] += w;
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut expected = vec![0.0f64; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                let lij = if i == j { deg[i] } else { 0.0 } - dense[i][j];
                acc += lij / (deg[i].sqrt() * deg[j].sqrt()) * x[j];
            }
            expected[i] = acc;
        }
        let y = normalized_laplacian_apply(&g, &x).unwrap();
        for i in 0..n {
            assert!((y[i] - expected[i]).abs() < 1e-10, "mismatch at {i}");
        }
    }

    #[test]
    fn laplacian_zero_degree_names_node() {
        let g = SparseGraph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        match normalized_laplacian_apply(&g, &[1.0, 1.0, 1.0]) {
            Err(Error::ZeroDegree(2)) => {}
            other => panic!("expected zero-degree error for node 2, got {other:?}"),
        }
    }
}
