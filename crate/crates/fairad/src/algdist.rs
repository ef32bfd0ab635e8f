//! Fairness-constrained test vectors and the algebraic-distance affinity.
//!
//! Each test vector starts random and is smoothed by a Jacobi relaxation
//! that re-imposes the fairness constraints at every step: the constrained
//! step is the saddle-point system `D x = W x_prev` subject to `F^T x = 0`,
//! and one Uzawa iteration with a large penalty `mu` reduces it to
//! `x = (D + mu F F^T)^{-1} W x_prev`. The diagonal-plus-low-rank inverse is
//! applied through the Woodbury identity, so every step costs one sparse
//! mat-vec plus `O(n h)` dense work.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::error::{validation, Error, Result};
use crate::fairness::FairnessMatrix;
use crate::graph::SparseGraph;
use crate::par;
use crate::seeds::substream_rng;

/// Parameters of the constrained relaxation.
#[derive(Debug, Clone)]
pub struct RelaxationConfig {
    /// Number of test vectors (R).
    pub num_vectors: usize,
    /// Jacobi iterations per vector (tau).
    pub iterations: usize,
    /// Constraint penalty; must be >> 1 for tight constraint satisfaction.
    pub mu: f64,
    /// Distance-scaling exponent of the affinity weights.
    pub beta: f64,
    pub seed: u64,
}

impl RelaxationConfig {
    /// Paper-style defaults: R = 10, tau = 10, mu = 1e9, beta = n / ln n.
    pub fn for_graph(n: usize, seed: u64) -> Self {
        RelaxationConfig {
            num_vectors: 10,
            iterations: 10,
            mu: 1e9,
            beta: default_beta(n),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_vectors < 1 {
            return Err(validation("need at least one test vector"));
        }
        if self.iterations < 1 {
            return Err(validation("need at least one relaxation iteration"));
        }
        if !(self.mu > 0.0) {
            return Err(validation(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.beta > 0.0) {
            return Err(validation(format!("beta must be > 0, got {}", self.beta)));
        }
        Ok(())
    }
}

/// `n / ln n`, guarded for tiny graphs.
pub fn default_beta(n: usize) -> f64 {
    if n >= 3 {
        n as f64 / (n as f64).ln()
    } else {
        1.0
    }
}

/// Applies `(D + mu F F^T)^{-1}` via the Woodbury identity.
///
/// The inner matrix `(1/mu) I + F^T D^{-1} F` is `(h-1) x (h-1)`; its
/// Cholesky factor is computed once and reused for every application.
pub struct WoodburySolver<'a> {
    d_inv: Vec<f64>,
    fairness: &'a FairnessMatrix,
    mu: f64,
    inner: Option<Cholesky<f64, Dyn>>,
}

impl<'a> WoodburySolver<'a> {
    pub fn new(degrees: &[f64], fairness: &'a FairnessMatrix, mu: f64) -> Result<Self> {
        if degrees.len() != fairness.num_nodes() {
            return Err(validation(format!(
                "degree vector has length {} but F has {} rows",
                degrees.len(),
                fairness.num_nodes()
            )));
        }
        if !(mu >= 0.0) {
            return Err(validation(format!("mu must be >= 0, got {mu}")));
        }
        let mut d_inv = Vec::with_capacity(degrees.len());
        for (i, &d) in degrees.iter().enumerate() {
            if d <= 0.0 {
                return Err(Error::ZeroDegree(i));
            }
            d_inv.push(1.0 / d);
        }
        let cols = fairness.num_constraints();
        let inner = if mu > 0.0 && cols > 0 {
            let f = fairness.matrix();
            let mut ftdf = DMatrix::zeros(cols, cols);
            for a in 0..cols {
                for b in a..cols {
                    let mut acc = 0.0;
                    for i in 0..degrees.len() {
                        acc += f[(i, a)] * d_inv[i] * f[(i, b)];
                    }
                    ftdf[(a, b)] = acc;
                    ftdf[(b, a)] = acc;
                }
            }
            for a in 0..cols {
                ftdf[(a, a)] += 1.0 / mu;
            }
            match Cholesky::new(ftdf) {
                Some(c) => Some(c),
                None => {
                    return Err(Error::Numerical(
                        "inner Woodbury matrix is not positive definite (is F rank deficient?)"
                            .into(),
                    ))
                }
            }
        } else {
            None
        };
        Ok(WoodburySolver {
            d_inv,
            fairness,
            mu: mu.max(0.0),
            inner,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `(D + mu F F^T)^{-1} b`.
    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = b.iter().zip(&self.d_inv).map(|(&bi, &di)| bi * di).collect();
        if let Some(chol) = &self.inner {
            // x -= D^{-1} F (inner)^{-1} F^T D^{-1} b
            let s = self.fairness.transpose_apply(&x);
            let y: DVector<f64> = chol.solve(&s);
            let mut fy = vec![0.0; x.len()];
            self.fairness.apply_add(&y, &mut fy);
            for i in 0..x.len() {
                x[i] -= self.d_inv[i] * fy[i];
            }
        }
        x
    }
}

/// `(D + mu F F^T)^{-1} b` as a one-shot call; `d` is the degree vector.
pub fn woodbury_apply(d: &[f64], fairness: &FairnessMatrix, mu: f64, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != d.len() {
        return Err(validation(format!(
            "rhs has length {} but the degree vector has {}",
            b.len(),
            d.len()
        )));
    }
    Ok(WoodburySolver::new(d, fairness, mu)?.apply(b))
}

/// Relaxed test vectors, one column per vector.
#[derive(Debug, Clone)]
pub struct TestVectorSet {
    vectors: Vec<Vec<f64>>,
    n: usize,
}

impl TestVectorSet {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let n = vectors.first().map_or(0, Vec::len);
        if vectors.is_empty() || n == 0 {
            return Err(validation("test vector set must be nonempty"));
        }
        if vectors.iter().any(|v| v.len() != n) {
            return Err(validation("test vectors must share one length"));
        }
        Ok(TestVectorSet { vectors, n })
    }

    pub fn num_vectors(&self) -> usize {
        self.vectors.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn vector(&self, r: usize) -> &[f64] {
        &self.vectors[r]
    }

    /// Algebraic distance `s(i, j) = max_r |x_{r,i} - x_{r,j}|`.
    pub fn algebraic_distance(&self, i: usize, j: usize) -> f64 {
        self.vectors
            .iter()
            .map(|v| (v[i] - v[j]).abs())
            .fold(0.0, f64::max)
    }
}

fn jacobi_sweep(
    g: &SparseGraph,
    solver: &WoodburySolver<'_>,
    iterations: usize,
    mut x: Vec<f64>,
) -> Result<Vec<f64>> {
    let n = g.num_nodes();
    let mut b = vec![0.0; n];
    for t in 1..=iterations {
        g.matvec(&x, &mut b);
        x = solver.apply(&b);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite test vector entry at relaxation iteration {t}"
            )));
        }
    }
    Ok(x)
}

/// Run the constrained Jacobi relaxation from an explicit start vector.
pub fn constrained_jacobi_from(
    g: &SparseGraph,
    fairness: &FairnessMatrix,
    mu: f64,
    iterations: usize,
    x0: Vec<f64>,
) -> Result<Vec<f64>> {
    if x0.len() != g.num_nodes() {
        return Err(validation(format!(
            "start vector has length {} but the graph has {} nodes",
            x0.len(),
            g.num_nodes()
        )));
    }
    let solver = WoodburySolver::new(g.degrees(), fairness, mu)?;
    jacobi_sweep(g, &solver, iterations, x0)
}

fn random_start(n: usize, seed: u64, r: usize) -> Vec<f64> {
    let mut rng = substream_rng(seed, "testvec", r as u64);
    (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
}

/// Test vector `r`: random start in `[-0.5, 0.5]^n` from the `(seed, r)`
/// sub-stream, then `tau` constrained Jacobi steps.
pub fn constrained_jacobi(
    g: &SparseGraph,
    fairness: &FairnessMatrix,
    cfg: &RelaxationConfig,
    r: usize,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let x0 = random_start(g.num_nodes(), cfg.seed, r);
    constrained_jacobi_from(g, fairness, cfg.mu, cfg.iterations, x0)
}

/// Compute all R test vectors. The Woodbury factorization is built once and
/// shared; vectors are independent and run in parallel.
pub fn relax_test_vectors(
    g: &SparseGraph,
    fairness: &FairnessMatrix,
    cfg: &RelaxationConfig,
) -> Result<TestVectorSet> {
    cfg.validate()?;
    if fairness.num_nodes() != g.num_nodes() {
        return Err(validation(format!(
            "fairness matrix covers {} nodes but the graph has {}",
            fairness.num_nodes(),
            g.num_nodes()
        )));
    }
    let solver = WoodburySolver::new(g.degrees(), fairness, cfg.mu)?;
    let vectors = par::try_map_range(cfg.num_vectors, |r| {
        let x0 = random_start(g.num_nodes(), cfg.seed, r);
        jacobi_sweep(g, &solver, cfg.iterations, x0)
    })?;
    TestVectorSet::new(vectors)
}

/// Graph reweighted by `exp(-beta * s(i, j))` on the original edge set.
#[derive(Debug, Clone)]
pub struct AlgebraicAffinity {
    graph: SparseGraph,
    beta: f64,
}

impl AlgebraicAffinity {
    pub fn graph(&self) -> &SparseGraph {
        &self.graph
    }

    pub fn into_graph(self) -> SparseGraph {
        self.graph
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Reweight every edge of `g` by the scaled algebraic distance. Non-edges
/// stay non-edges: with `beta = n / ln n` the off-edge weights are
/// numerically negligible and keeping the pattern preserves sparsity.
pub fn build_algebraic_affinity(
    g: &SparseGraph,
    tv: &TestVectorSet,
    beta: f64,
) -> Result<AlgebraicAffinity> {
    if !(beta > 0.0) {
        return Err(validation(format!("beta must be > 0, got {beta}")));
    }
    if tv.num_nodes() != g.num_nodes() {
        return Err(validation(format!(
            "test vectors cover {} nodes but the graph has {}",
            tv.num_nodes(),
            g.num_nodes()
        )));
    }
    let n = g.num_nodes();
    let rows: Vec<(Vec<usize>, Vec<f64>)> = par::map_range(n, |i| {
        let (cols, _) = g.row(i);
        let weights = cols
            .iter()
            .map(|&j| {
                let s = tv.algebraic_distance(i, j);
                // Floor keeps weights strictly positive when beta * s
                // exceeds the exp underflow threshold.
                (-beta * s).exp().max(1e-300)
            })
            .collect();
        (cols.to_vec(), weights)
    });
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col = Vec::with_capacity(g.nnz());
    let mut weights = Vec::with_capacity(g.nnz());
    for (c, w) in rows {
        col.extend_from_slice(&c);
        weights.extend_from_slice(&w);
        row_ptr.push(col.len());
    }
    Ok(AlgebraicAffinity {
        graph: SparseGraph::from_csr(n, row_ptr, col, weights),
        beta,
    })
}
