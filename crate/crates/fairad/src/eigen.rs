//! Symmetric eigensolvers: a dense path for small matrices and a
//! Rayleigh-Ritz iteration with full reorthogonalization and thick restart
//! for large sparse operators (used by the spectral-clustering baseline).

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seeds::substream_rng;

/// Symmetric linear operator, applied without materializing a matrix.
pub(crate) trait SymOp: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

pub(crate) struct EigenPairs {
    #[allow(dead_code)]
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns of an `n x k` matrix.
    pub vectors: DMatrix<f64>,
    /// Achieved residuals `||A v - lambda v||` per pair.
    #[allow(dead_code)]
    pub residuals: Vec<f64>,
    #[allow(dead_code)]
    pub matvecs: usize,
}

/// Flip each column so its largest-magnitude entry is positive. Removes the
/// sign ambiguity of eigenvectors so downstream k-means sees stable input.
fn canonicalize_signs(vectors: &mut DMatrix<f64>) {
    for c in 0..vectors.ncols() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for r in 0..vectors.nrows() {
            let a = vectors[(r, c)].abs();
            if a > best_abs {
                best_abs = a;
                best = r;
            }
        }
        if vectors[(best, c)] < 0.0 {
            for r in 0..vectors.nrows() {
                vectors[(r, c)] = -vectors[(r, c)];
            }
        }
    }
}

/// The `k` smallest eigenpairs of a dense symmetric matrix, eigenvalues
/// ascending, eigenvectors canonicalized.
pub(crate) fn dense_smallest(mat: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = mat.nrows();
    assert!(k <= n, "requested {k} eigenpairs from a {n}x{n} matrix");
    let eig = mat.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, k);
    for (c, &i) in order[..k].iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    canonicalize_signs(&mut vectors);
    (values, vectors)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthogonalize `w` against `basis` twice (classical Gram-Schmidt with
/// reorthogonalization), accumulating the projection coefficients.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>], coeffs: &mut [f64]) {
    for _ in 0..2 {
        for (i, v) in basis.iter().enumerate() {
            let c = dot(w, v);
            coeffs[i] += c;
            for (wj, vj) in w.iter_mut().zip(v) {
                *wj -= c * vj;
            }
        }
    }
}

/// Iteratively compute the `k` smallest eigenpairs of a symmetric operator.
///
/// Builds an orthonormal Krylov-type basis with full reorthogonalization,
/// performs Rayleigh-Ritz extraction, and thick-restarts from the best Ritz
/// vectors until every requested pair satisfies `||A v - lambda v|| <= tol`.
pub(crate) fn smallest_eigenpairs(
    op: &impl SymOp,
    k: usize,
    tol: f64,
    max_matvecs: usize,
    seed: u64,
) -> Result<EigenPairs> {
    let n = op.dim();
    assert!(k >= 1 && k <= n, "need 1 <= k <= n, got k={k}, n={n}");

    let max_dim = n.min((2 * k + 30).max(40));
    let keep = (k + 10).min(max_dim.saturating_sub(2)).max(k);

    let mut rng = substream_rng(seed, "eigensolver", 0);
    let mut random_unit = |basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        // A few attempts in case the draw lands (numerically) inside the span.
        for _ in 0..8 {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let mut scratch = vec![0.0; basis.len()];
            orthogonalize(&mut v, basis, &mut scratch);
            let nv = norm(&v);
            if nv > 1e-8 {
                for x in &mut v {
                    *x /= nv;
                }
                return Some(v);
            }
        }
        None
    };

    let mut basis: Vec<Vec<f64>> = vec![random_unit(&[]).expect("nonzero start vector")];
    let mut h = DMatrix::<f64>::zeros(max_dim, max_dim);
    let mut filled = 0usize;
    let mut matvecs = 0usize;

    loop {
        // Expand the subspace, one operator application per new column.
        while filled < max_dim && filled < basis.len() {
            let j = filled;
            let mut w = vec![0.0; n];
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            let mut coeffs = vec![0.0; basis.len()];
            orthogonalize(&mut w, &basis, &mut coeffs);
            for (i, &c) in coeffs.iter().enumerate() {
                h[(i, j)] = c;
                h[(j, i)] = c;
            }
            filled += 1;
            if basis.len() < max_dim {
                let beta = norm(&w);
                if beta > 1e-12 {
                    for x in &mut w {
                        *x /= beta;
                    }
                    h[(basis.len(), j)] = beta;
                    h[(j, basis.len())] = beta;
                    basis.push(w);
                } else if basis.len() < n {
                    // Invariant subspace hit; continue in a fresh direction.
                    match random_unit(&basis) {
                        Some(v) => basis.push(v),
                        None => break,
                    }
                } else {
                    break;
                }
            }
        }

        // Rayleigh-Ritz extraction on the filled block.
        let m = filled;
        let hm = h.view((0, 0), (m, m)).into_owned();
        let eig = hm.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let ritz_vector = |idx: usize| -> Vec<f64> {
            let z = eig.eigenvectors.column(idx);
            let mut y = vec![0.0; n];
            for (i, v) in basis.iter().enumerate().take(m) {
                let zi = z[i];
                for (yj, vj) in y.iter_mut().zip(v) {
                    *yj += zi * vj;
                }
            }
            let ny = norm(&y);
            for x in &mut y {
                *x /= ny;
            }
            y
        };

        // Explicit residual check on the k smallest Ritz pairs.
        let mut values = Vec::with_capacity(k);
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut residuals = Vec::with_capacity(k);
        let mut worst = 0.0f64;
        for &idx in order.iter().take(k) {
            let theta = eig.eigenvalues[idx];
            let y = ritz_vector(idx);
            let mut ay = vec![0.0; n];
            op.apply(&y, &mut ay);
            matvecs += 1;
            let mut res = 0.0f64;
            for i in 0..n {
                let r = ay[i] - theta * y[i];
                res += r * r;
            }
            let res = res.sqrt();
            worst = worst.max(res);
            values.push(theta);
            vectors.push(y);
            residuals.push(res);
        }

        if worst <= tol {
            let mut mat = DMatrix::zeros(n, k);
            for (c, v) in vectors.iter().enumerate() {
                for (r, &x) in v.iter().enumerate() {
                    mat[(r, c)] = x;
                }
            }
            canonicalize_signs(&mut mat);
            return Ok(EigenPairs {
                values,
                vectors: mat,
                residuals,
                matvecs,
            });
        }
        if m >= n {
            return Err(Error::NoConvergence {
                iters: matvecs,
                residual: worst,
            });
        }
        if matvecs >= max_matvecs {
            return Err(Error::NoConvergence {
                iters: matvecs,
                residual: worst,
            });
        }

        // Thick restart: retain the best Ritz vectors plus one fresh
        // direction; the retained block diagonalizes the projected operator,
        // and the coupling column is recomputed exactly on the next pass.
        let keep_m = keep.min(m.saturating_sub(1)).max(k.min(m));
        let mut new_basis: Vec<Vec<f64>> = Vec::with_capacity(keep_m + 1);
        for (i, &idx) in order.iter().take(keep_m).enumerate() {
            if i < vectors.len() {
                new_basis.push(vectors[i].clone());
            } else {
                new_basis.push(ritz_vector(idx));
            }
        }
        h.fill(0.0);
        for (i, &idx) in order.iter().take(keep_m).enumerate() {
            h[(i, i)] = eig.eigenvalues[idx];
        }
        match random_unit(&new_basis) {
            Some(v) => new_basis.push(v),
            None => {
                return Err(Error::NoConvergence {
                    iters: matvecs,
                    residual: worst,
                })
            }
        }
        basis = new_basis;
        filled = keep_m;
    }
}

#[cfg(test)]
pub(crate) struct DenseOp(pub DMatrix<f64>);

#[cfg(test)]
impl SymOp for DenseOp {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.0[(i, j)] * x[j];
            }
            y[i] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = substream_rng(seed, "test-matrix", 0);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let sym = &a * a.transpose();
        sym
    }

    #[test]
    fn dense_smallest_orders_ascending() {
        let m = random_symmetric(12, 3);
        let (vals, vecs) = dense_smallest(&m, 5);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        // Residual check.
        for c in 0..5 {
            let v = vecs.column(c);
            let r = &m * v - vals[c] * v;
            assert!(r.norm() < 1e-9);
        }
    }

    #[test]
    fn iterative_matches_dense_oracle() {
        let m = random_symmetric(60, 11);
        let (dense_vals, _) = dense_smallest(&m, 4);
        let op = DenseOp(m);
        let pairs = smallest_eigenpairs(&op, 4, 1e-9, 20_000, 5).unwrap();
        for i in 0..4 {
            assert!(
                (pairs.values[i] - dense_vals[i]).abs() < 1e-7,
                "eigenvalue {i}: {} vs {}",
                pairs.values[i],
                dense_vals[i]
            );
            assert!(pairs.residuals[i] <= 1e-9);
        }
    }

    #[test]
    fn iterative_handles_degenerate_spectrum() {
        // Block-diagonal with a repeated smallest eigenvalue.
        let mut m = DMatrix::<f64>::zeros(30, 30);
        for i in 0..30 {
            m[(i, i)] = if i < 3 { 1.0 } else { 2.0 + i as f64 * 0.1 };
        }
        let op = DenseOp(m);
        let pairs = smallest_eigenpairs(&op, 3, 1e-10, 10_000, 5).unwrap();
        for i in 0..3 {
            assert!((pairs.values[i] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn vectors_are_orthonormal() {
        let m = random_symmetric(40, 7);
        let op = DenseOp(m);
        let pairs = smallest_eigenpairs(&op, 3, 1e-9, 10_000, 5).unwrap();
        let gram = pairs.vectors.transpose() * &pairs.vectors;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expect).abs() < 1e-8);
            }
        }
    }
}
