//! Protected-group partitions, the centered fairness matrix `F`, and the
//! balance metrics.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{validation, Error, Result};
use crate::solver::ClusterAssignment;

/// Partition of the node set into `h` protected groups.
#[derive(Debug, Clone)]
pub struct GroupPartition {
    group_of: Vec<usize>,
    h: usize,
    group_sizes: Vec<usize>,
}

impl GroupPartition {
    /// Build from dense group ids in `0..h`. Every group must be nonempty.
    pub fn new(group_of: Vec<usize>) -> Result<Self> {
        if group_of.is_empty() {
            return Err(validation("group partition over an empty node set"));
        }
        let h = group_of.iter().max().unwrap() + 1;
        let mut group_sizes = vec![0usize; h];
        for &g in &group_of {
            group_sizes[g] += 1;
        }
        if let Some(empty) = group_sizes.iter().position(|&c| c == 0) {
            return Err(validation(format!("group {empty} has no members")));
        }
        Ok(GroupPartition {
            group_of,
            h,
            group_sizes,
        })
    }

    /// Build from arbitrary nonnegative ids, re-indexing them densely to
    /// `0..h` in ascending order of the raw id.
    pub fn from_raw_ids(raw: &[usize]) -> Result<Self> {
        let mut distinct: Vec<usize> = raw.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let dense = raw
            .iter()
            .map(|g| distinct.binary_search(g).expect("id present"))
            .collect();
        Self::new(dense)
    }

    pub fn num_nodes(&self) -> usize {
        self.group_of.len()
    }

    pub fn num_groups(&self) -> usize {
        self.h
    }

    pub fn group_of(&self) -> &[usize] {
        &self.group_of
    }

    pub fn group(&self, node: usize) -> usize {
        self.group_of[node]
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    /// Restrict to the nodes in `old_ids` (e.g. a connected component),
    /// re-indexing group ids densely in case a group vanished.
    pub fn filter(&self, old_ids: &[usize]) -> Result<Self> {
        let raw: Vec<usize> = old_ids.iter().map(|&i| self.group_of[i]).collect();
        Self::from_raw_ids(&raw)
    }

    /// Write one group id per line (line `i` is node `i`).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        for &g in &self.group_of {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        fs::write(path.as_ref(), out)?;
        Ok(())
    }
}

/// Load a group file: either one integer per line (line `i` = group of node
/// `i`) or CSV rows `node,group`. Ids are re-indexed densely to `0..h`.
pub fn load_group_file(path: impl AsRef<Path>) -> Result<GroupPartition> {
    let text = fs::read_to_string(path.as_ref())?;
    let mut plain: Vec<usize> = Vec::new();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((a, b)) = line.split_once(',') {
            let node: usize = a.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid node id '{a}'"),
            })?;
            let group: usize = b.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid group id '{b}'"),
            })?;
            pairs.push((node, group));
        } else {
            let group: usize = line.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid group id '{line}'"),
            })?;
            plain.push(group);
        }
    }
    match (plain.is_empty(), pairs.is_empty()) {
        (false, true) => GroupPartition::from_raw_ids(&plain),
        (true, false) => {
            let n = pairs.iter().map(|&(u, _)| u + 1).max().unwrap();
            let mut raw = vec![usize::MAX; n];
            for (node, group) in pairs {
                if raw[node] != usize::MAX {
                    return Err(validation(format!("node {node} assigned a group twice")));
                }
                raw[node] = group;
            }
            if let Some(missing) = raw.iter().position(|&g| g == usize::MAX) {
                return Err(validation(format!("node {missing} has no group row")));
            }
            GroupPartition::from_raw_ids(&raw)
        }
        (true, true) => Err(validation("group file is empty")),
        (false, false) => Err(validation(
            "group file mixes one-per-line and node,group formats",
        )),
    }
}

/// Centered group-indicator matrix `F` (dense, `n x (h-1)`), with
/// `F[i][s] = [group(i) == s] - |V_s| / n` for groups `0..h-1` (the last
/// group is omitted; any single omission spans the same constraints).
#[derive(Debug, Clone)]
pub struct FairnessMatrix {
    mat: DMatrix<f64>,
}

impl FairnessMatrix {
    /// A matrix with zero columns: no constraints (plain Jacobi limit).
    pub fn unconstrained(n: usize) -> Self {
        FairnessMatrix {
            mat: DMatrix::zeros(n, 0),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.mat.nrows()
    }

    /// Number of constraint columns, `h - 1`.
    pub fn num_constraints(&self) -> usize {
        self.mat.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// `F^T x`.
    pub fn transpose_apply(&self, x: &[f64]) -> DVector<f64> {
        let xv = DVector::from_column_slice(x);
        self.mat.transpose() * xv
    }

    /// `y += F c`.
    pub fn apply_add(&self, c: &DVector<f64>, y: &mut [f64]) {
        let fc = &self.mat * c;
        for (yi, fi) in y.iter_mut().zip(fc.iter()) {
            *yi += fi;
        }
    }
}

/// Build the fairness matrix of a partition with `h >= 2` groups.
pub fn build_fairness_matrix(p: &GroupPartition) -> Result<FairnessMatrix> {
    if p.num_groups() < 2 {
        return Err(validation(format!(
            "fairness matrix needs at least 2 groups, found {}",
            p.num_groups()
        )));
    }
    let n = p.num_nodes();
    let cols = p.num_groups() - 1;
    let mut mat = DMatrix::zeros(n, cols);
    for s in 0..cols {
        let share = p.group_sizes()[s] as f64 / n as f64;
        for i in 0..n {
            let indicator = if p.group(i) == s { 1.0 } else { 0.0 };
            mat[(i, s)] = indicator - share;
        }
    }
    Ok(FairnessMatrix { mat })
}

/// `||F^T x|| / max(||x||, 1e-300)`: how far `x` is from satisfying the
/// fairness constraints, scale-free.
pub fn fairness_residual(f: &FairnessMatrix, x: &[f64]) -> f64 {
    if f.num_constraints() == 0 {
        return 0.0;
    }
    let num = f.transpose_apply(x).norm();
    let den = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    num / den
}

/// Balance of one cluster: the minimum over ordered group pairs of the
/// within-cluster count ratio. A group with zero members yields 0.
pub fn balance(p: &GroupPartition, cluster_members: &[usize]) -> Result<f64> {
    if cluster_members.is_empty() {
        return Err(validation("balance of an empty cluster is undefined"));
    }
    let mut counts = vec![0usize; p.num_groups()];
    for &i in cluster_members {
        counts[p.group(i)] += 1;
    }
    let min = *counts.iter().min().unwrap();
    let max = *counts.iter().max().unwrap();
    if min == 0 {
        return Ok(0.0);
    }
    Ok(min as f64 / max as f64)
}

/// Per-cluster balances of a full assignment plus their mean; empty
/// clusters count as balance 0 and are flagged.
#[derive(Debug, Clone)]
pub struct BalanceReport {
    pub average: f64,
    pub per_cluster: Vec<f64>,
    pub empty_clusters: Vec<usize>,
}

pub fn balance_report(p: &GroupPartition, assignment: &ClusterAssignment) -> Result<BalanceReport> {
    if p.num_nodes() != assignment.num_nodes() {
        return Err(validation(format!(
            "group partition covers {} nodes but the assignment covers {}",
            p.num_nodes(),
            assignment.num_nodes()
        )));
    }
    let k = assignment.num_clusters();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in assignment.labels().iter().enumerate() {
        members[l].push(i);
    }
    let mut per_cluster = Vec::with_capacity(k);
    let mut empty_clusters = Vec::new();
    for (l, m) in members.iter().enumerate() {
        if m.is_empty() {
            empty_clusters.push(l);
            per_cluster.push(0.0);
        } else {
            per_cluster.push(balance(p, m)?);
        }
    }
    let average = per_cluster.iter().sum::<f64>() / k as f64;
    Ok(BalanceReport {
        average,
        per_cluster,
        empty_clusters,
    })
}

/// Arithmetic mean of the per-cluster balances.
pub fn average_balance(p: &GroupPartition, assignment: &ClusterAssignment) -> Result<f64> {
    Ok(balance_report(p, assignment)?.average)
}
