//! Evaluation metrics: permutation-minimized error rate against a planted
//! truth, balance aggregation, and the serialized metrics report.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::fairness::{balance_report, GroupPartition};
use crate::graph::SparseGraph;
use crate::sc::ncut_partial;
use crate::solver::ClusterAssignment;

/// Minimum-cost assignment on a square integer matrix (Hungarian method
/// with potentials, O(k^3)). Returns the column chosen for each row.
fn hungarian_min(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1]; // row matched to column j (1-based; 0 = none)
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// Maximum trace overlap achievable on the submatrix `rows x cols`.
fn max_overlap(confusion: &[Vec<u64>], rows: &[usize], cols: &[usize]) -> u64 {
    debug_assert_eq!(rows.len(), cols.len());
    if rows.is_empty() {
        return 0;
    }
    let cost: Vec<Vec<i64>> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| -(confusion[r][c] as i64)).collect())
        .collect();
    let assignment = hungarian_min(&cost);
    rows.iter()
        .zip(assignment)
        .map(|(&r, j)| confusion[r][cols[j]])
        .sum()
}

/// Permutation `perm[l]` (predicted label -> truth label) maximizing the
/// trace overlap of a square count matrix; ties resolve to the
/// lexicographically smallest permutation.
pub fn optimal_permutation(confusion: &[Vec<u64>]) -> Result<Vec<usize>> {
    let k = confusion.len();
    if k == 0 || confusion.iter().any(|row| row.len() != k) {
        return Err(validation("confusion matrix must be square and nonempty"));
    }
    let all: Vec<usize> = (0..k).collect();
    let best_total = max_overlap(confusion, &all, &all);

    let mut perm = Vec::with_capacity(k);
    let mut used = vec![false; k];
    let mut prefix = 0u64;
    for row in 0..k {
        let rest_rows: Vec<usize> = ((row + 1)..k).collect();
        let mut chosen = None;
        for j in 0..k {
            if used[j] {
                continue;
            }
            let rest_cols: Vec<usize> = (0..k).filter(|&c| !used[c] && c != j).collect();
            let total = prefix + confusion[row][j] + max_overlap(confusion, &rest_rows, &rest_cols);
            if total == best_total {
                chosen = Some(j);
                break;
            }
        }
        let j = chosen.ok_or_else(|| Error::Internal("assignment refinement failed".into()))?;
        used[j] = true;
        prefix += confusion[row][j];
        perm.push(j);
    }
    Ok(perm)
}

/// Confusion counts: `confusion[pred][truth]`.
fn confusion_matrix(pred: &[usize], truth: &[usize], k: usize) -> Vec<Vec<u64>> {
    let mut confusion = vec![vec![0u64; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        confusion[p][t] += 1;
    }
    confusion
}

/// Permutation-minimized error rate between a predicted assignment and
/// planted truth labels: `(1/k) * min_U ||V U - V*||_F` over permutation
/// matrices, computed through the confusion-matrix assignment problem
/// (`||V U - V*||_F^2 = 2 (n - overlap)`).
pub fn error_rate(pred: &ClusterAssignment, truth: &[usize], k: usize) -> Result<f64> {
    if pred.num_nodes() != truth.len() {
        return Err(validation(format!(
            "prediction covers {} nodes but truth covers {}",
            pred.num_nodes(),
            truth.len()
        )));
    }
    if k == 0 {
        return Err(validation("k must be >= 1"));
    }
    if let Some(&bad) = pred.labels().iter().find(|&&l| l >= k) {
        return Err(validation(format!("predicted label {bad} out of range for k = {k}")));
    }
    if let Some(&bad) = truth.iter().find(|&&l| l >= k) {
        return Err(validation(format!("truth label {bad} out of range for k = {k}")));
    }
    let confusion = confusion_matrix(pred.labels(), truth, k);
    let perm = optimal_permutation(&confusion)?;
    let overlap: u64 = (0..k).map(|l| confusion[l][perm[l]]).sum();
    let n = truth.len() as f64;
    Ok((2.0 * (n - overlap as f64)).sqrt() / k as f64)
}

/// One integer label per line (`#` comments allowed).
pub fn read_label_file(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path.as_ref())?;
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        labels.push(line.parse::<usize>().map_err(|_| Error::Parse {
            line: idx + 1,
            msg: format!("invalid label '{line}'"),
        })?);
    }
    Ok(labels)
}

/// Aggregated evaluation of one clustering run. `error_rate` appears only
/// when truth labels were supplied; the balance fields only when a group
/// partition was supplied.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub average_balance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_cluster_balance: Option<Vec<f64>>,
    pub ncut: f64,
    pub cluster_sizes: Vec<usize>,
    pub timings_ms: BTreeMap<String, f64>,
    /// Clusters that ended up empty (their balance counts as 0).
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub empty_clusters: Vec<usize>,
}

/// Assemble the report for one assignment. Empty clusters are skipped in
/// the NCut sum and flagged.
pub fn compile_report(
    assignment: &ClusterAssignment,
    partition: Option<&GroupPartition>,
    graph: &SparseGraph,
    truth: Option<&[usize]>,
    timings_ms: BTreeMap<String, f64>,
) -> Result<MetricsReport> {
    if assignment.num_nodes() != graph.num_nodes() {
        return Err(validation(format!(
            "assignment covers {} nodes but the graph has {}",
            assignment.num_nodes(),
            graph.num_nodes()
        )));
    }
    let error = match truth {
        Some(t) => Some(error_rate(assignment, t, assignment.num_clusters())?),
        None => None,
    };
    let (average_balance, per_cluster_balance, empty_clusters) = match partition {
        Some(p) => {
            let report = balance_report(p, assignment)?;
            (
                Some(report.average),
                Some(report.per_cluster),
                report.empty_clusters,
            )
        }
        None => (None, None, assignment.empty_clusters()),
    };
    Ok(MetricsReport {
        error_rate: error,
        average_balance,
        per_cluster_balance,
        ncut: ncut_partial(graph, assignment, false)?,
        cluster_sizes: assignment.cluster_sizes(),
        timings_ms,
        empty_clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assignment(labels: &[usize], k: usize) -> ClusterAssignment {
        ClusterAssignment::from_labels(labels.to_vec(), k).unwrap()
    }

    /// Brute-force oracle: enumerate all k! permutations over explicit 0/1
    /// indicator matrices and take the smallest Frobenius difference.
    fn brute_force_error(pred: &[usize], truth: &[usize], k: usize) -> f64 {
        fn permutations(k: usize) -> Vec<Vec<usize>> {
            if k == 1 {
                return vec![vec![0]];
            }
            let mut out = Vec::new();
            for rest in permutations(k - 1) {
                for pos in 0..k {
                    let mut p = rest.clone();
                    p.insert(pos, k - 1);
                    out.push(p);
                }
            }
            out
        }
        let n = pred.len();
        let mut best = f64::INFINITY;
        for perm in permutations(k) {
            // ||V U - V*||_F^2 with V U the permuted one-hot prediction.
            let mut sq = 0.0f64;
            for i in 0..n {
                for c in 0..k {
                    let vu = if perm[pred[i]] == c { 1.0 } else { 0.0 };
                    let vs = if truth[i] == c { 1.0 } else { 0.0 };
                    sq += (vu - vs) * (vu - vs);
                }
            }
            best = best.min(sq.sqrt());
        }
        best / k as f64
    }

    #[test]
    fn zero_when_equal_or_permuted() {
        let truth = [0, 0, 1, 1, 2, 2];
        let a = assignment(&truth, 3);
        assert_eq!(error_rate(&a, &truth, 3).unwrap(), 0.0);
        let permuted = assignment(&[2, 2, 0, 0, 1, 1], 3);
        assert_eq!(error_rate(&permuted, &truth, 3).unwrap(), 0.0);
    }

    #[test]
    fn single_mismatch_hand_value() {
        let truth = [0, 0, 1, 1];
        let pred = assignment(&[0, 0, 1, 0], 2);
        let e = error_rate(&pred, &truth, 2).unwrap();
        assert!((e - (2.0f64).sqrt() / 2.0).abs() < 1e-12);
        assert!((e - brute_force_error(pred.labels(), &truth, 2)).abs() < 1e-12);
    }

    #[test]
    fn error_rate_is_symmetric() {
        let a = [0, 1, 2, 0, 1, 2, 1, 1];
        let b = [1, 1, 0, 2, 2, 0, 0, 1];
        let ea = error_rate(&assignment(&a, 3), &b, 3).unwrap();
        let eb = error_rate(&assignment(&b, 3), &a, 3).unwrap();
        assert!((ea - eb).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_on_random_labelings() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for k in 2..=5usize {
            for _case in 0..20 {
                let n = 12 + (next() % 8) as usize;
                let pred: Vec<usize> = (0..n).map(|_| (next() % k as u64) as usize).collect();
                let truth: Vec<usize> = (0..n).map(|_| (next() % k as u64) as usize).collect();
                let fast = error_rate(&assignment(&pred, k), &truth, k).unwrap();
                let slow = brute_force_error(&pred, &truth, k);
                assert!(
                    (fast - slow).abs() < 1e-10,
                    "k={k} pred={pred:?} truth={truth:?}: {fast} vs {slow}"
                );
            }
        }
    }

    #[test]
    fn permutation_examples() {
        let diag = vec![vec![5, 0], vec![0, 5]];
        assert_eq!(optimal_permutation(&diag).unwrap(), vec![0, 1]);
        let anti = vec![vec![0, 7], vec![7, 0]];
        assert_eq!(optimal_permutation(&anti).unwrap(), vec![1, 0]);
    }

    #[test]
    fn permutation_tie_breaks_lexicographically() {
        // Uniform matrix: every permutation is optimal; identity is the
        // lexicographically smallest.
        let uniform = vec![vec![1u64; 3]; 3];
        assert_eq!(optimal_permutation(&uniform).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn permutation_matches_exhaustive_search() {
        let mut state = 42u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) % 10
        };
        for _case in 0..20 {
            let k = 5;
            let confusion: Vec<Vec<u64>> =
                (0..k).map(|_| (0..k).map(|_| next()).collect()).collect();
            let perm = optimal_permutation(&confusion).unwrap();
            let value: u64 = (0..k).map(|l| confusion[l][perm[l]]).sum();
            // Exhaustive 5! check.
            let mut best = 0u64;
            let mut idx = [0, 1, 2, 3, 4];
            heap_permutations(&mut idx, 5, &mut |p| {
                let v: u64 = (0..k).map(|l| confusion[l][p[l]]).sum();
                if v > best {
                    best = v;
                }
            });
            assert_eq!(value, best, "confusion {confusion:?}");
        }
    }

    fn heap_permutations(arr: &mut [usize; 5], k: usize, f: &mut impl FnMut(&[usize; 5])) {
        if k == 1 {
            f(arr);
            return;
        }
        for i in 0..k {
            heap_permutations(arr, k - 1, f);
            if k % 2 == 0 {
                arr.swap(i, k - 1);
            } else {
                arr.swap(0, k - 1);
            }
        }
    }

    #[test]
    fn report_omits_optional_fields() {
        let g = SparseGraph::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let a = assignment(&[0, 0, 1, 1], 2);
        let report = compile_report(&a, None, &g, None, BTreeMap::new()).unwrap();
        assert!(report.error_rate.is_none());
        assert!(report.average_balance.is_none());
        let json = serde_json::to_string(&report).unwrap();
        assert!(!json.contains("error_rate"));
        assert!(!json.contains("average_balance"));
        assert!(!json.contains("empty_clusters"));
    }

    #[test]
    fn report_round_trips_through_json() {
        let g = SparseGraph::from_edges(4, &[(0, 1, 1.0), (1, 2, 0.5), (2, 3, 1.0)]).unwrap();
        let p = GroupPartition::new(vec![0, 1, 0, 1]).unwrap();
        let a = assignment(&[0, 0, 1, 1], 2);
        let mut timings = BTreeMap::new();
        timings.insert("total".to_string(), 12.5);
        let report = compile_report(&a, Some(&p), &g, Some(&[0, 0, 1, 1]), timings).unwrap();
        assert_eq!(report.error_rate, Some(0.0));
        let json = serde_json::to_string(&report).unwrap();
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn label_out_of_range_rejected() {
        let a = assignment(&[0, 1], 2);
        assert!(matches!(
            error_rate(&a, &[0, 5], 2),
            Err(Error::Validation(_))
        ));
    }
}
