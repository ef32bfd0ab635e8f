//! Modified stochastic-block-model generator with planted fair clusters.
//!
//! Nodes are assigned to `(group, cluster)` cells round-robin so every cell
//! holds the same share of each group (to within one node). Each unordered
//! node pair gets an edge with a probability keyed on co-membership:
//! `a` (same group, same cluster), `b` (same group, different cluster),
//! `c` (different group, same cluster), `d` (neither), with
//! `a > b > c > d` under the paper-style defaults.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{validation, Result};
use crate::fairness::GroupPartition;
use crate::graph::{save_edge_list, SparseGraph};
use crate::seeds::substream_rng;
use crate::solver::ClusterAssignment;

#[derive(Debug, Clone)]
pub struct MsbmConfig {
    pub n: usize,
    pub h: usize,
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub seed: u64,
}

impl MsbmConfig {
    /// Paper-style probabilities `(10, 7, 4, 1) * (ln n / n)^{2/3}`, clamped
    /// to 1 for tiny `n`.
    pub fn with_default_probabilities(n: usize, h: usize, k: usize, seed: u64) -> Self {
        let t = default_probability_scale(n);
        MsbmConfig {
            n,
            h,
            k,
            a: (10.0 * t).min(1.0),
            b: (7.0 * t).min(1.0),
            c: (4.0 * t).min(1.0),
            d: t.min(1.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h < 1 || self.k < 1 {
            return Err(validation("need h >= 1 groups and k >= 1 clusters"));
        }
        if self.n < self.h * self.k {
            return Err(validation(format!(
                "need n >= h * k nodes to populate every (group, cluster) cell (n = {}, h * k = {})",
                self.n,
                self.h * self.k
            )));
        }
        for (name, p) in [("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d)] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(validation(format!("probability {name} = {p} outside [0, 1]")));
            }
        }
        // The model calls for a > b > c > d; degenerate equalities are
        // allowed so limit cases (all-zero, all-one) stay expressible.
        if !(self.a >= self.b && self.b >= self.c && self.c >= self.d) {
            return Err(validation(format!(
                "probabilities must be nonincreasing: a={} b={} c={} d={}",
                self.a, self.b, self.c, self.d
            )));
        }
        Ok(())
    }
}

/// `(ln n / n)^{2/3}` (natural log).
pub fn default_probability_scale(n: usize) -> f64 {
    if n < 2 {
        return 1.0;
    }
    let n = n as f64;
    (n.ln() / n).powf(2.0 / 3.0)
}

/// A generated instance: the graph, the protected groups, and the planted
/// cluster labels.
#[derive(Debug, Clone)]
pub struct MsbmInstance {
    pub graph: SparseGraph,
    pub groups: GroupPartition,
    pub truth: Vec<usize>,
    pub config: MsbmConfig,
}

impl MsbmInstance {
    pub fn truth_assignment(&self) -> Result<ClusterAssignment> {
        ClusterAssignment::from_labels(self.truth.clone(), self.config.k)
    }
}

/// Nodes of the `(group, cluster)` cell form the arithmetic progression
/// `node = h*k*q + k*group + cluster`.
fn cell_count(n: usize, h: usize, k: usize, group: usize, cluster: usize) -> usize {
    let offset = k * group + cluster;
    if offset >= n {
        0
    } else {
        (n - offset - 1) / (h * k) + 1
    }
}

fn cell_node(h: usize, k: usize, group: usize, cluster: usize, q: usize) -> usize {
    h * k * q + k * group + cluster
}

/// Index of pair `(i, j)`, `i < j`, in the row-major triangular order.
fn tri_base(count: usize, i: usize) -> usize {
    i * count - i * (i + 1) / 2
}

fn tri_decode(count: usize, p: usize) -> (usize, usize) {
    // Float estimate of the row, corrected exactly.
    let cf = count as f64;
    let pf = p as f64;
    let mut i = (cf - 0.5 - ((cf - 0.5) * (cf - 0.5) - 2.0 * pf).max(0.0).sqrt()).floor() as usize;
    i = i.min(count.saturating_sub(2));
    while i + 1 < count && tri_base(count, i + 1) <= p {
        i += 1;
    }
    while tri_base(count, i) > p {
        i -= 1;
    }
    let j = i + 1 + (p - tri_base(count, i));
    (i, j)
}

/// Visit each of `total` Bernoulli(p) trials, calling `emit` on successes.
/// Skip lengths are geometric, so the RNG is drawn O(successes) times.
fn sample_block(rng: &mut ChaCha8Rng, total: usize, p: f64, mut emit: impl FnMut(usize)) {
    if total == 0 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        for idx in 0..total {
            emit(idx);
        }
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut pos: usize = 0;
    loop {
        let u: f64 = rng.random();
        // Failures before the next success.
        let skip = ((1.0 - u).ln() / log_q).floor();
        if !skip.is_finite() || skip >= (total - pos) as f64 {
            return;
        }
        pos += skip as usize;
        emit(pos);
        pos += 1;
        if pos >= total {
            return;
        }
    }
}

/// Generate an instance. Node `t` gets cluster `t mod k` and group
/// `(t / k) mod h`; every unordered pair is sampled once with its case
/// probability. Generation is single-threaded and fully seeded.
pub fn msbm_generate(cfg: &MsbmConfig) -> Result<MsbmInstance> {
    cfg.validate()?;
    let (n, h, k) = (cfg.n, cfg.h, cfg.k);
    let mut rng = substream_rng(cfg.seed, "msbm", 0);
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();

    let ncells = h * k;
    let cell_of = |cell: usize| (cell / k, cell % k); // (group, cluster)
    for ca in 0..ncells {
        let (sa, la) = cell_of(ca);
        let cnt_a = cell_count(n, h, k, sa, la);
        for cb in ca..ncells {
            let (sb, lb) = cell_of(cb);
            let cnt_b = cell_count(n, h, k, sb, lb);
            let p = match (sa == sb, la == lb) {
                (true, true) => cfg.a,
                (true, false) => cfg.b,
                (false, true) => cfg.c,
                (false, false) => cfg.d,
            };
            if ca == cb {
                let total = cnt_a * cnt_a.saturating_sub(1) / 2;
                sample_block(&mut rng, total, p, |idx| {
                    let (qi, qj) = tri_decode(cnt_a, idx);
                    edges.push((cell_node(h, k, sa, la, qi), cell_node(h, k, sa, la, qj), 1.0));
                });
            } else {
                sample_block(&mut rng, cnt_a * cnt_b, p, |idx| {
                    let qa = idx / cnt_b;
                    let qb = idx % cnt_b;
                    edges.push((cell_node(h, k, sa, la, qa), cell_node(h, k, sb, lb, qb), 1.0));
                });
            }
        }
    }

    let graph = SparseGraph::from_edges(n, &edges)?;
    let group_of: Vec<usize> = (0..n).map(|t| (t / k) % h).collect();
    let truth: Vec<usize> = (0..n).map(|t| t % k).collect();
    Ok(MsbmInstance {
        graph,
        groups: GroupPartition::new(group_of)?,
        truth,
        config: cfg.clone(),
    })
}

/// Write `edges.tsv`, `groups.txt`, and `truth.txt` into `dir`.
pub fn write_instance(inst: &MsbmInstance, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    save_edge_list(&inst.graph, dir.join("edges.tsv"), '\t')?;
    inst.groups.save(dir.join("groups.txt"))?;
    let mut truth_out = String::new();
    for &l in &inst.truth {
        truth_out.push_str(&l.to_string());
        truth_out.push('\n');
    }
    fs::write(dir.join("truth.txt"), truth_out)?;
    Ok(())
}
