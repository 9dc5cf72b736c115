use serde::{Deserialize, Serialize};

use crate::clustering::{Clustering, Provenance};
use crate::error::{Error, Result};
use crate::graph::{Graph, Vertex};
use crate::ops::sample_members;
use crate::rng::{TAG_DELTA, TAG_SAMPLE};

/// How the common-neighbor threshold is derived from the sampled counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum DeltaRule {
    /// Δ = Δ' − slack·√(Δ'·ln N), with Δ' the largest sampled count.
    Formula { slack: f64 },
    /// Splits the counts into two classes (two-means on √count) and takes
    /// the geometric mean of the class means.
    Gap,
}

impl Default for DeltaRule {
    fn default() -> Self {
        DeltaRule::Formula { slack: 9.0 }
    }
}

/// Knobs of the common-neighbor algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommNbrOptions {
    /// Oversampling factor of random sets.
    pub c_sel: f64,
    pub delta_rule: DeltaRule,
    /// Constant in the sample size c·n·k²·ln N/d.
    pub sample_factor: f64,
    /// Constant in the trimmed sub-cluster size c·n·k²·ln N/d.
    pub trim_factor: f64,
    /// Use these samples instead of drawing them.
    #[serde(skip)]
    pub samples: Option<Samples>,
}

impl Default for CommNbrOptions {
    fn default() -> Self {
        CommNbrOptions {
            c_sel: 20.0,
            delta_rule: DeltaRule::default(),
            sample_factor: 21.0,
            trim_factor: 20.0,
            samples: None,
        }
    }
}

/// The two random vertex sets of a run: the main sample S and the small
/// sample whose pairwise counts set the threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Samples {
    pub main: Vec<Vertex>,
    pub threshold: Vec<Vertex>,
}

/// Threshold on common-neighbor counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdDelta {
    /// Largest sampled count.
    pub delta_prime: f64,
    pub delta: f64,
}

/// ln N for N vertices.
pub fn ln_n(vertex_count: usize) -> f64 {
    (vertex_count as f64).ln()
}

/// Size of S: ⌈c·n·k²·ln N/d⌉, where n = N/k and d is the degree of vertex 0.
pub fn prescribed_size(factor: f64, vertex_count: usize, k: usize, d: usize) -> f64 {
    let n = (vertex_count / k) as f64;
    (factor * n * (k * k) as f64 * ln_n(vertex_count) / d as f64).ceil()
}

/// Draws S and the threshold sample exactly as the MPC algorithm's
/// `random_set` calls do.
pub fn draw_samples(graph: &Graph, k: usize, seed: u64, opts: &CommNbrOptions) -> Result<Samples> {
    if let Some(s) = &opts.samples {
        return Ok(s.clone());
    }
    let n = graph.vertex_count();
    let d = degree_of_first(graph)?;
    let size = prescribed_size(opts.sample_factor, n, k, d);
    let (main, _) = sample_members(seed, TAG_SAMPLE, n, size / opts.c_sel, opts.c_sel)?;
    let (threshold, _) = sample_members(seed, TAG_DELTA, n, k as f64 * ln_n(n), opts.c_sel)?;
    Ok(Samples { main, threshold })
}

pub(crate) fn degree_of_first(graph: &Graph) -> Result<usize> {
    match graph.vertex_count() {
        0 => Err(Error::Param("empty graph".into())),
        _ => match graph.degree(0) {
            0 => Err(Error::recovery("sample_size", "vertex 0 is isolated, d = 0")),
            d => Ok(d),
        },
    }
}

/// Applies a threshold rule to sampled pair counts.
pub fn delta_from_counts(counts: &[u32], vertex_count: usize, rule: DeltaRule) -> Result<ThresholdDelta> {
    let delta_prime = counts.iter().copied().max().unwrap_or(0) as f64;
    let delta = match rule {
        DeltaRule::Formula { slack } => delta_prime - slack * (delta_prime * ln_n(vertex_count)).sqrt(),
        DeltaRule::Gap => gap_split(counts).unwrap_or(0.0),
    };
    if !(delta > 0.0) {
        return Err(Error::recovery(
            "compute_del",
            format!("non-positive threshold {delta:.3} from max count {delta_prime}"),
        ));
    }
    Ok(ThresholdDelta { delta_prime, delta })
}

/// Two-means split of √count; returns √(mean_low·mean_high) of the counts.
fn gap_split(counts: &[u32]) -> Option<f64> {
    let mut v: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    v.sort_by(f64::total_cmp);
    let roots: Vec<f64> = v.iter().map(|c| c.sqrt()).collect();
    let n = roots.len();
    let mut pre = vec![(0.0, 0.0); n + 1];
    for (i, &x) in roots.iter().enumerate() {
        pre[i + 1] = (pre[i].0 + x, pre[i].1 + x * x);
    }
    let sse = |lo: usize, hi: usize| {
        let (s, s2) = (pre[hi].0 - pre[lo].0, pre[hi].1 - pre[lo].1);
        s2 - s * s / (hi - lo) as f64
    };
    let mut best: Option<(f64, usize)> = None;
    for cut in 1..n {
        if v[cut] == v[cut - 1] {
            continue;
        }
        let cost = sse(0, cut) + sse(cut, n);
        if best.map_or(true, |(b, _)| cost < b) {
            best = Some((cost, cut));
        }
    }
    let (_, cut) = best?;
    let low = v[..cut].iter().sum::<f64>() / cut as f64;
    let high = v[cut..].iter().sum::<f64>() / (n - cut) as f64;
    Some((low * high).sqrt())
}

/// Counts for all pairs u < v of `sample`, in lexicographic pair order.
pub fn pair_counts(graph: &Graph, sample: &[Vertex]) -> Vec<u32> {
    let mut out = Vec::new();
    for (i, &u) in sample.iter().enumerate() {
        for &v in &sample[i + 1..] {
            out.push(graph.common_neighbors(u, v) as u32);
        }
    }
    out
}

/// Threshold from the pairwise counts of a Θ(k ln N) random sample.
pub fn compute_del(graph: &Graph, k: usize, seed: u64, opts: &CommNbrOptions) -> Result<ThresholdDelta> {
    let samples = draw_samples(graph, k, seed, opts)?;
    delta_from_counts(&pair_counts(graph, &samples.threshold), graph.vertex_count(), opts.delta_rule)
}

/// Greedy peeling of `sample`: the lowest remaining id anchors a group that
/// takes every remaining u with |N(u) ∩ N(anchor)| ≥ Δ.
pub fn compcom_nbr(sample: &[Vertex], graph: &Graph, delta: f64) -> Vec<Vec<Vertex>> {
    let mut remaining: Vec<Vertex> = sample.to_vec();
    remaining.sort_unstable();
    let mut groups = Vec::new();
    while let Some(&anchor) = remaining.first() {
        let (group, rest): (Vec<Vertex>, Vec<Vertex>) = remaining.iter().partition(|&&u| {
            u == anchor || graph.common_neighbors(u, anchor) as f64 >= delta
        });
        groups.push(group);
        remaining = rest;
    }
    groups
}

/// Keeps the `size` lowest ids of every group, with `size` clamped to the
/// smallest group.
pub fn trim_groups(groups: &[Vec<Vertex>], size: usize) -> (usize, Vec<Vec<Vertex>>) {
    let size = groups.iter().map(Vec::len).min().unwrap_or(0).min(size);
    (size, groups.iter().map(|g| g[..size].to_vec()).collect())
}

/// Common-neighbor clustering with a single machine.
pub fn comm_nbr(graph: &Graph, k: usize, seed: u64, opts: &CommNbrOptions) -> Result<Clustering> {
    let n = graph.vertex_count();
    let d = degree_of_first(graph)?;
    let samples = draw_samples(graph, k, seed, opts)?;
    let threshold = delta_from_counts(&pair_counts(graph, &samples.threshold), n, opts.delta_rule)?;
    let groups = compcom_nbr(&samples.main, graph, threshold.delta);
    if groups.len() != k {
        return Err(Error::recovery(
            "compcom_nbr",
            format!(
                "{} groups instead of {k} (|S| = {}, delta = {:.3})",
                groups.len(),
                samples.main.len(),
                threshold.delta
            ),
        ));
    }
    let target = prescribed_size(opts.trim_factor, n, k, d) as usize;
    let (_, trimmed) = trim_groups(&groups, target);
    let mut labels = vec![usize::MAX; n];
    for (g, members) in groups.iter().enumerate() {
        for &v in members {
            labels[v as usize] = g;
        }
    }
    for v in 0..n {
        if labels[v] == usize::MAX {
            labels[v] = argmax_edges(graph, v as Vertex, &trimmed);
        }
    }
    Ok(Clustering::from_labels(
        &labels,
        Provenance {
            algorithm: "commnbr".into(),
            params: format!("k={k} delta={:.4}", threshold.delta),
            seed,
        },
    ))
}

/// Index of the group with the most edges into `v`, ties to the smallest.
pub fn argmax_edges(graph: &Graph, v: Vertex, groups: &[Vec<Vertex>]) -> usize {
    let mut best = (0, 0);
    for (j, g) in groups.iter().enumerate() {
        let c = graph.edges_into(v, g);
        if c > best.1 {
            best = (j, c);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbm::{generate_sbm, SbmParams};

    fn complete(n: u32) -> Graph {
        let edges: Vec<(u32, u32)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        Graph::from_edges(n as usize, &edges).unwrap()
    }

    #[test]
    fn complete_graph_threshold() {
        let n = 1000;
        let g = complete(n);
        let counts = pair_counts(&g, &[0, 7, 99, 500, 999]);
        assert!(counts.iter().all(|&c| c == n - 2));
        let t = delta_from_counts(&counts, n as usize, DeltaRule::default()).unwrap();
        let dp = (n - 2) as f64;
        assert_eq!(t.delta_prime, dp);
        assert!((t.delta - (dp - 9.0 * (dp * (n as f64).ln()).sqrt())).abs() < 1e-9);

        let small = complete(50);
        let counts = pair_counts(&small, &[0, 1, 2]);
        assert!(delta_from_counts(&counts, 50, DeltaRule::default()).is_err());
    }

    #[test]
    fn formula_reference_value() {
        let n = 9f64.exp().round() as usize;
        let t = delta_from_counts(&[10000], n, DeltaRule::default()).unwrap();
        let ln = (n as f64).ln();
        assert!((t.delta - (10000.0 - 9.0 * (10000.0 * ln).sqrt())).abs() < 1e-6);
        assert!((t.delta - 7300.0).abs() < 1.0);
    }

    #[test]
    fn empty_graph_fails() {
        let g = Graph::from_edges(10, &[]).unwrap();
        let err = delta_from_counts(&pair_counts(&g, &[0, 1, 2]), 10, DeltaRule::Gap).unwrap_err();
        assert_eq!(err.failure_stage(), Some("compute_del"));
    }

    #[test]
    fn peeling_two_cliques() {
        let mut edges = Vec::new();
        for base in [0u32, 5] {
            for u in 0..5 {
                for v in u + 1..5 {
                    edges.push((base + u, base + v));
                }
            }
        }
        let g = Graph::from_edges(10, &edges).unwrap();
        let all: Vec<u32> = (0..10).collect();
        assert_eq!(compcom_nbr(&all, &g, 1.0), vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]]);
        assert_eq!(compcom_nbr(&all, &g, 100.0).len(), 10);
        assert_eq!(compcom_nbr(&[4], &g, 1.0), vec![vec![4]]);
    }

    #[test]
    fn gap_rule_splits_classes() {
        let counts = [2, 3, 3, 4, 30, 31, 29];
        let t = delta_from_counts(&counts, 100, DeltaRule::Gap).unwrap();
        assert!(t.delta > 4.0 && t.delta < 29.0);
        assert_eq!(t.delta_prime, 31.0);
    }

    #[test]
    fn sample_size_bounds() {
        let (n, k, p, q) = (2000usize, 3usize, 0.3f64, 0.05f64);
        let d = (n as f64 * p + n as f64 * (k - 1) as f64 * q).round() as usize;
        let total = n * k;
        let size = prescribed_size(21.0, total, k, d);
        let ln = ln_n(total);
        assert!(size > 20.0 * k as f64 * ln / p);
        assert!(size < 22.0 * (k * k) as f64 * ln / p);
    }

    #[test]
    fn recovers_planted_pair() {
        let inst = generate_sbm(SbmParams::new(100, 2, 0.5, 0.05, 1)).unwrap();
        let g = inst.graph();
        let opts = CommNbrOptions {
            delta_rule: DeltaRule::Gap,
            ..Default::default()
        };
        let c = comm_nbr(&g, 2, 1, &opts).unwrap();
        let truth = Clustering::from_labels(&inst.truth, c.provenance.clone());
        assert!(c.same_partition(&truth));
    }
}
