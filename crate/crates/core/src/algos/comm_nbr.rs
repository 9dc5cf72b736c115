use crate::clustering::{Clustering, Provenance};
use crate::error::{Error, Result};
use crate::graph::{Graph, Vertex};
use crate::mpc::{broadcast, converge_cast, prefix_sum, sort_records, visit_neighbors, ClusterState, Records, RegionId};
use crate::ops::{
    adopt_set, compare_cut, compare_grp, copy_nbr, even_cluster, random_set, reorganize_nbr, representative_k,
    NeighborLayout, SampledSet,
};
use crate::rng::{TAG_DELTA, TAG_SAMPLE};
use crate::seq::{delta_from_counts, ln_n, prescribed_size, CommNbrOptions, DeltaRule, ThresholdDelta};

/// Redraws of the threshold sample when it yields fewer than k labels.
pub const MAX_REP_REDRAWS: u64 = 3;

/// Representatives elected from the threshold sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RepElection {
    /// One vertex per label, in label order.
    pub representatives: Vec<Vertex>,
    pub threshold: ThresholdDelta,
}

/// Result of an MPC common-neighbor run with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CommNbrOutcome {
    pub clustering: Clustering,
    pub threshold: ThresholdDelta,
    pub representatives: Vec<Vertex>,
    pub sample_size: usize,
    pub threshold_sample_size: usize,
    /// Sample members within Δ of more than one representative.
    pub conflicts: usize,
    /// Sub-cluster size after balancing.
    pub trimmed_size: usize,
}

/// Pairwise counts over `sample`, the threshold, and k representatives.
///
/// Every member's slab is copied |S'| times so all pairs compare at once;
/// the largest count climbs a converge-cast and the threshold is broadcast.
/// Member i carries the labels {i} ∪ {j : |N(i) ∩ N(j)| ≥ Δ} and the
/// smallest label of every member elects the representatives.
pub fn compute_rep(
    cluster: &mut ClusterState,
    graph: &Graph,
    edges: RegionId,
    sample: &SampledSet,
    k: usize,
    rule: DeltaRule,
) -> Result<RepElection> {
    let n = graph.vertex_count();
    let members = sample.members();
    let t = members.len();
    let layout = reorganize_nbr(cluster, graph, edges, members)?;
    let copies = copy_nbr(cluster, &layout, t)?;
    let pairs: Vec<(usize, usize)> = (0..t).flat_map(|i| (i + 1..t).map(move |j| (i, j))).collect();
    let counts = compare_grp(cluster, &layout, &layout, &pairs, &[copies.region()])?;

    let copy_region = cluster.region(copies.region()).clone();
    let mut partial: Vec<(usize, u64)> = Vec::new();
    for (&(i, j), &c) in pairs.iter().zip(&counts) {
        let m = copy_region.machine_of(copies.base(i, j)).unwrap_or(0);
        partial.push((m, c as u64));
    }
    let (_, _) = converge_cast(cluster, partial, u64::max)?;
    if matches!(rule, DeltaRule::Gap) {
        let recs = Records::place(cluster, "pair counts", counts.iter().map(|&c| c as u64).collect())?;
        let sorted = sort_records(cluster, recs, |&c| c)?;
        prefix_sum(cluster, sorted)?.release(cluster);
    }
    copies.release(cluster);
    layout.release(cluster);
    let threshold = delta_from_counts(&counts, n, rule)?;
    broadcast(cluster, &threshold.delta, 0)?;

    let mut label_sets: Vec<Vec<usize>> = (0..t).map(|i| vec![i]).collect();
    for (&(i, j), &c) in pairs.iter().zip(&counts) {
        if c as f64 >= threshold.delta {
            label_sets[i].push(j);
            label_sets[j].push(i);
        }
    }
    let reps = representative_k(cluster, &label_sets, k)?;
    Ok(RepElection {
        representatives: reps.members.iter().map(|&i| members[i]).collect(),
        threshold,
    })
}

/// Sub-cluster labels of S against the representatives.
#[derive(Debug)]
pub struct SubclusterLabels {
    /// Label of every member of S, in member order.
    pub labels: Vec<usize>,
    /// Members within Δ of several representatives; they keep the smallest.
    pub conflicts: usize,
    /// Slabs of S, kept for the cut step.
    pub layout: NeighborLayout,
}

/// Compares every u ∈ S with every representative: S's slabs are copied k
/// times and the representatives' |S| times. u takes the smallest label
/// whose count reaches Δ; a representative takes its own.
pub fn compute_subcluster(
    cluster: &mut ClusterState,
    graph: &Graph,
    edges: RegionId,
    sample: &SampledSet,
    representatives: &[Vertex],
    delta: f64,
) -> Result<SubclusterLabels> {
    let members = sample.members();
    let k = representatives.len();
    let layout = reorganize_nbr(cluster, graph, edges, members)?;
    let reps = reorganize_nbr(cluster, graph, edges, representatives)?;
    let copies_s = copy_nbr(cluster, &layout, k)?;
    let copies_r = copy_nbr(cluster, &reps, members.len())?;
    let pairs: Vec<(usize, usize)> = (0..members.len()).flat_map(|i| (0..k).map(move |j| (i, j))).collect();
    let counts = compare_grp(cluster, &layout, &reps, &pairs, &[copies_s.region(), copies_r.region()])?;
    copies_s.release(cluster);
    copies_r.release(cluster);
    reps.release(cluster);

    let mut labels = Vec::with_capacity(members.len());
    let mut conflicts = 0;
    for (i, &u) in members.iter().enumerate() {
        let row = &counts[i * k..(i + 1) * k];
        if let Some(own) = representatives.iter().position(|&r| r == u) {
            labels.push(own);
            continue;
        }
        let mut matches = (0..k).filter(|&j| row[j] as f64 >= delta);
        match matches.next() {
            Some(j) => {
                if matches.next().is_some() {
                    conflicts += 1;
                }
                labels.push(j);
            }
            None => {
                layout.release(cluster);
                return Err(Error::recovery(
                    "compute_subcluster",
                    format!("vertex {u} reaches delta = {delta:.3} with no representative"),
                ));
            }
        }
    }
    Ok(SubclusterLabels {
        labels,
        conflicts,
        layout,
    })
}

/// Balances the sub-clusters to at most `cap` members each (lowest ids
/// kept), then labels every vertex outside S by the sub-cluster it has the
/// most edges into, ties to the smallest label. Members of S keep their
/// labels. Returns the labels and the balanced size.
pub fn compute_cluster(
    cluster: &mut ClusterState,
    sample: &SampledSet,
    sub: SubclusterLabels,
    k: usize,
    cap: usize,
) -> Result<(Vec<usize>, usize)> {
    let balanced = match even_cluster(cluster, &sub.labels, k, Some(cap)) {
        Ok(b) => b,
        Err(e) => {
            sub.layout.release(cluster);
            return Err(e);
        }
    };
    let masked: Vec<Option<usize>> = sub
        .labels
        .iter()
        .zip(&balanced.active)
        .map(|(&l, &a)| a.then_some(l))
        .collect();
    let cut = compare_cut(cluster, &sub.layout, &masked, k, &[]);
    let n = sub.layout.vertex_count();
    sub.layout.release(cluster);
    let cut = cut?;
    let mut labels: Vec<usize> = (0..n as Vertex).map(|v| cut.best(v).0).collect();
    for (&u, &l) in sample.members().iter().zip(&sub.labels) {
        labels[u as usize] = l;
    }
    Ok((labels, balanced.xi))
}

/// Degree of vertex 0, computed by a neighbor visit and broadcast from the
/// machine that holds it.
fn first_degree(cluster: &mut ClusterState, graph: &Graph, edges: RegionId) -> Result<usize> {
    let n = graph.vertex_count();
    if n == 0 {
        return Err(Error::Param("empty graph".into()));
    }
    let degrees = visit_neighbors(cluster, graph, edges, &vec![1u64; n], 0, |a, b| a + b)?;
    let recs = Records::place(cluster, "degrees", degrees)?;
    let d = recs.items()[0];
    let holder = cluster.region(recs.region()).machine_of(0).unwrap_or(0);
    broadcast(cluster, &d, holder)?;
    recs.release(cluster);
    if d == 0 {
        return Err(Error::recovery("sample_size", "vertex 0 is isolated, d = 0"));
    }
    Ok(d as usize)
}

/// Common-neighbor clustering on the cluster: sizes from vertex 0's degree,
/// representatives from the threshold sample S', sub-clusters of S, then a
/// cut over the rest. Samples given in `opts` replace the random draws.
pub fn mpc_comm_nbr(
    cluster: &mut ClusterState,
    graph: &Graph,
    edges: RegionId,
    k: usize,
    seed: u64,
    opts: &CommNbrOptions,
) -> Result<CommNbrOutcome> {
    let n = graph.vertex_count();
    let d = first_degree(cluster, graph, edges)?;
    let size = prescribed_size(opts.sample_factor, n, k, d);
    let ln = ln_n(n);

    let draw_threshold = |cluster: &mut ClusterState, redraw: u64| match &opts.samples {
        Some(s) => adopt_set(cluster, n, &s.threshold),
        None => random_set(cluster, seed.wrapping_add(redraw << 32), TAG_DELTA, n, k as f64 * ln, opts.c_sel),
    };
    let sample = match &opts.samples {
        Some(s) => adopt_set(cluster, n, &s.main)?,
        None => random_set(cluster, seed, TAG_SAMPLE, n, size / opts.c_sel, opts.c_sel)?,
    };

    let mut redraw = 0;
    let (election, threshold_size) = loop {
        let s_prime = draw_threshold(cluster, redraw)?;
        let t = s_prime.len();
        let result = compute_rep(cluster, graph, edges, &s_prime, k, opts.delta_rule);
        s_prime.release(cluster);
        match result {
            Ok(e) => break (e, t),
            Err(e)
                if e.failure_stage() == Some("representative_k")
                    && opts.samples.is_none()
                    && redraw + 1 < MAX_REP_REDRAWS =>
            {
                redraw += 1;
            }
            Err(e) => {
                sample.release(cluster);
                return Err(e);
            }
        }
    };

    let delta = election.threshold.delta;
    let sub = match compute_subcluster(cluster, graph, edges, &sample, &election.representatives, delta) {
        Ok(s) => s,
        Err(e) => {
            sample.release(cluster);
            return Err(e);
        }
    };
    let conflicts = sub.conflicts;
    let cap = prescribed_size(opts.trim_factor, n, k, d) as usize;
    let result = compute_cluster(cluster, &sample, sub, k, cap);
    let sample_size = sample.len();
    sample.release(cluster);
    let (labels, trimmed_size) = result?;
    Ok(CommNbrOutcome {
        clustering: Clustering::from_labels(
            &labels,
            Provenance {
                algorithm: "mpc-commnbr".into(),
                params: format!("k={k} delta={delta:.4}"),
                seed,
            },
        ),
        threshold: election.threshold,
        representatives: election.representatives,
        sample_size,
        threshold_sample_size: threshold_size,
        conflicts,
        trimmed_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algos::{prepare_run, MpcSetup};
    use crate::mpc::BudgetMode;
    use crate::sbm::{generate_sbm, SbmInstance, SbmParams};
    use crate::seq::{comm_nbr, draw_samples, pair_counts, Samples};

    fn instance() -> SbmInstance {
        generate_sbm(SbmParams::new(40, 2, 0.7, 0.05, 3)).unwrap()
    }

    fn common(g: &Graph, u: Vertex, v: Vertex) -> usize {
        g.neighbors(u).iter().filter(|w| g.neighbors(v).contains(w)).count()
    }

    #[test]
    fn subcluster_counts_match_brute_force() {
        let inst = instance();
        let g = inst.graph();
        let mut run = prepare_run(&inst, &MpcSetup::default(), 200_000, BudgetMode::Linear).unwrap();
        let members: Vec<Vertex> = (0..80).step_by(3).collect();
        let sample = adopt_set(&mut run.cluster, 80, &members).unwrap();
        let reps = [1, 41];
        let delta = 8.0;
        let sub = compute_subcluster(&mut run.cluster, &g, run.placement.region, &sample, &reps, delta).unwrap();
        for (&u, &l) in members.iter().zip(&sub.labels) {
            let expected = reps
                .iter()
                .position(|&r| r == u)
                .or_else(|| reps.iter().position(|&r| common(&g, u, r) as f64 >= delta))
                .unwrap();
            assert_eq!(l, expected, "vertex {u}");
        }
        sub.layout.release(&mut run.cluster);
        assert!(run.cluster.ledger().violations().is_empty());
    }

    #[test]
    fn unmatched_member_is_a_recovery_failure() {
        let inst = instance();
        let g = inst.graph();
        let mut run = prepare_run(&inst, &MpcSetup::default(), 200_000, BudgetMode::Linear).unwrap();
        let sample = adopt_set(&mut run.cluster, 80, &[0, 5]).unwrap();
        let err = compute_subcluster(&mut run.cluster, &g, run.placement.region, &sample, &[0], 1e9).unwrap_err();
        assert_eq!(err.failure_stage(), Some("compute_subcluster"));
    }

    #[test]
    fn representatives_cover_both_blocks() {
        let inst = instance();
        let g = inst.graph();
        let mut run = prepare_run(&inst, &MpcSetup::default(), 200_000, BudgetMode::Linear).unwrap();
        let members: Vec<Vertex> = (0..80).step_by(4).collect();
        let sample = adopt_set(&mut run.cluster, 80, &members).unwrap();
        let e = compute_rep(&mut run.cluster, &g, run.placement.region, &sample, 2, DeltaRule::Gap).unwrap();
        let blocks: Vec<usize> = e.representatives.iter().map(|&r| inst.truth[r as usize]).collect();
        assert_eq!(blocks, vec![0, 1]);
        let counts = pair_counts(&g, &members);
        assert_eq!(e.threshold, delta_from_counts(&counts, 80, DeltaRule::Gap).unwrap());
    }

    #[test]
    fn shared_samples_match_sequential() {
        let inst = instance();
        let g = inst.graph();
        let base = CommNbrOptions {
            delta_rule: DeltaRule::Gap,
            ..CommNbrOptions::default()
        };
        let Samples { main, threshold } = draw_samples(&g, 2, 9, &base).unwrap();
        let opts = CommNbrOptions {
            samples: Some(Samples { main, threshold }),
            ..base
        };
        let seq = comm_nbr(&g, 2, 9, &opts).unwrap();
        let words = crate::algos::comm_nbr_words(80, inst.edges.len(), 2, &opts);
        let mut run = prepare_run(&inst, &MpcSetup::default(), words, BudgetMode::Linear).unwrap();
        let mpc = mpc_comm_nbr(&mut run.cluster, &g, run.placement.region, 2, 9, &opts).unwrap();
        assert!(mpc.clustering.same_partition(&seq));
        assert!(run.cluster.ledger().violations().is_empty());
    }
}
