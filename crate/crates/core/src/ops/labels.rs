use crate::error::{Error, Result};
use crate::graph::Vertex;
use crate::mpc::{ceil_log, index_records, prefix_sum, sort_records, ClusterState, Records, RegionId};

use super::layout::NeighborLayout;

/// Outcome of `even_cluster`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Balanced {
    /// Survivors per label.
    pub xi: usize,
    /// Per member: whether it survived.
    pub active: Vec<bool>,
}

/// Keeps, for every label in [k], the `xi` lowest-ranked members carrying
/// it, where `xi` is the smallest label count (optionally capped). Members
/// are ranked by their position in `labels`; the rest are marked inactive
/// in place.
pub fn even_cluster(
    cluster: &mut ClusterState,
    labels: &[usize],
    k: usize,
    cap: Option<usize>,
) -> Result<Balanced> {
    let mut counts = vec![0usize; k];
    for &l in labels {
        if l >= k {
            return Err(Error::Contract(format!("label {l} outside [0, {k})")));
        }
        counts[l] += 1;
    }
    let recs = Records::place(
        cluster,
        "even_cluster",
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| (l as u64, i as u64))
            .collect(),
    )?;
    let sorted = sort_records(cluster, recs, |r| r.0)?;
    let ranked = index_records(cluster, sorted)?;
    let ones = Records::place(cluster, "label counts", vec![1u64; labels.len()])?;
    prefix_sum(cluster, ones)?.release(cluster);
    let ranked = ranked.release(cluster);

    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::recovery(
            "even_cluster",
            format!("label {missing} has no members"),
        ));
    }
    let mut xi = counts.iter().copied().min().unwrap_or(0);
    if let Some(cap) = cap {
        xi = xi.min(cap);
    }
    let mut start = vec![0usize; k];
    for l in 1..k {
        start[l] = start[l - 1] + counts[l - 1];
    }
    let mut active = vec![false; labels.len()];
    for ((label, member), rank) in ranked {
        if (rank as usize - 1) - start[label as usize] < xi {
            active[member as usize] = true;
        }
    }
    Ok(Balanced { xi, active })
}

/// Elected representatives, one per label, in increasing label order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Representatives {
    /// Member index of each representative.
    pub members: Vec<usize>,
    /// The label each representative stands for.
    pub labels: Vec<usize>,
    /// The label every member kept (its smallest).
    pub kept: Vec<usize>,
}

/// Every member keeps its smallest label; after a stable sort by label the
/// first member of each label is elected. Succeeds when at least k distinct
/// labels survive and returns the representatives of the k smallest.
pub fn representative_k(
    cluster: &mut ClusterState,
    label_sets: &[Vec<usize>],
    k: usize,
) -> Result<Representatives> {
    let kept: Vec<usize> = label_sets
        .iter()
        .enumerate()
        .map(|(i, set)| {
            set.iter()
                .copied()
                .min()
                .ok_or_else(|| Error::Contract(format!("member {i} has no labels")))
        })
        .collect::<Result<_>>()?;
    let recs = Records::place(
        cluster,
        "representatives",
        kept.iter()
            .enumerate()
            .map(|(i, &l)| (l as u64, i as u64))
            .collect(),
    )?;
    let sorted = sort_records(cluster, recs, |r| r.0)?;
    let ranked = index_records(cluster, sorted)?.release(cluster);
    let mut members = Vec::new();
    let mut labels = Vec::new();
    for ((label, member), _) in ranked {
        if labels.last() != Some(&(label as usize)) {
            labels.push(label as usize);
            members.push(member as usize);
        }
    }
    if labels.len() < k {
        return Err(Error::recovery(
            "representative_k",
            format!("only {} distinct labels, need {k}", labels.len()),
        ));
    }
    members.truncate(k);
    labels.truncate(k);
    Ok(Representatives {
        members,
        labels,
        kept,
    })
}

/// Per-vertex edge counts into each labeled part of a sampled set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutCounts {
    k: usize,
    counts: Vec<u32>,
}

impl CutCounts {
    /// n(v, S_label).
    pub fn count(&self, v: Vertex, label: usize) -> u32 {
        self.counts[v as usize * self.k + label]
    }

    /// (argmax label, max count) for `v`, ties to the smallest label.
    pub fn best(&self, v: Vertex) -> (usize, u32) {
        let row = &self.counts[v as usize * self.k..(v as usize + 1) * self.k];
        let mut best = (0, row[0]);
        for (l, &c) in row.iter().enumerate().skip(1) {
            if c > best.1 {
                best = (l, c);
            }
        }
        best
    }
}

/// For every vertex v, counts the active members of each label adjacent to
/// v by aggregating slot v down the member slabs. `labels[i]` is `None` for
/// inactive members; labels outside [k] are a contract error.
pub fn compare_cut(
    cluster: &mut ClusterState,
    layout: &NeighborLayout,
    labels: &[Option<usize>],
    k: usize,
    traffic: &[RegionId],
) -> Result<CutCounts> {
    if labels.len() != layout.len() || k == 0 {
        return Err(Error::Contract("one label slot per layout member".into()));
    }
    let n = layout.vertex_count();
    let c = cluster.config().c_nbr;
    let rounds = c * ceil_log(cluster.s(), layout.len().max(n)) + ceil_log(cluster.s(), k);
    let mut regions = vec![layout.region()];
    regions.extend_from_slice(traffic);
    cluster.charge("compare_cut", rounds, &regions)?;
    let mut counts = vec![0u32; n * k];
    for (i, label) in labels.iter().enumerate() {
        let Some(label) = *label else { continue };
        if label >= k {
            return Err(Error::Contract(format!("label {label} outside [0, {k})")));
        }
        for (w, &word) in layout.slab(i).iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let v = w * 64 + bits.trailing_zeros() as usize;
                counts[v * k + label] += 1;
                bits &= bits - 1;
            }
        }
    }
    Ok(CutCounts { k, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::mpc::MpcConfig;
    use crate::ops::reorganize_nbr;

    fn cluster() -> ClusterState {
        ClusterState::new(64, 16, MpcConfig::default(), 16).unwrap()
    }

    #[test]
    fn balanced_counts() {
        let mut c = cluster();
        let b = even_cluster(&mut c, &[0, 1, 2, 0, 1, 2, 2, 1, 0], 3, None).unwrap();
        assert_eq!(b.xi, 3);
        assert!(b.active.iter().all(|&a| a));
    }

    #[test]
    fn surplus_members_deactivated() {
        let mut c = cluster();
        let labels = [1, 0, 1, 0, 0, 0, 1, 0];
        let b = even_cluster(&mut c, &labels, 2, None).unwrap();
        assert_eq!(b.xi, 3);
        assert_eq!(
            b.active,
            vec![true, true, true, true, true, false, true, false]
        );
        let capped = even_cluster(&mut c, &labels, 2, Some(1)).unwrap();
        assert_eq!(capped.active.iter().filter(|&&a| a).count(), 2);
    }

    #[test]
    fn absent_label_fails() {
        let mut c = cluster();
        let err = even_cluster(&mut c, &[0, 0, 0, 0], 2, None).unwrap_err();
        assert_eq!(err.failure_stage(), Some("even_cluster"));
    }

    #[test]
    fn min_label_representatives() {
        let mut c = cluster();
        let reps = representative_k(&mut c, &[vec![1, 2], vec![2], vec![1]], 2).unwrap();
        assert_eq!(reps.kept, vec![1, 2, 1]);
        assert_eq!(reps.members, vec![0, 1]);
        assert_eq!(reps.labels, vec![1, 2]);

        let one = representative_k(&mut c, &[vec![4], vec![4]], 1).unwrap();
        assert_eq!(one.members.len(), 1);
        let err = representative_k(&mut c, &[vec![0], vec![0]], 2).unwrap_err();
        assert_eq!(err.failure_stage(), Some("representative_k"));
    }

    #[test]
    fn cut_argmax() {
        // 5 is adjacent to members 0, 1 (label 0) and 2 (label 1); 6 to one
        // member of each; 7 to nobody.
        let g = Graph::from_edges(8, &[(0, 5), (1, 5), (2, 5), (0, 6), (2, 6)]).unwrap();
        let mut c = cluster();
        let e = c.alloc("edges", 10).unwrap();
        let l = reorganize_nbr(&mut c, &g, e, &[0, 1, 2]).unwrap();
        let cut = compare_cut(&mut c, &l, &[Some(0), Some(0), Some(1)], 2, &[]).unwrap();
        assert_eq!(cut.best(5), (0, 2));
        assert_eq!(cut.best(6), (0, 1));
        assert_eq!(cut.best(7), (0, 0));
        let masked = compare_cut(&mut c, &l, &[None, Some(0), Some(1)], 2, &[]).unwrap();
        assert_eq!(masked.count(5, 0), 1);
    }
}
