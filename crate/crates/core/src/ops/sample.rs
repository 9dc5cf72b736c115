use crate::error::{Error, Result};
use crate::graph::Vertex;
use crate::mpc::{broadcast, prefix_sum, ClusterState, Records, RegionId};
use crate::rng::sample_bernoulli;

/// Reseeded attempts before `random_set` gives up.
pub const MAX_SAMPLE_ATTEMPTS: u64 = 8;

/// Selection probability c_sel·X/N, capped at one.
pub fn selection_probability(x: f64, c_sel: f64, vertex_count: usize) -> f64 {
    (c_sel * x / vertex_count as f64).min(1.0)
}

/// The Bernoulli sample behind `random_set`, without any cluster
/// accounting. Attempt `a` uses seed `seed + a`; a sample is accepted when
/// its size lies in [X/2, 2·c_sel·X] or when every vertex is selected with
/// certainty. Returns the members and the number of attempts used.
pub fn sample_members(
    seed: u64,
    tag: u64,
    vertex_count: usize,
    x: f64,
    c_sel: f64,
) -> Result<(Vec<Vertex>, u64)> {
    let prob = selection_probability(x, c_sel, vertex_count);
    if prob >= 1.0 {
        return Ok(((0..vertex_count as Vertex).collect(), 1));
    }
    let (lo, hi) = (x / 2.0, 2.0 * c_sel * x);
    for attempt in 0..MAX_SAMPLE_ATTEMPTS {
        let members = sample_bernoulli(seed.wrapping_add(attempt), tag, vertex_count, prob);
        let size = members.len() as f64;
        if size >= lo && size <= hi {
            return Ok((members, attempt + 1));
        }
    }
    Err(Error::recovery(
        "random_set",
        format!("no sample of size within [{lo:.1}, {hi:.1}] after {MAX_SAMPLE_ATTEMPTS} attempts"),
    ))
}

/// A random vertex subset stored as `(vertex, index)` records.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSet {
    members: Vec<Vertex>,
    region: RegionId,
    attempts: u64,
}

impl SampledSet {
    /// Members in increasing id order; a member's index is its position.
    pub fn members(&self) -> &[Vertex] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn index_of(&self, v: Vertex) -> Option<usize> {
        self.members.binary_search(&v).ok()
    }

    pub fn attempts(&self) -> u64 {
        self.attempts
    }

    pub fn region(&self) -> RegionId {
        self.region
    }

    pub fn release(self, cluster: &mut ClusterState) -> Vec<Vertex> {
        cluster.free(self.region);
        self.members
    }
}

/// Selects every vertex independently with probability c_sel·X/N and
/// builds the index table from a prefix sum over the selection flags.
pub fn random_set(
    cluster: &mut ClusterState,
    seed: u64,
    tag: u64,
    vertex_count: usize,
    x: f64,
    c_sel: f64,
) -> Result<SampledSet> {
    let (members, attempts) = match sample_members(seed, tag, vertex_count, x, c_sel) {
        Ok(found) => found,
        Err(e) => {
            for _ in 0..MAX_SAMPLE_ATTEMPTS {
                charge_attempt(cluster, vertex_count, &[])?;
            }
            return Err(e);
        }
    };
    for _ in 1..attempts {
        charge_attempt(cluster, vertex_count, &[])?;
    }
    charge_attempt(cluster, vertex_count, &members)?;
    let region = cluster.alloc("sample", 2 * members.len())?;
    Ok(SampledSet {
        members,
        region,
        attempts,
    })
}

/// Stores a vertex set drawn elsewhere, charged like a one-attempt
/// `random_set`. Members are sorted and deduplicated.
pub fn adopt_set(cluster: &mut ClusterState, vertex_count: usize, members: &[Vertex]) -> Result<SampledSet> {
    let mut members = members.to_vec();
    members.sort_unstable();
    members.dedup();
    if let Some(&v) = members.iter().find(|&&v| v as usize >= vertex_count) {
        return Err(Error::Param(format!("vertex {v} out of range")));
    }
    charge_attempt(cluster, vertex_count, &members)?;
    let region = cluster.alloc("sample", 2 * members.len())?;
    Ok(SampledSet {
        members,
        region,
        attempts: 1,
    })
}

/// One sampling attempt: prefix sum over the flags, then the size is
/// broadcast from the machine holding the last prefix.
fn charge_attempt(cluster: &mut ClusterState, vertex_count: usize, members: &[Vertex]) -> Result<()> {
    let mut flags = vec![0u64; vertex_count];
    for &v in members {
        flags[v as usize] = 1;
    }
    let flags = Records::place(cluster, "sample flags", flags)?;
    let table = prefix_sum(cluster, flags)?;
    let size = table.items().last().cloned().unwrap_or_default();
    let last = cluster
        .region(table.region())
        .extents
        .last()
        .map_or(0, |e| e.first + e.machines - 1);
    table.release(cluster);
    broadcast(cluster, &size, last)?;
    Ok(())
}
