//! Tree communication and the charged primitives.
//!
//! Broadcast and converge-cast move real messages through `exchange_round`.
//! Sorting, indexing, prefix sums, set copies and neighbor visits are
//! computed directly and charged `c·max(1, ⌈log_s items⌉)` rounds, each round
//! moving the words of the regions involved.

use std::collections::BTreeMap;

use num_bigint::BigUint;

use super::cluster::{ClusterState, RegionId};
use super::codec::{WordCodec, WordLen};
use crate::error::{Error, Result};
use crate::graph::{Graph, Vertex};

/// Sends `value` from `origin` to every machine over a fan-out tree of
/// degree max(2, ⌊s/w⌋). Returns the rounds used, ⌈log_s M⌉ for one-word
/// values (one round when M = 1).
pub fn broadcast<T: WordCodec>(cluster: &mut ClusterState, value: &T, origin: usize) -> Result<usize> {
    let w = value.word_len();
    let s = cluster.s();
    if w > s {
        return Err(Error::Model(format!("broadcast value of {w} words exceeds s = {s}")));
    }
    let m = cluster.machines();
    let base: Vec<usize> = (0..m).map(|i| cluster.buffered(i)).collect();
    let machine = |p: usize| (origin + p) % m;
    let rounds = if m == 1 {
        cluster.exchange_counts("broadcast", &[(origin, origin, w)])?;
        1
    } else {
        let fan = (s / w).max(2);
        let mut covered = 1;
        let mut rounds = 0;
        while covered < m {
            let next = m.min(covered.saturating_mul(fan));
            let sends: Vec<(usize, usize, usize)> = (0..covered)
                .flat_map(|h| {
                    let lo = covered + h * (fan - 1);
                    let hi = (lo + fan - 1).min(next);
                    (lo..hi).map(move |p| (machine(h), machine(p), w))
                })
                .collect();
            cluster.exchange_counts("broadcast", &sends)?;
            covered = next;
            rounds += 1;
        }
        rounds
    };
    for (i, len) in base.into_iter().enumerate() {
        cluster.truncate_buffer(i, len);
    }
    Ok(rounds)
}

/// Combines one value per machine up a reduction tree rooted at machine 0.
///
/// The fan-in is max(2, ⌊(s − h)/w⌋), where h is the largest residency before
/// the operation and w the widest value, so on an otherwise empty cluster a
/// one-word reduction takes ⌈log_s M⌉ rounds. `combine` must be separable;
/// the result then does not depend on the tree shape. Several values given
/// for the same machine are combined locally first.
pub fn converge_cast<T: WordLen>(
    cluster: &mut ClusterState,
    values: impl IntoIterator<Item = (usize, T)>,
    combine: impl Fn(T, T) -> T,
) -> Result<(Option<T>, usize)> {
    let m = cluster.machines();
    let s = cluster.s();
    let mut held: BTreeMap<usize, T> = BTreeMap::new();
    for (machine, v) in values {
        if machine >= m {
            return Err(Error::Param(format!("no machine {machine}")));
        }
        let v = match held.remove(&machine) {
            Some(acc) => combine(acc, v),
            None => v,
        };
        held.insert(machine, v);
    }
    let mut base: BTreeMap<usize, usize> = held.keys().map(|&i| (i, cluster.buffered(i))).chain([(0, cluster.buffered(0))]).collect();
    let h = (0..m).map(|i| cluster.resident(i)).max().unwrap_or(0);
    let w = held.values().map(WordLen::word_len).max().unwrap_or(1);
    let fan = (s.saturating_sub(h) / w).max(2);

    let result = (|| {
        for (&i, v) in &held {
            cluster.load_words(i, v.word_len())?;
        }
        if m == 1 {
            let sends: Vec<_> = held.get(&0).map(|v| (0, 0, v.word_len())).into_iter().collect();
            cluster.exchange_counts("converge_cast", &sends)?;
            return Ok((held.remove(&0), 1));
        }
        let mut rounds = 0;
        let mut group = 1usize;
        while group < m {
            let step = group.saturating_mul(fan);
            // Holders that are not aligned to the new step send to their parent.
            let children: Vec<usize> = held.keys().copied().filter(|&c| c % step != 0).collect();
            let sends: Vec<(usize, usize, usize)> = children
                .iter()
                .map(|&c| (c, c - c % step, held[&c].word_len()))
                .collect();
            for &child in &children {
                cluster.truncate_buffer(child, base[&child]);
                let parent = child - child % step;
                base.entry(parent).or_insert_with(|| cluster.buffered(parent));
            }
            cluster.exchange_counts("converge_cast", &sends)?;
            let mut parents = Vec::new();
            for &child in &children {
                let parent = child - child % step;
                let v = held.remove(&child).expect("child holds a value");
                let v = match held.remove(&parent) {
                    Some(acc) => combine(acc, v),
                    None => v,
                };
                held.insert(parent, v);
                parents.push(parent);
            }
            parents.dedup();
            for &parent in &parents {
                cluster.truncate_buffer(parent, base[&parent]);
                cluster.load_words(parent, held[&parent].word_len())?;
            }
            group = step;
            rounds += 1;
        }
        Ok((held.remove(&0), rounds))
    })();
    for (&i, &len) in &base {
        cluster.truncate_buffer(i, len);
    }
    result
}

/// Records stored as one region in canonical (machine, offset) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Records<T> {
    items: Vec<T>,
    region: RegionId,
}

fn total_words<T: WordLen>(items: &[T]) -> usize {
    items.iter().map(WordLen::word_len).sum()
}

impl<T: WordLen> Records<T> {
    /// Stores `items` contiguously on the lowest machines with free space.
    pub fn place(cluster: &mut ClusterState, name: &str, items: Vec<T>) -> Result<Self> {
        let region = cluster.alloc(name, total_words(&items))?;
        Ok(Records { items, region })
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn region(&self) -> RegionId {
        self.region
    }

    /// Frees the region and hands back the items.
    pub fn release(self, cluster: &mut ClusterState) -> Vec<T> {
        cluster.free(self.region);
        self.items
    }

    fn relocate<U: WordLen>(
        self,
        cluster: &mut ClusterState,
        name: &str,
        items: Vec<U>,
    ) -> Result<Records<U>> {
        cluster.free(self.region);
        Records::place(cluster, name, items)
    }
}

/// Stable sort by `key`, re-laid out so machines hold consecutive slabs.
pub fn sort_records<T: WordLen, K: Ord>(
    cluster: &mut ClusterState,
    records: Records<T>,
    key: impl Fn(&T) -> K,
) -> Result<Records<T>> {
    let c = cluster.config().c_sort;
    cluster.charge_log("sort", c, records.len(), &[records.region])?;
    let name = cluster.region(records.region).name.clone();
    let mut records = records;
    let mut items = std::mem::take(&mut records.items);
    items.sort_by_key(|t| key(t));
    records.relocate(cluster, &name, items)
}

/// Tags every record with its 1-based position in canonical order.
pub fn index_records<T: WordLen>(
    cluster: &mut ClusterState,
    records: Records<T>,
) -> Result<Records<(T, u64)>> {
    let c = cluster.config().c_idx;
    cluster.charge_log("index", c, records.len(), &[records.region])?;
    let name = cluster.region(records.region).name.clone();
    let mut records = records;
    let items: Vec<(T, u64)> = std::mem::take(&mut records.items)
        .into_iter()
        .zip(1u64..)
        .collect();
    records.relocate(cluster, &name, items)
}

/// Replaces every value by itself plus all values before it. Sums wider than
/// a word occupy several words.
pub fn prefix_sum(cluster: &mut ClusterState, records: Records<u64>) -> Result<Records<BigUint>> {
    let c = cluster.config().c_ps;
    cluster.charge_log("prefix_sum", c, records.len(), &[records.region])?;
    let name = cluster.region(records.region).name.clone();
    let mut records = records;
    let mut acc = BigUint::default();
    let items: Vec<BigUint> = std::mem::take(&mut records.items)
        .into_iter()
        .map(|v| {
            acc += v;
            acc.clone()
        })
        .collect();
    records.relocate(cluster, &name, items)
}

/// Position of one copy produced by `copy_sets`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slab {
    pub set: usize,
    pub copy: usize,
    /// Word offset of the slab inside the copy region.
    pub offset: usize,
    pub words: usize,
}

/// Layout of replicated sets: copy j of set i is one contiguous slab, sets
/// in input order, copies of a set adjacent.
#[derive(Debug, Clone, PartialEq)]
pub struct CopyLayout {
    pub region: RegionId,
    pub slabs: Vec<Slab>,
    first_slab: Vec<usize>,
}

impl CopyLayout {
    pub fn slab(&self, set: usize, copy: usize) -> &Slab {
        &self.slabs[self.first_slab[set] + copy]
    }

    pub fn total_words(&self) -> usize {
        self.slabs.iter().map(|s| s.words).sum()
    }
}

/// Allocates `multiplicities[i]` copies of a `set_words[i]`-word set each.
/// Contents stay with the caller: every copy is identical to its source.
pub fn copy_sets(
    cluster: &mut ClusterState,
    set_words: &[usize],
    multiplicities: &[usize],
) -> Result<CopyLayout> {
    if set_words.len() != multiplicities.len() {
        return Err(Error::Param("one multiplicity per set".into()));
    }
    let mut slabs = Vec::new();
    let mut first_slab = Vec::with_capacity(set_words.len());
    let mut offset = 0;
    for (set, (&words, &mult)) in set_words.iter().zip(multiplicities).enumerate() {
        first_slab.push(slabs.len());
        for copy in 0..mult {
            slabs.push(Slab {
                set,
                copy,
                offset,
                words,
            });
            offset += words;
        }
    }
    let region = cluster.alloc("copies", offset)?;
    let c = cluster.config().c_copy;
    cluster.charge_log("copy_sets", c, offset, &[region])?;
    Ok(CopyLayout {
        region,
        slabs,
        first_slab,
    })
}

/// For every vertex u, folds `values[v]` over v ∈ N(u) starting from
/// `identity`. The edge records in `edges` carry the traffic.
pub fn visit_neighbors<T: Clone>(
    cluster: &mut ClusterState,
    graph: &Graph,
    edges: RegionId,
    values: &[T],
    identity: T,
    combine: impl Fn(T, &T) -> T,
) -> Result<Vec<T>> {
    let c = cluster.config().c_nbr;
    cluster.charge_log("visit_neighbors", c, graph.vertex_count(), &[edges])?;
    Ok((0..graph.vertex_count() as Vertex)
        .map(|u| {
            graph
                .neighbors(u)
                .iter()
                .fold(identity.clone(), |acc, &v| combine(acc, &values[v as usize]))
        })
        .collect())
}
