use num_bigint::{BigInt, BigUint};
use num_traits::ToPrimitive;

use super::expansion::{expansion_coefficients, Expansion};
use super::walks::{
    aix_sum_with_riders, broadcast_values, closed_walk_counts, compute_arx, value_machines, walk_rows, WalkTable,
};
use crate::clustering::{Clustering, Provenance};
use crate::error::{Error, Result};
use crate::exact::{rational_q, within, SquaredNorm};
use crate::graph::{Graph, Vertex};
use crate::mpc::{broadcast, converge_cast, copy_sets, sort_records, ClusterState, Records, RegionId, WordLen};
use crate::ops::{random_set, representative_k, SampledSet};
use crate::rng::TAG_RANDOM_SET;
use crate::seq::{ln_n, resolve_threshold, PowerOutcome, PowerParams, PowerThreshold};

/// Per-vertex active flags, one word per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    flags: Vec<bool>,
    machines: Vec<usize>,
    region: RegionId,
    leader: usize,
}

impl ActiveSet {
    /// Every vertex active; machine 0 leads.
    pub fn new(cluster: &mut ClusterState, vertex_count: usize) -> Result<Self> {
        Self::from_flags(cluster, vec![true; vertex_count])
    }

    pub fn from_flags(cluster: &mut ClusterState, flags: Vec<bool>) -> Result<Self> {
        let region = cluster.alloc("active", flags.len())?;
        let machines = value_machines(cluster.region(region), flags.iter().map(|_| 1));
        Ok(ActiveSet {
            flags,
            machines,
            region,
            leader: 0,
        })
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn is_set(&self, v: Vertex) -> bool {
        self.flags[v as usize]
    }

    pub fn clear(&mut self, v: Vertex) {
        self.flags[v as usize] = false;
    }

    pub fn leader(&self) -> usize {
        self.leader
    }

    /// Machine holding v's flag and per-vertex state.
    pub fn machine_of(&self, v: Vertex) -> usize {
        self.machines[v as usize]
    }

    pub fn release(self, cluster: &mut ClusterState) {
        cluster.free(self.region);
    }

    /// One value per machine holding flags, folded from its vertices.
    fn per_machine<T: Copy>(&self, pick: impl Fn(Vertex) -> Option<T>, combine: impl Fn(T, T) -> T) -> Vec<(usize, T)> {
        let mut out: Vec<(usize, T)> = Vec::new();
        for (v, &m) in self.machines.iter().enumerate() {
            let Some(x) = pick(v as Vertex) else { continue };
            match out.last_mut() {
                Some((last, acc)) if *last == m => *acc = combine(*acc, x),
                _ => out.push((m, x)),
            }
        }
        out
    }
}

/// Whether any vertex is still active, decided at the leader by an OR
/// converge-cast over the machines' flags.
pub fn is_active(cluster: &mut ClusterState, set: &ActiveSet) -> Result<bool> {
    let values = set.per_machine(|v| Some(set.is_set(v)), |a, b| a || b);
    let (any, _) = converge_cast(cluster, values, |a, b| a || b)?;
    Ok(any.unwrap_or(false))
}

/// Lowest active id, found at the leader and broadcast to every machine.
fn lowest_active(cluster: &mut ClusterState, set: &ActiveSet) -> Result<Option<Vertex>> {
    let values = set.per_machine(|v| set.is_set(v).then_some(v as u64), u64::min);
    let (min, _) = converge_cast(cluster, values, u64::min)?;
    if let Some(v) = min {
        broadcast(cluster, &v, set.leader())?;
    }
    Ok(min.map(|v| v as Vertex))
}

/// Tables shared by every distance query of a run.
struct NormTables {
    table: WalkTable,
    expansion: Expansion,
    /// b^{2r}·1_uᵀ(A − qJ)^{2r}1_u.
    self_values: Vec<BigInt>,
    /// The same numbers in i128 when they all fit, for the hot loop.
    small: Option<SmallTables>,
    regions: Vec<RegionId>,
}

struct SmallTables {
    scale: i128,
    /// a[i][u] for i ≤ 2r.
    levels: Vec<Vec<i128>>,
    self_values: Vec<i128>,
}

impl SmallTables {
    fn new(table: &WalkTable, expansion: &Expansion, self_values: &[BigInt]) -> Option<Self> {
        Some(SmallTables {
            scale: expansion.scale().to_i128()?,
            levels: (0..=2 * table.r())
                .map(|i| table.level(i).iter().map(ToPrimitive::to_i128).collect())
                .collect::<Option<_>>()?,
            self_values: self_values.iter().map(ToPrimitive::to_i128).collect::<Option<_>>()?,
        })
    }
}

/// Everything the distance from one vertex needs.
struct Anchor {
    weights: Vec<BigInt>,
    small_weights: Option<Vec<i128>>,
    self_value: BigInt,
}

impl NormTables {
    fn anchor(&self, v: Vertex) -> Anchor {
        let weights = self.expansion.anchor_weights(&self.table, v);
        let small_weights = self
            .small
            .as_ref()
            .and_then(|_| weights.iter().map(ToPrimitive::to_i128).collect());
        Anchor {
            weights,
            small_weights,
            self_value: self.self_values[v as usize].clone(),
        }
    }

    /// Numerator of the squared distance, if i128 arithmetic suffices.
    fn small_numerator(&self, anchor: &Anchor, u: Vertex, pure_uv: &BigUint) -> Option<i128> {
        let small = self.small.as_ref()?;
        let weights = anchor.small_weights.as_ref()?;
        let u = u as usize;
        let mut cross = small.scale.checked_mul(pure_uv.to_i128()?)?;
        for (level, &w) in small.levels.iter().zip(weights) {
            cross = cross.checked_add(w.checked_mul(level[u])?)?;
        }
        small.self_values[u]
            .checked_sub(cross.checked_mul(2)?)?
            .checked_add(anchor.self_value.to_i128()?)
    }

    fn distance(&self, anchor: &Anchor, u: Vertex, pure_uv: &BigUint) -> f64 {
        let num = match self.small_numerator(anchor, u, pure_uv) {
            Some(num) => BigInt::from(num),
            None => {
                let cross = self.expansion.pair_value(&self.table, &anchor.weights, u, pure_uv);
                &self.self_values[u as usize] - BigInt::from(2) * cross + &anchor.self_value
            }
        };
        SquaredNorm {
            num,
            den: self.expansion.scale().clone(),
        }
        .distance()
    }

    fn release(self, cluster: &mut ClusterState) {
        for r in self.regions {
            cluster.free(r);
        }
    }
}

/// How many of `wanted` concurrent diffusions of `per_source` words fit
/// beside `reserve` further words; at least one. Under a budget, room is
/// also left for broadcasts and converge-casts, which may put s/2 words on
/// every machine.
fn batch_size(cluster: &ClusterState, wanted: usize, per_source: usize, reserve: usize) -> usize {
    let mut room = cluster.total_free().saturating_sub(reserve);
    if let Some(budget) = cluster.budget() {
        // Nothing is broadcast while a batch is open; a word per machine
        // covers the one-word reductions that ride along.
        let transient = cluster.machines();
        room = room.min(budget.saturating_sub(cluster.resident_total() + reserve + transient));
    }
    (room / per_source.max(1)).clamp(1, wanted.max(1))
}

/// Space for concurrent diffusions: a copy of the edge records and a row
/// of values for every source.
struct DiffusionBatch {
    size: usize,
    copies: RegionId,
    rows: RegionId,
}

impl DiffusionBatch {
    fn open(cluster: &mut ClusterState, edge_words: usize, size: usize, row_words: usize) -> Result<Self> {
        let copies = copy_sets(cluster, &[edge_words], &[size])?.region;
        let rows = cluster.alloc("rows", size * row_words)?;
        Ok(DiffusionBatch { size, copies, rows })
    }

    /// `steps` neighbor-sum phases over all sources of the batch at once.
    fn diffuse(&self, cluster: &mut ClusterState, vertex_count: usize, steps: usize) -> Result<()> {
        let c = cluster.config().c_nbr;
        for _ in 0..steps {
            cluster.charge_log("visit_neighbors", c, self.size * vertex_count, &[self.copies])?;
        }
        Ok(())
    }

    /// Routes every (source, vertex) value to where it is consumed.
    fn gather(&self, cluster: &mut ClusterState, vertex_count: usize) -> Result<()> {
        let c = cluster.config().c_sort;
        cluster.charge_log("sort", c, self.size * vertex_count, &[self.rows])?;
        Ok(())
    }

    fn close(self, cluster: &mut ClusterState) {
        cluster.free(self.copies);
        cluster.free(self.rows);
    }
}

/// Walk table, expansion coefficients and the diagonal (A^{2r})_{u,u}.
///
/// The diagonal needs an r-step diffusion from every vertex, summing the
/// squared counts back at the source. Diffusions run concurrently in
/// batches sized to the free space; the first batch shares rounds with the
/// first r phases of the walk table.
fn build_tables(cluster: &mut ClusterState, graph: &Graph, edges: RegionId, r: usize, q: f64) -> Result<NormTables> {
    let n = graph.vertex_count();
    let q = rational_q(q)?;
    let diag = closed_walk_counts(graph, r);
    let row_width = diag.iter().map(|d| d.sqrt().word_len()).max().unwrap_or(1);
    let edge_words = 2 * graph.edge_count();
    let table_reserve = (2 * r + 4) * n * 2;
    let per_source = n * row_width + edge_words;
    let batch = batch_size(cluster, n, per_source, table_reserve);

    let first = DiffusionBatch::open(cluster, edge_words, batch, n * row_width)?;
    let (table, mut regions) = aix_sum_with_riders(cluster, graph, edges, r, Some((batch * n, first.copies)), r)?;
    first.gather(cluster, n)?;
    first.close(cluster);
    let mut done = batch;
    while done < n {
        let next = DiffusionBatch::open(cluster, edge_words, batch.min(n - done), n * row_width)?;
        next.diffuse(cluster, n, r)?;
        next.gather(cluster, n)?;
        done += next.size;
        next.close(cluster);
    }
    regions.push(cluster.alloc("diagonal", diag.iter().map(WordLen::word_len).sum())?);

    // Every machine derives the coefficients from the totals.
    broadcast_values(cluster, table.totals(), 0)?;
    let expansion = expansion_coefficients(r, &q, n, table.totals())?;
    let self_values: Vec<BigInt> = (0..n as Vertex)
        .map(|u| {
            let w = expansion.anchor_weights(&table, u);
            expansion.pair_value(&table, &w, u, &diag[u as usize])
        })
        .collect();
    let small = SmallTables::new(&table, &expansion, &self_values);
    Ok(NormTables {
        table,
        expansion,
        self_values,
        small,
        regions,
    })
}

/// Resolves the threshold from vertex 0's distances; the gap rule sorts
/// them first. The result is broadcast from the leader.
fn charged_threshold(
    cluster: &mut ClusterState,
    mode: PowerThreshold,
    profile: &[f64],
    params: &PowerParams,
) -> Result<f64> {
    if matches!(mode, PowerThreshold::Gap) {
        let recs = Records::place(cluster, "anchor distances", profile.to_vec())?;
        sort_records(cluster, recs, |d| d.to_bits())?.release(cluster);
    }
    let delta = resolve_threshold(mode, &profile[1..], profile.len(), params)?;
    broadcast(cluster, &delta, 0)?;
    Ok(delta)
}

fn check_params(graph: &Graph, params: &PowerParams) -> Result<()> {
    if params.r < 1 {
        return Err(Error::Contract("power iteration needs r >= 1".into()));
    }
    if params.k < 1 {
        return Err(Error::Param("k must be positive".into()));
    }
    if graph.vertex_count() == 0 {
        return Err(Error::Param("empty graph".into()));
    }
    Ok(())
}

/// Peeling power iteration on the cluster. While any vertex is active the
/// lowest active id v anchors a group; v's walk row comes from a 2r-phase
/// token diffusion and every active u within Δ of v joins and deactivates.
pub fn mpc_power_iteration(
    cluster: &mut ClusterState,
    graph: &Graph,
    edges: RegionId,
    params: &PowerParams,
    mode: PowerThreshold,
) -> Result<PowerOutcome> {
    check_params(graph, params)?;
    let n = graph.vertex_count();
    let r = params.r;
    let tables = build_tables(cluster, graph, edges, r, params.q)?;
    let mut active = ActiveSet::new(cluster, n)?;
    let labels_region = cluster.alloc("labels", n)?;
    let mut labels = vec![usize::MAX; n];
    let mut anchors = Vec::new();
    let mut delta = None;
    let mut anchor_profile = Vec::new();

    while is_active(cluster, &active)? {
        let v = lowest_active(cluster, &active)?.expect("an active vertex exists");
        let (row, arx_region) = compute_arx(cluster, graph, edges, v, 2 * r)?;
        // v's walk counts and self value reach every machine.
        let mut stats: Vec<BigUint> = (0..=2 * r).map(|i| tables.table.a(i, v).clone()).collect();
        stats.push(row[v as usize].clone());
        broadcast_values(cluster, &stats, active.machine_of(v))?;

        let anchor = tables.anchor(v);
        let dist = |u: Vertex| tables.distance(&anchor, u, &row[u as usize]);
        let delta = match delta {
            Some(d) => d,
            None => {
                anchor_profile = (0..n as Vertex).map(dist).collect();
                let d = charged_threshold(cluster, mode, &anchor_profile, params)?;
                delta = Some(d);
                d
            }
        };
        let g = anchors.len();
        anchors.push(v);
        for u in 0..n as Vertex {
            if !active.is_set(u) {
                continue;
            }
            let d = if v == 0 { anchor_profile[u as usize] } else { dist(u) };
            if u == v || within(d, delta) {
                labels[u as usize] = g;
                active.clear(u);
            }
        }
        cluster.free(arx_region);
    }
    active.release(cluster);
    cluster.free(labels_region);
    tables.release(cluster);
    let delta = delta.unwrap_or(0.0);
    if anchors.len() != params.k {
        return Err(Error::recovery(
            "peeling",
            format!("{} groups instead of {} (delta = {delta:.6e})", anchors.len(), params.k),
        ));
    }
    Ok(PowerOutcome {
        clustering: Clustering::from_labels(
            &labels,
            Provenance {
                algorithm: "mpc-power".into(),
                params: format!("k={} r={} q={} delta={delta:.6e}", params.k, r, params.q),
                seed: 0,
            },
        ),
        delta,
        anchor_profile,
        anchors,
    })
}

/// Attempts at drawing a sample that represents every cluster.
pub const MAX_SAMPLE_REDRAWS: u64 = 3;

/// Power iteration without peeling: rows for vertex 0 and a Θ(k ln N)
/// sample S_k are diffused concurrently over replicated edge sets, and every
/// vertex takes the smallest sample index within Δ. A vertex matching no
/// sample member means a cluster went unrepresented, and S_k is redrawn.
pub fn mpc_power_iteration_parallel(
    cluster: &mut ClusterState,
    graph: &Graph,
    edges: RegionId,
    params: &PowerParams,
    mode: PowerThreshold,
    seed: u64,
    c_sel: f64,
) -> Result<PowerOutcome> {
    check_params(graph, params)?;
    let tables = build_tables(cluster, graph, edges, params.r, params.q)?;
    let mut last_err = None;
    for redraw in 0..MAX_SAMPLE_REDRAWS {
        let sample_seed = seed.wrapping_add(redraw << 32);
        match parallel_attempt(cluster, graph, params, mode, &tables, sample_seed, c_sel) {
            Ok(out) => {
                tables.release(cluster);
                return Ok(out);
            }
            Err(e) if matches!(e.failure_stage(), Some("parallel_labels" | "representative_k")) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    tables.release(cluster);
    Err(last_err.expect("at least one attempt"))
}

fn parallel_attempt(
    cluster: &mut ClusterState,
    graph: &Graph,
    params: &PowerParams,
    mode: PowerThreshold,
    tables: &NormTables,
    seed: u64,
    c_sel: f64,
) -> Result<PowerOutcome> {
    let n = graph.vertex_count();
    let steps = 2 * params.r;
    let sample = random_set(cluster, seed, TAG_RANDOM_SET, n, params.k as f64 * ln_n(n), c_sel)?;
    let members = sample.members().to_vec();
    // Vertex 0's row sets the threshold; it is diffused first either way.
    let mut sources: Vec<Vertex> = vec![0];
    sources.extend(members.iter().copied().filter(|&v| v != 0));
    let row_width = tables.table.level(steps).iter().map(WordLen::word_len).max().unwrap_or(1);
    let edge_words = 2 * graph.edge_count();
    let dist_region = cluster.alloc("distances", members.len() * n)?;
    let batch = batch_size(cluster, sources.len(), n * row_width + edge_words, 0);

    let mut dist: Vec<Vec<f64>> = vec![Vec::new(); members.len()];
    let mut anchor_profile = Vec::new();
    for start in (0..sources.len()).step_by(batch) {
        let end = (start + batch).min(sources.len());
        let diffusion = DiffusionBatch::open(cluster, edge_words, end - start, n * row_width)?;
        diffusion.diffuse(cluster, n, steps)?;
        diffusion.gather(cluster, n)?;
        let rows = walk_rows(graph, &sources[start..end], steps);
        for (&x, row) in sources[start..end].iter().zip(&rows) {
            let anchor = tables.anchor(x);
            let profile: Vec<f64> = (0..n as Vertex)
                .map(|u| tables.distance(&anchor, u, &row[u as usize]))
                .collect();
            if x == 0 {
                anchor_profile = profile.clone();
            }
            if let Some(i) = sample.index_of(x) {
                dist[i] = profile;
            }
        }
        diffusion.close(cluster);
    }
    let delta = charged_threshold(cluster, mode, &anchor_profile, params)?;
    let release = |cluster: &mut ClusterState, sample| {
        SampledSet::release(sample, cluster);
        cluster.free(dist_region);
    };

    // Members within Δ of each other share labels; the smallest one kept
    // by each member elects the representatives.
    let label_sets: Vec<Vec<usize>> = (0..members.len())
        .map(|i| {
            (0..members.len())
                .filter(|&j| j == i || within(dist[i][members[j] as usize], delta))
                .collect()
        })
        .collect();
    let reps = match representative_k(cluster, &label_sets, params.k) {
        Ok(r) => r,
        Err(e) => {
            release(cluster, sample);
            return Err(e);
        }
    };
    // Every vertex takes the first representative within Δ.
    let labels: Vec<Option<usize>> = (0..n)
        .map(|v| {
            reps.members
                .iter()
                .position(|&i| members[i] as usize == v || within(dist[i][v], delta))
        })
        .collect();
    release(cluster, sample);
    if let Some(v) = labels.iter().position(Option::is_none) {
        return Err(Error::recovery(
            "parallel_labels",
            format!("vertex {v} is within delta = {delta:.6e} of no representative"),
        ));
    }
    let labels: Vec<usize> = labels.into_iter().map(|l| l.expect("checked")).collect();
    Ok(PowerOutcome {
        clustering: Clustering::from_labels(
            &labels,
            Provenance {
                algorithm: "mpc-power-par".into(),
                params: format!("k={} r={} q={} delta={delta:.6e}", params.k, params.r, params.q),
                seed,
            },
        ),
        delta,
        anchor_profile,
        anchors: reps.members.iter().map(|&i| members[i]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::MpcConfig;

    #[test]
    fn active_examples() {
        let mut c = ClusterState::new(16, 16, MpcConfig::default(), 40).unwrap();
        let mut set = ActiveSet::new(&mut c, 40).unwrap();
        assert!(is_active(&mut c, &set).unwrap());
        for v in 0..39 {
            set.clear(v);
        }
        assert!(is_active(&mut c, &set).unwrap());
        assert_eq!(lowest_active(&mut c, &set).unwrap(), Some(39));
        set.clear(39);
        assert!(!is_active(&mut c, &set).unwrap());
        assert_eq!(lowest_active(&mut c, &set).unwrap(), None);
        set.release(&mut c);
        assert!(c.ledger().violations().is_empty());
    }

    #[test]
    fn check_costs_rounds() {
        let mut c = ClusterState::new(16, 16, MpcConfig::default(), 40).unwrap();
        let set = ActiveSet::from_flags(&mut c, vec![false; 40]).unwrap();
        let before = c.round();
        assert!(!is_active(&mut c, &set).unwrap());
        assert!(c.round() > before);
    }
}
