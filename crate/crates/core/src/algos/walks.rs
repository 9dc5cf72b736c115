use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::Result;
use crate::graph::{Graph, Vertex};
use crate::mpc::{broadcast, converge_cast, visit_neighbors, ClusterState, Region, RegionId, WordCodec, WordLen};

/// Walk counts a[i][x] = (A^i·1)_x for i in [0, 2r] and their totals C_i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkTable {
    r: usize,
    a: Vec<Vec<BigUint>>,
    c: Vec<BigUint>,
}

impl WalkTable {
    pub fn r(&self) -> usize {
        self.r
    }

    /// Number of length-i walks starting at x.
    pub fn a(&self, i: usize, x: Vertex) -> &BigUint {
        &self.a[i][x as usize]
    }

    pub fn level(&self, i: usize) -> &[BigUint] {
        &self.a[i]
    }

    /// Total number of length-i walks.
    pub fn c(&self, i: usize) -> &BigUint {
        &self.c[i]
    }

    pub fn totals(&self) -> &[BigUint] {
        &self.c
    }

    /// Single-machine computation by repeated neighbor sums.
    pub fn compute(graph: &Graph, r: usize) -> Self {
        let n = graph.vertex_count();
        let mut a = vec![vec![BigUint::one(); n]];
        for i in 1..=2 * r {
            let prev = &a[i - 1];
            let next = (0..n as Vertex)
                .map(|x| graph.neighbors(x).iter().map(|&y| &prev[y as usize]).sum())
                .collect();
            a.push(next);
        }
        let c = a.iter().map(|level| level.iter().sum()).collect();
        WalkTable { r, a, c }
    }
}

fn words_of(values: &[BigUint]) -> usize {
    values.iter().map(WordLen::word_len).sum()
}

/// Machine holding each value when `values` are stored in order in `region`.
pub(crate) fn value_machines(region: &Region, widths: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut offset = 0;
    widths
        .map(|w| {
            let m = region.machine_of(offset).unwrap_or(0);
            offset += w;
            m
        })
        .collect()
}

/// Sums held on several machines, combined by converge-casts that carry as
/// many totals at once as the machines' free space allows.
pub(crate) fn converge_sums(
    cluster: &mut ClusterState,
    per_machine: BTreeMap<usize, Vec<BigUint>>,
    count: usize,
) -> Result<Vec<BigUint>> {
    let totals: Vec<BigUint> = (0..count)
        .map(|i| per_machine.values().map(|v| &v[i]).sum())
        .collect();
    let headroom = cluster
        .s()
        .saturating_sub((0..cluster.machines()).map(|m| cluster.resident(m)).max().unwrap_or(0));
    let mut out = Vec::with_capacity(count);
    let mut start = 0;
    while start < count {
        let mut end = start + 1;
        let mut width = totals[start].word_len();
        while end < count && 2 * (2 + (end - start + 1).div_ceil(8) + width + totals[end].word_len()) <= headroom {
            width += totals[end].word_len();
            end += 1;
        }
        if end == start + 1 {
            // A lone total travels bare, without the vector header.
            let values = per_machine
                .iter()
                .filter(|(_, v)| !v[start].is_zero())
                .map(|(&m, v)| (m, v[start].clone()));
            let (sum, _) = converge_cast(cluster, values, |a, b| a + b)?;
            out.push(sum.unwrap_or_default());
        } else {
            let values = per_machine
                .iter()
                .filter(|(_, v)| v[start..end].iter().any(|x| !x.is_zero()))
                .map(|(&m, v)| (m, BigSums(v[start..end].to_vec())));
            let (sum, _) = converge_cast(cluster, values, |a, b| a.add(b))?;
            out.extend(sum.map(|s| s.0).unwrap_or_else(|| vec![BigUint::zero(); end - start]));
        }
        start = end;
    }
    Ok(out)
}

/// Broadcasts `values` from `origin` in as few messages of at most s/2
/// words as their sizes allow.
pub(crate) fn broadcast_values(cluster: &mut ClusterState, values: &[BigUint], origin: usize) -> Result<usize> {
    let limit = (cluster.s() / 2).max(2);
    let mut rounds = 0;
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        let mut width = 2 + values[start].word_len();
        while end < values.len() && width + 1 + values[end].word_len() <= limit {
            width += 1 + values[end].word_len();
            end += 1;
        }
        rounds += broadcast(cluster, &BigSums(values[start..end].to_vec()), origin)?;
        start = end;
    }
    Ok(rounds)
}

/// A fixed-length vector of big integers summed elementwise.
struct BigSums(Vec<BigUint>);

impl BigSums {
    fn add(mut self, other: BigSums) -> BigSums {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
        self
    }
}

/// Layout: the count, the limb counts packed eight bits each into words,
/// then the limbs.
impl WordLen for BigSums {
    fn word_len(&self) -> usize {
        1 + self.0.len().div_ceil(8) + self.0.iter().map(WordLen::word_len).sum::<usize>()
    }
}

impl WordCodec for BigSums {
    fn encode(&self, out: &mut Vec<u64>) {
        out.push(self.0.len() as u64);
        for chunk in self.0.chunks(8) {
            let packed = chunk
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, v)| acc | ((v.word_len() as u64) << (8 * i)));
            out.push(packed);
        }
        for v in &self.0 {
            v.encode(out);
        }
    }
    fn decode(words: &[u64]) -> Self {
        let count = words[0] as usize;
        let header = 1 + count.div_ceil(8);
        let mut pos = header;
        let vals = (0..count)
            .map(|i| {
                let len = (words[1 + i / 8] >> (8 * (i % 8)) & 0xff) as usize;
                let v = BigUint::decode(&words[pos..pos + len]);
                pos += len;
                v
            })
            .collect();
        BigSums(vals)
    }
}

/// Walk table on the cluster: 2r neighbor-sum phases, one stored level per
/// phase, then the totals by converge-cast. Returns the table and the
/// regions holding its levels.
pub fn aix_sum(
    cluster: &mut ClusterState,
    graph: &Graph,
    edges: RegionId,
    r: usize,
) -> Result<(WalkTable, Vec<RegionId>)> {
    aix_sum_with_riders(cluster, graph, edges, r, None, 0)
}

/// `aix_sum` whose first `rider_phases` phases also carry `items` values
/// of other diffusions over `traffic`, running in the same rounds.
pub(crate) fn aix_sum_with_riders(
    cluster: &mut ClusterState,
    graph: &Graph,
    edges: RegionId,
    r: usize,
    rider: Option<(usize, RegionId)>,
    rider_phases: usize,
) -> Result<(WalkTable, Vec<RegionId>)> {
    let n = graph.vertex_count();
    let c_nbr = cluster.config().c_nbr;
    let mut levels = vec![vec![BigUint::one(); n]];
    let mut regions = vec![cluster.alloc("walks", n)?];
    for i in 1..=2 * r {
        let next = if let (Some((items, traffic)), true) = (rider, i <= rider_phases) {
            cluster.charge_log("visit_neighbors", c_nbr, n + items, &[edges, traffic])?;
            let prev = &levels[i - 1];
            (0..n as Vertex)
                .map(|x| graph.neighbors(x).iter().map(|&y| &prev[y as usize]).sum())
                .collect()
        } else {
            visit_neighbors(cluster, graph, edges, &levels[i - 1], BigUint::zero(), |acc, v| acc + v)?
        };
        regions.push(cluster.alloc("walks", words_of(&next))?);
        levels.push(next);
    }
    let mut per_machine = BTreeMap::new();
    for (i, level) in levels.iter().enumerate() {
        let machines = value_machines(cluster.region(regions[i]), level.iter().map(WordLen::word_len));
        for (v, m) in level.iter().zip(machines) {
            per_machine.entry(m).or_insert_with(|| vec![BigUint::zero(); 2 * r + 1])[i] += v;
        }
    }
    let c = converge_sums(cluster, per_machine, 2 * r + 1)?;
    Ok((WalkTable { r, a: levels, c }, regions))
}

/// Token diffusion from x: the row (A^steps)_{x,·}, one neighbor-sum phase
/// per step. The values stay stored in the returned region.
pub fn compute_arx(
    cluster: &mut ClusterState,
    graph: &Graph,
    edges: RegionId,
    x: Vertex,
    steps: usize,
) -> Result<(Vec<BigUint>, RegionId)> {
    let n = graph.vertex_count();
    let mut row = vec![BigUint::zero(); n];
    row[x as usize] = BigUint::one();
    let mut region = cluster.alloc("arx", words_of(&row))?;
    for _ in 0..steps {
        row = visit_neighbors(cluster, graph, edges, &row, BigUint::zero(), |acc, v| acc + v)?;
        cluster.free(region);
        region = cluster.alloc("arx", words_of(&row))?;
    }
    Ok((row, region))
}

/// Single-machine row (A^steps)_{x,·}.
pub fn arx_row(graph: &Graph, x: Vertex, steps: usize) -> Vec<BigUint> {
    let n = graph.vertex_count();
    let mut row = vec![BigUint::zero(); n];
    row[x as usize] = BigUint::one();
    for _ in 0..steps {
        row = (0..n as Vertex)
            .map(|y| graph.neighbors(y).iter().map(|&z| &row[z as usize]).sum())
            .collect();
    }
    row
}

/// Push diffusion from x with checked u128 arithmetic; `None` on overflow.
fn diffuse_u128(graph: &Graph, x: Vertex, steps: usize) -> Option<Vec<u128>> {
    let n = graph.vertex_count();
    let mut cur = vec![0u128; n];
    cur[x as usize] = 1;
    let mut support = vec![x];
    for _ in 0..steps {
        let mut next = vec![0u128; n];
        let mut reached = Vec::new();
        for &y in &support {
            let val = cur[y as usize];
            for &z in graph.neighbors(y) {
                let slot = &mut next[z as usize];
                if *slot == 0 {
                    reached.push(z);
                }
                *slot = slot.checked_add(val)?;
            }
        }
        cur = next;
        support = reached;
    }
    Some(cur)
}

/// Rows (A^steps)_{x,·} for several sources, exact.
pub fn walk_rows(graph: &Graph, sources: &[Vertex], steps: usize) -> Vec<Vec<BigUint>> {
    sources
        .iter()
        .map(|&x| match diffuse_u128(graph, x, steps) {
            Some(row) => row.into_iter().map(BigUint::from).collect(),
            None => arx_row(graph, x, steps),
        })
        .collect()
}

/// (A^{2r})_{u,u} = Σ_z ((A^r)_{u,z})² for every u.
pub fn closed_walk_counts(graph: &Graph, r: usize) -> Vec<BigUint> {
    (0..graph.vertex_count() as Vertex)
        .map(|u| {
            let fast = diffuse_u128(graph, u, r).and_then(|row| {
                row.iter()
                    .try_fold(0u128, |acc, &v| acc.checked_add(v.checked_mul(v)?))
            });
            match fast {
                Some(total) => BigUint::from(total),
                None => arx_row(graph, u, r).iter().map(|v| v * v).sum(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::MpcConfig;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn setup(g: &Graph) -> (ClusterState, RegionId) {
        let mut c = ClusterState::new(32, 16, MpcConfig::default(), g.vertex_count()).unwrap();
        let e = c.alloc("edges", 2 * g.edge_count()).unwrap();
        (c, e)
    }

    #[test]
    fn triangle_walks() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let (mut c, e) = setup(&g);
        let (t, _) = aix_sum(&mut c, &g, e, 1).unwrap();
        assert_eq!(t.level(0), &[big(1), big(1), big(1)]);
        assert_eq!(t.level(1), &[big(2), big(2), big(2)]);
        assert_eq!(t.level(2), &[big(4), big(4), big(4)]);
        assert_eq!(t.c(1), &big(6));
        assert_eq!(t.c(2), &big(12));
        assert_eq!(t, WalkTable::compute(&g, 1));
        assert!(c.ledger().violations().is_empty());
    }

    #[test]
    fn path_walks() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let t = WalkTable::compute(&g, 1);
        assert_eq!(t.level(1), &[big(1), big(2), big(1)]);
        assert_eq!(t.level(2), &[big(2), big(2), big(2)]);
    }

    #[test]
    fn triangle_rows() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let (mut c, e) = setup(&g);
        let (row, _) = compute_arx(&mut c, &g, e, 0, 2).unwrap();
        assert_eq!(row, vec![big(2), big(1), big(1)]);
        let (row, _) = compute_arx(&mut c, &g, e, 1, 0).unwrap();
        assert_eq!(row, vec![big(0), big(1), big(0)]);
        assert_eq!(arx_row(&g, 0, 2), vec![big(2), big(1), big(1)]);
    }

    #[test]
    fn fast_rows_agree_with_big_rows() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]).unwrap();
        for steps in 0..5 {
            let fast = walk_rows(&g, &[0, 3], steps);
            assert_eq!(fast[0], arx_row(&g, 0, steps));
            assert_eq!(fast[1], arx_row(&g, 3, steps));
        }
        let diag = closed_walk_counts(&g, 2);
        for u in 0..5u32 {
            assert_eq!(diag[u as usize], arx_row(&g, u, 4)[u as usize].clone());
        }
    }

    #[test]
    fn big_sums_round_trip() {
        let v = BigSums(vec![big(3), BigUint::from(1u8) << 90usize, big(0)]);
        let mut words = Vec::new();
        v.encode(&mut words);
        assert_eq!(words.len(), v.word_len());
        assert_eq!(BigSums::decode(&words).0, v.0);
    }
}
