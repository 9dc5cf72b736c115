//! Stochastic Block Model instances: generation, placement, regime checks and
//! plain-text IO.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Vertex};
use crate::mpc::{ClusterState, RegionId};
use crate::rng::{tagged_rng, PairCoins, TAG_PLACEMENT};

/// Parameters of SBM(n, p, q, k).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    /// Vertices per cluster.
    pub n: usize,
    /// Number of clusters.
    pub k: usize,
    /// Intra-cluster edge probability.
    pub p: f64,
    /// Inter-cluster edge probability.
    pub q: f64,
    pub seed: u64,
}

impl SbmParams {
    pub fn new(n: usize, k: usize, p: f64, q: f64, seed: u64) -> Self {
        SbmParams { n, k, p, q, seed }
    }

    /// Total vertex count N = k·n.
    pub fn vertex_count(&self) -> usize {
        self.n * self.k
    }

    /// Checks what the generator needs: k ≥ 2, n ≥ 1 and p, q in [0, 1].
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Param(format!("k must be at least 2, got {}", self.k)));
        }
        if self.n == 0 {
            return Err(Error::Param("n must be at least 1".into()));
        }
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Param(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.vertex_count() > Vertex::MAX as usize {
            return Err(Error::Param("vertex count exceeds the id range".into()));
        }
        Ok(())
    }

    /// The model assumption 0 < q < p < 1 used by the recovery algorithms.
    pub fn validate_model(&self) -> Result<()> {
        self.validate()?;
        if !(0.0 < self.q && self.q < self.p && self.p < 1.0) {
            return Err(Error::Param(format!(
                "need 0 < q < p < 1, got p = {}, q = {}",
                self.p, self.q
            )));
        }
        Ok(())
    }

    /// Hidden cluster of `v`: clusters are contiguous id blocks of size n.
    pub fn cluster_of(&self, v: Vertex) -> usize {
        v as usize / self.n
    }
}

/// A generated graph together with its hidden partition.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmInstance {
    pub params: SbmParams,
    /// Unordered pairs `(u, v)` with `u < v`, in row-major order.
    pub edges: Vec<(Vertex, Vertex)>,
    /// Cluster id of every vertex.
    pub truth: Vec<usize>,
}

impl SbmInstance {
    pub fn vertex_count(&self) -> usize {
        self.truth.len()
    }

    pub fn graph(&self) -> Graph {
        Graph::from_edges(self.vertex_count(), &self.edges)
            .expect("generated edge lists are simple")
    }

    /// Number of edges whose endpoints share a cluster.
    pub fn intra_edge_count(&self) -> usize {
        self.edges
            .iter()
            .filter(|&&(u, v)| self.truth[u as usize] == self.truth[v as usize])
            .count()
    }
}

/// Samples every unordered pair once, with probability p inside a cluster
/// and q across clusters.
pub fn generate_sbm(params: SbmParams) -> Result<SbmInstance> {
    params.validate()?;
    let total = params.vertex_count();
    let truth: Vec<usize> = (0..total).map(|v| v / params.n).collect();
    let mut edges = Vec::new();
    for u in 0..total {
        let mut coins = PairCoins::row(params.seed, u as Vertex, u as Vertex + 1);
        for v in u + 1..total {
            let prob = if truth[u] == truth[v] { params.p } else { params.q };
            if coins.next_unit() < prob {
                edges.push((u as Vertex, v as Vertex));
            }
        }
    }
    Ok(SbmInstance {
        params,
        edges,
        truth,
    })
}

/// Where the directed edge records ended up after initial distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePlacement {
    pub region: RegionId,
    /// Shuffled directed records; record `i` lives on machine `i mod M`.
    pub records: Vec<(Vertex, Vertex)>,
    pub machines: usize,
}

impl EdgePlacement {
    pub fn machine_of(&self, index: usize) -> usize {
        index % self.machines
    }

    /// Records held by one machine.
    pub fn records_on(&self, machine: usize) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        self.records
            .iter()
            .skip(machine)
            .step_by(self.machines)
            .copied()
    }
}

/// Stores both directions of every edge, round-robin over the machines after
/// a shuffle seeded by the instance seed.
pub fn distribute_edges(instance: &SbmInstance, cluster: &mut ClusterState) -> Result<EdgePlacement> {
    let needed = 2 * instance.edges.len();
    let machines = cluster.machines();
    let mut records: Vec<(Vertex, Vertex)> = instance
        .edges
        .iter()
        .flat_map(|&(u, v)| [(u, v), (v, u)])
        .collect();
    let mut rng = tagged_rng(instance.params.seed, TAG_PLACEMENT);
    records.shuffle(&mut rng);
    let base = needed / machines;
    let extra = needed % machines;
    let counts = |m: usize| base + usize::from(m < extra);
    let region = cluster
        .alloc_with_counts("edges", machines, counts)
        .map_err(|e| match e {
            Error::Capacity { .. } => {
                Error::capacity("edge records", needed, cluster.total_free())
            }
            other => other,
        })?;
    Ok(EdgePlacement {
        region,
        records,
        machines,
    })
}

/// Logarithm used in regime formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
        }
    }
}

/// Unnamed universal constants in the recovery conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegimeConstants {
    pub c0: f64,
    pub c: f64,
    pub log: LogBase,
}

impl Default for RegimeConstants {
    fn default() -> Self {
        RegimeConstants {
            c0: 1.0,
            c: 1.0,
            log: LogBase::Natural,
        }
    }
}

/// One inequality `left ≥ right`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: &'static str,
    pub left: f64,
    pub right: f64,
    pub holds: bool,
}

impl Condition {
    fn new(name: &'static str, left: f64, right: f64) -> Self {
        Condition {
            name,
            left,
            right,
            holds: left > 0.0 && left >= right,
        }
    }
}

/// Recovery-condition diagnostics for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub conditions: Vec<Condition>,
    pub notes: Vec<String>,
}

impl RegimeReport {
    pub fn get(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    /// True when the condition named `name` exists and holds.
    pub fn holds(&self, name: &str) -> bool {
        self.get(name).is_some_and(|c| c.holds)
    }
}

pub const COND_LEMMA5: &str = "commnbr_threshold";
pub const COND_THEOREM4: &str = "commnbr";
pub const COND_MPC_COMMNBR: &str = "mpc_commnbr";
pub const COND_POWER: &str = "power_iteration";
pub const COND_POWER_SIDE: &str = "power_iteration_side";

/// Evaluates the gap `(p−q)/√p` against each algorithm's condition.
/// Purely diagnostic.
pub fn regime_check(params: &SbmParams, r: usize, constants: &RegimeConstants) -> RegimeReport {
    let n = params.n as f64;
    let k = params.k as f64;
    let (p, q) = (params.p, params.q);
    let log = |x: f64| constants.log.log(x);
    let left = if p > 0.0 { (p - q) / p.sqrt() } else { 0.0 };
    let mut conditions = vec![
        Condition::new(
            COND_LEMMA5,
            left,
            6.0 * (k + 1.0).sqrt() * log(n).max(0.0).powf(0.25) / n.powf(0.25),
        ),
        Condition::new(
            COND_THEOREM4,
            left,
            constants.c * (k + 1.0).sqrt() / n.powf(0.25),
        ),
        Condition::new(
            COND_MPC_COMMNBR,
            left,
            constants.c * k.powf(0.75) * n.powf(-0.25) * log(n).max(0.0).powf(0.25),
        ),
    ];
    let mut notes = Vec::new();
    if r < 3 {
        notes.push(format!(
            "contract violation: power iteration needs r >= 3, got r = {r}"
        ));
    }
    if r >= 2 {
        let exponent = -0.5 + 1.0 / (2.0 * (r as f64 - 1.0));
        let right = (constants.c0 * constants.c0 + 1.0)
            * k.sqrt()
            * n.powf(exponent)
            * log(k * n).max(0.0).powi(7);
        let mut cond = Condition::new(COND_POWER, left, right);
        cond.holds &= r >= 3;
        conditions.push(cond);
    }
    let variance = (p * (1.0 - p)).max(q * (1.0 - q));
    let side_right = constants.c0 * log(n) / n;
    let mut side = Condition::new(COND_POWER_SIDE, variance, side_right);
    side.holds &= p <= 0.75 && q <= 0.75;
    if p > 0.75 || q > 0.75 {
        notes.push("power iteration assumes p, q <= 0.75".into());
    }
    conditions.push(side);
    RegimeReport { conditions, notes }
}

/// Writes the header `N k seed` followed by one `u v` line per edge.
pub fn write_edge_list(instance: &SbmInstance, mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "{} {} {}",
        instance.vertex_count(),
        instance.params.k,
        instance.params.seed
    )?;
    for &(u, v) in &instance.edges {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}

/// Writes `vertex label` lines.
pub fn write_truth(truth: &[usize], mut out: impl Write) -> Result<()> {
    for (v, label) in truth.iter().enumerate() {
        writeln!(out, "{v} {label}")?;
    }
    Ok(())
}

/// Contents of an edge-list file.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub vertex_count: usize,
    pub k: usize,
    pub seed: u64,
    pub edges: Vec<(Vertex, Vertex)>,
}

fn parse_fields<const N: usize>(line: &str, lineno: usize) -> Result<[u64; N]> {
    let mut out = [0u64; N];
    let mut fields = line.split_whitespace();
    for slot in out.iter_mut() {
        let field = fields
            .next()
            .ok_or_else(|| Error::Parse(format!("line {lineno}: expected {N} fields")))?;
        *slot = field
            .parse()
            .map_err(|_| Error::Parse(format!("line {lineno}: bad integer {field:?}")))?;
    }
    if fields.next().is_some() {
        return Err(Error::Parse(format!("line {lineno}: expected {N} fields")));
    }
    Ok(out)
}

pub fn read_edge_list(input: impl BufRead) -> Result<EdgeList> {
    let mut lines = input
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("missing header line".into()))?;
    let [vertex_count, k, seed] = parse_fields::<3>(&header?, 1)?;
    let mut edges = Vec::new();
    for (i, line) in lines {
        let [u, v] = parse_fields::<2>(&line?, i + 1)?;
        if u >= vertex_count || v >= vertex_count {
            return Err(Error::Parse(format!("line {}: vertex out of range", i + 1)));
        }
        edges.push((u as Vertex, v as Vertex));
    }
    Ok(EdgeList {
        vertex_count: vertex_count as usize,
        k: k as usize,
        seed,
        edges,
    })
}

pub fn read_truth(input: impl BufRead) -> Result<Vec<usize>> {
    let mut pairs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let [v, label] = parse_fields::<2>(&line, i + 1)?;
        pairs.push((v as usize, label as usize));
    }
    pairs.sort_unstable();
    if pairs.iter().enumerate().any(|(i, &(v, _))| v != i) {
        return Err(Error::Parse("truth file must list every vertex exactly once".into()));
    }
    Ok(pairs.into_iter().map(|(_, l)| l).collect())
}
