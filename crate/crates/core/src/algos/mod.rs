//! The clustering algorithms as they run on the simulated cluster.

mod comm_nbr;
mod expansion;
mod power;
mod walks;

pub use comm_nbr::{
    compute_cluster, compute_rep, compute_subcluster, mpc_comm_nbr, CommNbrOutcome, RepElection, SubclusterLabels,
    MAX_REP_REDRAWS,
};
pub use expansion::{compute_norm, expansion_coefficients, Expansion, R_MAX};
pub use power::{is_active, mpc_power_iteration, mpc_power_iteration_parallel, ActiveSet, MAX_SAMPLE_REDRAWS};
pub use walks::{aix_sum, arx_row, closed_walk_counts, compute_arx, walk_rows, WalkTable};

use crate::error::Result;
use crate::mpc::{BudgetMode, ClusterState, MpcConfig};
use crate::ops::slab_stride;
use crate::sbm::{distribute_edges, EdgePlacement, SbmInstance};
use crate::seq::{ln_n, prescribed_size, CommNbrOptions};

/// How to size the simulated cluster for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcSetup {
    /// Words per machine; `config.default_s(N)` when absent.
    pub s: Option<usize>,
    /// Machine count; sized from the run's working set when absent.
    pub machines: Option<usize>,
    pub config: MpcConfig,
    /// Refuse allocations beyond the space budget.
    pub enforce_budget: bool,
}

impl Default for MpcSetup {
    fn default() -> Self {
        MpcSetup {
            s: None,
            machines: None,
            config: MpcConfig::default(),
            enforce_budget: true,
        }
    }
}

/// A cluster holding an instance's edge records.
#[derive(Debug)]
pub struct MpcRun {
    pub cluster: ClusterState,
    pub placement: EdgePlacement,
}

/// Builds the cluster for `instance` with room for `working_words` words
/// beyond the edge records, and distributes the edges. The budget follows
/// `mode` regardless of the configured one.
pub fn prepare_run(instance: &SbmInstance, setup: &MpcSetup, working_words: usize, mode: BudgetMode) -> Result<MpcRun> {
    setup.config.validate()?;
    let n = instance.vertex_count();
    let m = instance.edges.len();
    let s = setup.s.unwrap_or_else(|| setup.config.default_s(n));
    let machines = setup
        .machines
        .unwrap_or_else(|| setup.config.machines_for(2 * m + working_words, s));
    let mut config = setup.config.clone();
    config.space_budget_mode = mode;
    let budget = config.space_budget(n, m, instance.params.k);
    let mut cluster = ClusterState::new(machines, s, config, n)?;
    if setup.enforce_budget {
        cluster.set_budget(Some(budget));
    }
    let placement = distribute_edges(instance, &mut cluster)?;
    Ok(MpcRun { cluster, placement })
}

/// Expected peak working set of `mpc_comm_nbr` beyond the edges, from the
/// average degree.
pub fn comm_nbr_words(vertex_count: usize, edges: usize, k: usize, opts: &CommNbrOptions) -> usize {
    let n = vertex_count;
    let d = ((2 * edges) as f64 / n.max(1) as f64).max(1.0);
    let stride = slab_stride(n);
    let main = prescribed_size(opts.sample_factor, n, k, d.round().max(1.0) as usize).min(n as f64) as usize;
    let small = (opts.c_sel * k as f64 * ln_n(n)).min(n as f64) as usize;
    let rep_phase = stride * small * (small + 1);
    let sub_phase = stride * (main * (k + 1) + k * (main + 1)) + 4 * main;
    rep_phase.max(sub_phase) + 4 * n
}

/// Working set to provision for the power iterations beyond the edges:
/// walk tables plus room for batches of concurrent diffusions, each with
/// its own copy of the edge records. Capped at half the budget, which
/// leaves the cluster's slack within it; larger graphs run more batches.
pub fn power_words(
    vertex_count: usize,
    edges: usize,
    k: usize,
    r: usize,
    parallel: bool,
    c_sel: f64,
    config: &MpcConfig,
) -> usize {
    let n = vertex_count;
    let mut c = config.clone();
    c.space_budget_mode = if parallel { BudgetMode::KTimes } else { BudgetMode::Linear };
    let budget = c.space_budget(n, edges, k);
    let tables = (2 * r + 4) * n * 2;
    let sources = if parallel {
        (c_sel * k as f64 * ln_n(n)).min(n as f64) as usize + 1
    } else {
        n
    };
    let full = sources * (n + 2 * edges);
    let cap = (budget / 2).saturating_sub(2 * edges);
    tables + full.min(cap).max(n + 2 * edges)
}
