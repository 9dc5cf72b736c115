//! Single-machine reference algorithms.

mod comm_nbr;
mod power;

pub use comm_nbr::{
    argmax_edges, comm_nbr, compcom_nbr, compute_del, delta_from_counts, draw_samples, ln_n,
    pair_counts, prescribed_size, trim_groups, CommNbrOptions, DeltaRule, Samples, ThresholdDelta,
};
pub use power::{
    anchor_separation, formula_threshold, gap_threshold, power_iteration, resolve_threshold,
    PowerOutcome, PowerParams, PowerThreshold,
};
