//! Simulator of the s-space MPC model.

mod cluster;
mod codec;
mod config;
mod ledger;
mod primitives;

pub use cluster::{ceil_log, ClusterState, Delivery, Envelope, Extent, Message, Region, RegionId};
pub use codec::{WordCodec, WordLen};
pub use config::{BudgetMode, MpcConfig};
pub use ledger::{Ledger, MachineSpan, RoundRecord, Violation};
pub use primitives::{
    broadcast, converge_cast, copy_sets, index_records, prefix_sum, sort_records,
    visit_neighbors, CopyLayout, Records, Slab,
};

/// One machine word.
pub type Word = u64;
