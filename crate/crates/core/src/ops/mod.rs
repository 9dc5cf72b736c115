//! Graph operations on the simulated cluster: sampling, neighborhood
//! layouts and copies, group comparison, label balancing, representative
//! election and cut comparison.

mod labels;
mod layout;
mod sample;

pub use labels::{compare_cut, even_cluster, representative_k, Balanced, CutCounts, Representatives};
pub use layout::{
    compare_grp, copy_nbr, reorganize_nbr, reorganize_nbr_dense, slab_stride, NeighborCopies,
    NeighborLayout,
};
pub use sample::{adopt_set, random_set, sample_members, selection_probability, SampledSet, MAX_SAMPLE_ATTEMPTS};
