//! Per-agent experience replay with uniform and neighbor-window sampling.

mod buffer;
mod sampling;

pub use buffer::{BatchArrays, ReplayBuffer, Transition};
pub use sampling::{
    collect_joint, make_index_uniform, make_sampler, neighbor_batch, neighbor_indices,
    neighbor_sequence, neighbor_window, Draw, IndexSampler, NeighborSampler, SampleIndexSet,
    SamplerKind, UniformSampler, ANCHOR_MARGIN,
};
