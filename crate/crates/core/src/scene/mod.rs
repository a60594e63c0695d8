//! Scene model: Gaussians, the LoD hierarchy, offline partitioning and the
//! on-disk formats.

mod partition;
pub mod ply;
pub mod snapshot;
mod tree;

pub use partition::partition_subtrees;
pub use ply::{load_splats, read_splats, save_splats, write_splats};
pub use snapshot::{load_snapshot, read_snapshot, save_snapshot, write_snapshot};
pub use tree::{LoDNode, LoDTree, PartitionInfo, SceneConfig, EXTENT_PADDING};
pub(crate) use tree::distance;
