//! Cloud–client co-rendering of hierarchical Gaussian splat scenes.
//!
//! The cloud searches a level-of-detail cut for a predicted camera pose and
//! streams only the splats the client is missing; the client keeps a local
//! subgraph of the tree and renders the cut with parent/child interpolation.

pub mod camera;
pub mod codec;
pub mod error;
pub mod exec;
pub mod gaussian;
pub mod harness;
pub mod lod;
pub mod management;
pub mod render;
pub mod scene;
pub mod transport;

/// Level-order node index into a [`scene::LoDTree`].
pub type NodeId = u32;

pub use camera::{Camera, Intrinsics, Pose};
pub use error::{Error, Result};
pub use gaussian::Gaussian;
pub use lod::{Cut, CutEntry, SearchStats};
pub use scene::{LoDNode, LoDTree, SceneConfig};
