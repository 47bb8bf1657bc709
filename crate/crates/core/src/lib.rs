//! Hierarchical distance structural encodings (HDSE) for graph transformers.
//!
//! The crate covers the whole pipeline at desk scale:
//!
//! - [`graph`]: CSR graphs, loaders for the edge-list and JSON formats, and
//!   node permutations.
//! - [`coarsening`]: Louvain, Girvan–Newman and heavy-edge-matching
//!   coarseners, and the [`Hierarchy`](coarsening::Hierarchy) of coarse
//!   graphs they produce.
//! - [`distance`]: shortest-path distances, per-level hierarchy distances
//!   and the clipped HDSE tensors, with a compact binary file format.
//! - [`gdwl`]: GD-WL color refinement driven by either encoding, and the
//!   named graphs that separate them.
//! - [`attention`]: distance-biased attention (dense and cluster-level
//!   linear), exact gradients, and a small training loop on synthetic
//!   community graphs.
//! - [`cli`]: the `hdse` command-line front end.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod attention;
pub mod cli;
pub mod coarsening;
pub mod distance;
pub mod gdwl;
pub mod graph;

pub use coarsening::{Algorithm, Hierarchy, HierarchyConfig, Partition};
pub use distance::{hdse, high_level_hdse, spd_all_pairs, HdseTensor, HighLevelHdseTensor};
pub use graph::{Graph, GraphError, NodePermutation};
