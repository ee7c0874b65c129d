//! Splits 3D objects into parts and packs them into two non-interpenetrating
//! volumes with watertight signed distance fields and training samples.
//!
//! The stages, in pipeline order:
//!
//! * [`mesh_io`]: GLB/OBJ loading, normalization into `[-0.95, 0.95]^3`, OBJ/GLB writing.
//! * [`part_extraction`]: parts from scene nodes or connected components, merge rules, repair.
//! * [`contact_graph`]: dilated voxel overlap between parts, weighted by penetration depth.
//! * [`bipartite_contraction`]: greedy odd-cycle contraction with a two-coloring fallback.
//! * [`volume_packing`]: two-coloring of the contracted graph, balanced by occupancy.
//! * [`watertight_field`]: per-volume signed distance grid and marching cubes.
//! * [`sampling`]: surface, salient-edge and point-SDF sample sets.
//! * [`curation`]: occupancy-balance filter and dataset statistics.
//! * [`pipeline`]: per-object and batch drivers.

pub mod bipartite_contraction;
pub mod bvh;
pub mod contact_graph;
pub mod curation;
pub mod error;
pub mod fixtures;
pub mod mesh;
pub mod mesh_io;
pub mod oracle;
pub mod part_extraction;
pub mod pipeline;
pub mod sampling;
pub mod volume_packing;
pub mod voxel;
pub mod watertight_field;

pub use error::{Error, Result};
