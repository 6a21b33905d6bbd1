//! Offline coverage path planning for structural inspection with a
//! camera-equipped UAV.
//!
//! Given a triangle mesh of a target structure and a sensor model, the
//! planner:
//!
//! 1. voxelizes the structure and builds a sampling shell by dilating the
//!    voxel model once by the safety distance and once by the maximum viewing
//!    range, then subtracting ([`sampling::build_sampling_region`]);
//! 2. samples via-points in the shell with potential-field viewing
//!    directions, and connects nearby pairs with collision-free straight-line
//!    path primitives ([`sampling`]);
//! 3. evaluates a four-condition visibility model (field of view, range,
//!    viewing angle, occlusion) for sampled poses along each primitive and
//!    aggregates per-patch visibility bits ([`visibility`]);
//! 4. assembles a Primitive Coverage Graph whose edges carry flying distance
//!    and visibility vectors ([`pcg`]);
//! 5. searches the graph for a connected, branch-less walk that reaches the
//!    required surface-coverage ratio at low flying distance
//!    ([`search::gns`]), with two viewpoint-based baselines for comparison;
//! 6. independently verifies a finished path by simulating a depth camera
//!    sweep and accumulating per-ray surface hits ([`verify`]).
//!
//! The `examples/` directory walks through each capability; the `primcov`
//! binary wraps the same pipeline behind `plan`, `verify`, `bench`,
//! `gen-structure`, and `inspect` subcommands.

pub mod bitset;
pub mod config;
pub mod error;
pub mod geometry;
pub mod math;
pub mod pcg;
pub mod pipeline;
pub mod sampling;
pub mod search;
pub mod structures;
pub mod verify;
pub mod visibility;

pub use bitset::Bitset;
pub use error::{Error, Result};
pub use math::{vec3, Vec3};
