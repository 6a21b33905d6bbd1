//! Geometric foundations: mesh ingestion, surface patches, voxel morphology,
//! and ray/segment queries.
//!
//! Everything here is immutable after construction; the queries are pure and
//! safe to call from parallel workers.

pub mod bvh;
pub mod mesh;
pub mod patches;
pub mod voxel;

pub use bvh::{intersect_triangle, ray_hit_brute_force, Bvh, Ray, RayHit};
pub use mesh::{detect_format, load_mesh, LoadOptions, LoadReport, MeshFormat, TriangleMesh};
pub use patches::{make_patches, SurfacePatch, SurfacePatchSet};
pub use voxel::{triangle_box_overlap, voxelize, Segment, VoxelGrid, VoxelizeOptions, DEFAULT_MAX_VOXELS};
