//! Via-point and path-primitive sampling.
//!
//! Via-points are drawn uniformly from the sampling shell (structure
//! dilated by the max viewing range minus structure dilated by the safety
//! distance). Their viewing directions come from a local potential field
//! over nearby surface patches, negated so the camera looks at the
//! structure. Nearby via-point pairs are connected by a collision-free
//! local planner (straight lines here; the planner is pluggable).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{voxelize, Segment, SurfacePatchSet, TriangleMesh, VoxelGrid, VoxelizeOptions};
use crate::math::{vec3, Vec3};

/// A camera pose: position plus unit viewing direction (optical axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub direction: Vec3,
}

/// A sampled graph node: position inside the sampling shell plus viewing
/// direction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ViaPoint {
    pub id: u32,
    pub position: Vec3,
    pub direction: Vec3,
}

impl ViaPoint {
    pub fn pose(&self) -> Pose {
        Pose {
            position: self.position,
            direction: self.direction,
        }
    }
}

/// A collision-free local path between two via-points, with poses sampled
/// along it for visibility estimation.
#[derive(Debug, Clone)]
pub struct PathPrimitive {
    pub id: u32,
    /// Endpoint via-point ids with `i < j`.
    pub i: u32,
    pub j: u32,
    /// Ordered waypoints; exactly the two endpoints for the straight-line
    /// planner.
    pub polyline: Vec<Vec3>,
    pub length: f64,
    pub sample_poses: Vec<Pose>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingParams {
    /// Number of via-points to draw.
    pub n_via_points: usize,
    /// Maximum distance between via-points considered for pairing.
    pub pair_distance: f64,
    /// Range of the local potential field for viewing directions.
    pub field_range: f64,
    /// Maximum viewing range of the sensor (outer dilation).
    pub view_range: f64,
    /// Required clearance from the structure (inner dilation).
    pub safety_distance: f64,
    /// Master RNG seed; identical seeds give bit-identical samples.
    pub seed: u64,
    /// Spacing between sampled poses along a primitive.
    pub pose_spacing: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            n_via_points: 300,
            pair_distance: 25.0,
            field_range: 50.0,
            view_range: 50.0,
            safety_distance: 2.0,
            seed: 0,
            pose_spacing: 1.0,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.safety_distance > 0.0 && self.safety_distance < self.view_range) {
            return Err(Error::InvalidParam(
                "require 0 < safety_distance < view_range".into(),
            ));
        }
        if self.n_via_points < 2 {
            return Err(Error::InvalidParam("need at least 2 via-points".into()));
        }
        if !(self.pair_distance > 0.0) {
            return Err(Error::InvalidParam("pair_distance must be > 0".into()));
        }
        if !(self.field_range > 0.0) {
            return Err(Error::InvalidParam("field_range must be > 0".into()));
        }
        if !(self.pose_spacing > 0.0) {
            return Err(Error::InvalidParam("pose_spacing must be > 0".into()));
        }
        Ok(())
    }
}

/// Endpoint directions closer than this to antipodal make the interpolation
/// swing through zero; such pairs are rejected.
const ANTIPODAL_MARGIN_DEG: f64 = 5.0;

/// Build the admissible region for via-points: dilate the voxelized
/// structure by the viewing range and by the safety distance, then subtract.
pub fn build_sampling_region(
    mesh: &TriangleMesh,
    params: &SamplingParams,
    resolution: f64,
    voxel_options: &VoxelizeOptions,
) -> Result<VoxelGrid> {
    let (region, _) = build_region_and_safety(mesh, params, resolution, voxel_options)?;
    Ok(region)
}

/// Same as [`build_sampling_region`] but also returns the safety-dilated
/// grid used for primitive collision checks.
pub fn build_region_and_safety(
    mesh: &TriangleMesh,
    params: &SamplingParams,
    resolution: f64,
    voxel_options: &VoxelizeOptions,
) -> Result<(VoxelGrid, VoxelGrid)> {
    params.validate()?;
    let base = voxelize(mesh, resolution, voxel_options)?;
    let outer = base.dilate(params.view_range);
    let safety = base.dilate(params.safety_distance);
    let region = outer.subtract(&safety)?;
    if region.occupied_count() == 0 {
        return Err(Error::EmptySamplingRegion);
    }
    Ok((region, safety))
}

/// Draw exactly `n_via_points` via-points: a uniformly chosen occupied voxel
/// of the region, then a uniform position within that voxel. Deterministic
/// for a fixed seed.
pub fn sample_via_points(
    region: &VoxelGrid,
    patches: &SurfacePatchSet,
    params: &SamplingParams,
) -> Result<Vec<ViaPoint>> {
    params.validate()?;
    let cells = region.occupied_indices();
    if cells.is_empty() {
        return Err(Error::EmptySamplingRegion);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let r = region.resolution;
    let mut out = Vec::with_capacity(params.n_via_points);
    for id in 0..params.n_via_points {
        let [i, j, k] = cells[rng.random_range(0..cells.len())];
        let offset = vec3(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
        let position = region.origin + (vec3(i as f64, j as f64, k as f64) + offset) * r;
        let direction = compute_view_direction(position, patches, params.field_range);
        out.push(ViaPoint {
            id: id as u32,
            position,
            direction,
        });
    }
    Ok(out)
}

/// Viewing direction at a position from the local potential field over all
/// patches within `field_range`: the raw field pushes away from nearby
/// surface, so the camera direction is its negation. Falls back to aiming at
/// the nearest patch centroid when no patch is in range.
pub fn compute_view_direction(position: Vec3, patches: &SurfacePatchSet, field_range: f64) -> Vec3 {
    let mut sum = Vec3::ZERO;
    let mut any = false;
    for patch in patches.patches() {
        let delta = position - patch.centroid;
        let dist = delta.norm();
        if dist < field_range && dist > 1e-12 {
            sum += delta / (dist * dist * dist);
            any = true;
        }
    }
    if any {
        if let Some(unit) = sum.normalized() {
            return -unit;
        }
    }
    // Nearest-centroid fallback.
    let nearest = patches
        .patches()
        .iter()
        .min_by(|a, b| {
            (position - a.centroid)
                .norm_squared()
                .total_cmp(&(position - b.centroid).norm_squared())
        })
        .expect("patch set is non-empty");
    (nearest.centroid - position).normalized().unwrap_or(-Vec3::Z)
}

/// Viewing direction on a path primitive at `point`, linearly interpolated
/// between the endpoint directions and renormalized. At the endpoints the
/// stored directions are returned exactly.
pub fn interpolate_pose(start: &Pose, end: &Pose, point: Vec3) -> Result<Pose> {
    let span = (end.position - start.position).norm();
    if span < 1e-12 {
        return Err(Error::InvalidParam(
            "primitive endpoints coincide".into(),
        ));
    }
    let t = (point - start.position).norm() / span;
    if t == 0.0 {
        return Ok(Pose {
            position: point,
            direction: start.direction,
        });
    }
    if t == 1.0 {
        return Ok(Pose {
            position: point,
            direction: end.direction,
        });
    }
    let raw = start.direction + (end.direction - start.direction) * t;
    if raw.norm() < 1e-6 {
        return Err(Error::AntipodalDirections);
    }
    Ok(Pose {
        position: point,
        direction: raw.normalized().expect("norm checked above"),
    })
}

/// A local planner connects two via-points with a path that keeps the
/// safety clearance, or reports failure. Straight lines ship; RRT/PRM-style
/// planners can slot in behind this trait.
pub trait LocalPlanner: Sync {
    /// Returns the polyline (including both endpoints) or `None` when no
    /// admissible path is found.
    fn connect(&self, from: &ViaPoint, to: &ViaPoint, safety: &VoxelGrid) -> Option<Vec<Vec3>>;
}

/// Connects via-points with a straight segment, accepted iff the segment's
/// voxel traversal avoids the safety-dilated structure.
pub struct StraightLinePlanner;

impl LocalPlanner for StraightLinePlanner {
    fn connect(&self, from: &ViaPoint, to: &ViaPoint, safety: &VoxelGrid) -> Option<Vec<Vec3>> {
        let seg = Segment {
            start: from.position,
            end: to.position,
        };
        if safety.segment_clear(&seg) {
            Some(vec![from.position, to.position])
        } else {
            None
        }
    }
}

/// Sample path primitives: every unordered via-point pair within
/// `pair_distance` is handed to the local planner; accepted paths get poses
/// at `pose_spacing` with interpolated directions.
pub fn sample_primitives(
    via_points: &[ViaPoint],
    safety: &VoxelGrid,
    params: &SamplingParams,
    planner: &dyn LocalPlanner,
) -> Vec<PathPrimitive> {
    let antipodal_dot = (180.0f64 - ANTIPODAL_MARGIN_DEG).to_radians().cos();
    let n = via_points.len();
    let mut primitives: Vec<PathPrimitive> = (0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            let mut local = Vec::new();
            for b in a + 1..n {
                let from = &via_points[a];
                let to = &via_points[b];
                let dist = from.position.distance(to.position);
                if dist > params.pair_distance || dist < 1e-9 {
                    continue;
                }
                // Near-antipodal endpoint directions break the direction
                // interpolation; skip those pairs outright.
                if from.direction.dot(to.direction) <= antipodal_dot {
                    continue;
                }
                let Some(polyline) = planner.connect(from, to, safety) else {
                    continue;
                };
                let length: f64 = polyline.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
                if length <= 0.0 {
                    continue;
                }
                let sample_poses = sample_poses_on_segment(
                    &from.pose(),
                    &to.pose(),
                    params.pose_spacing,
                );
                local.push(PathPrimitive {
                    id: 0, // assigned below in deterministic order
                    i: from.id,
                    j: to.id,
                    polyline,
                    length,
                    sample_poses,
                });
            }
            local
        })
        .collect();

    for (id, p) in primitives.iter_mut().enumerate() {
        p.id = id as u32;
    }
    primitives
}

/// Poses along the straight segment between two endpoint poses, spaced at
/// most `spacing` apart, endpoints included and exact.
pub fn sample_poses_on_segment(start: &Pose, end: &Pose, spacing: f64) -> Vec<Pose> {
    let length = (end.position - start.position).norm();
    let segments = ((length / spacing).ceil() as usize).max(1);
    let mut poses = Vec::with_capacity(segments + 1);
    poses.push(*start);
    for k in 1..segments {
        let t = k as f64 / segments as f64;
        let point = start.position + (end.position - start.position) * t;
        let pose = interpolate_pose(start, end, point)
            .expect("antipodal pairs are rejected before pose sampling");
        poses.push(pose);
    }
    poses.push(*end);
    poses
}

/// One JSON object per line, for debugging and visualization.
pub fn write_via_points_jsonl(points: &[ViaPoint], mut w: impl Write) -> std::io::Result<()> {
    for p in points {
        let record = serde_json::json!({
            "id": p.id,
            "p": [p.position.x, p.position.y, p.position.z],
            "dir": [p.direction.x, p.direction.y, p.direction.z],
        });
        writeln!(w, "{}", record)?;
    }
    Ok(())
}

/// One JSON object per line; visibility vectors can be attached afterwards
/// by the graph builder.
pub fn write_primitives_jsonl(primitives: &[PathPrimitive], mut w: impl Write) -> std::io::Result<()> {
    for p in primitives {
        let record = serde_json::json!({
            "id": p.id,
            "i": p.i,
            "j": p.j,
            "length": p.length,
            "poses": p.sample_poses.iter().map(|pose| {
                serde_json::json!({
                    "p": [pose.position.x, pose.position.y, pose.position.z],
                    "dir": [pose.direction.x, pose.direction.y, pose.direction.z],
                })
            }).collect::<Vec<_>>(),
        });
        writeln!(w, "{}", record)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::LoadOptions;
    use crate::geometry::{make_patches, TriangleMesh};

    fn tiny_mesh() -> TriangleMesh {
        TriangleMesh::from_parts(
            vec![
                vec3(0.1, 0.1, 0.1),
                vec3(0.4, 0.1, 0.1),
                vec3(0.1, 0.4, 0.1),
            ],
            vec![[0, 1, 2]],
            &LoadOptions::default(),
        )
        .unwrap()
        .0
    }

    fn patch_at(points: &[Vec3]) -> SurfacePatchSet {
        // A patch set with centroids at the given points, built from tiny
        // triangles centered there.
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (n, &c) in points.iter().enumerate() {
            let i = (n * 3) as u32;
            vertices.push(c + vec3(-0.0015, -0.001, 0.0));
            vertices.push(c + vec3(0.0015, -0.001, 0.0));
            vertices.push(c + vec3(0.0, 0.002, 0.0));
            triangles.push([i, i + 1, i + 2]);
        }
        let mesh = TriangleMesh::from_parts(vertices, triangles, &LoadOptions::default())
            .unwrap()
            .0;
        make_patches(&mesh, 1.0).unwrap()
    }

    fn shell_params() -> SamplingParams {
        SamplingParams {
            n_via_points: 5,
            pair_distance: 2.0,
            field_range: 10.0,
            view_range: 1.5,
            safety_distance: 1.0,
            seed: 42,
            pose_spacing: 0.5,
        }
    }

    #[test]
    fn region_of_single_voxel_structure_is_the_12_voxel_shell() {
        let mesh = tiny_mesh();
        let region =
            build_sampling_region(&mesh, &shell_params(), 1.0, &VoxelizeOptions::default())
                .unwrap();
        assert_eq!(region.occupied_count(), 12);
    }

    #[test]
    fn equal_safety_and_view_range_rejected() {
        let mut params = shell_params();
        params.safety_distance = 1.5;
        params.view_range = 1.5;
        let mesh = tiny_mesh();
        assert!(matches!(
            build_sampling_region(&mesh, &params, 1.0, &VoxelizeOptions::default()),
            Err(Error::InvalidParam(_))
        ));
    }

    #[test]
    fn via_points_are_deterministic_and_inside_region() {
        let mesh = tiny_mesh();
        let params = shell_params();
        let region =
            build_sampling_region(&mesh, &params, 1.0, &VoxelizeOptions::default()).unwrap();
        let patches = patch_at(&[vec3(0.2, 0.2, 0.1)]);

        let a = sample_via_points(&region, &patches, &params).unwrap();
        let b = sample_via_points(&region, &patches, &params).unwrap();
        assert_eq!(a.len(), 5);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.position, y.position);
            assert_eq!(x.direction, y.direction);
        }
        for p in &a {
            assert!(region.is_point_occupied(p.position), "{:?} outside region", p.position);
            assert!(p.direction.is_unit(1e-6));
        }
    }

    #[test]
    fn via_point_sampling_scales_to_paper_counts() {
        let mesh = tiny_mesh();
        let mut params = shell_params();
        params.n_via_points = 1765;
        let region =
            build_sampling_region(&mesh, &params, 1.0, &VoxelizeOptions::default()).unwrap();
        let patches = patch_at(&[vec3(0.2, 0.2, 0.1)]);
        let points = sample_via_points(&region, &patches, &params).unwrap();
        assert_eq!(points.len(), 1765);
    }

    #[test]
    fn single_patch_field_points_back_at_patch() {
        let patches = patch_at(&[vec3(0.0, 0.0, 0.0)]);
        let dir = compute_view_direction(vec3(0.0, 0.0, 10.0), &patches, 50.0);
        assert!((dir - vec3(0.0, 0.0, -1.0)).norm() < 1e-6);
    }

    #[test]
    fn symmetric_patches_cancel_lateral_components() {
        let patches = patch_at(&[vec3(1.0, 0.0, 0.0), vec3(-1.0, 0.0, 0.0)]);
        let dir = compute_view_direction(vec3(0.0, 0.0, 5.0), &patches, 50.0);
        assert!(dir.x.abs() < 1e-9);
        assert!((dir.z + 1.0).abs() < 1e-9);
    }

    #[test]
    fn random_single_patch_cases_are_antiparallel() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let c = vec3(
                rng.random::<f64>() * 20.0 - 10.0,
                rng.random::<f64>() * 20.0 - 10.0,
                rng.random::<f64>() * 20.0 - 10.0,
            );
            let offset = vec3(
                rng.random::<f64>() * 8.0 - 4.0,
                rng.random::<f64>() * 8.0 - 4.0,
                rng.random::<f64>() * 8.0 - 4.0,
            );
            if offset.norm() < 0.1 {
                continue;
            }
            let p = c + offset;
            let patches = patch_at(&[c]);
            let dir = compute_view_direction(p, &patches, 50.0);
            // The camera direction must be anti-parallel to (p - centroid),
            // i.e. point from the viewpoint back toward the patch. The patch
            // centroid is a tiny triangle's centroid, so allow its extent.
            let expected = (patches.patch(0).centroid - p).normalized().unwrap();
            assert!((dir - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn pair_distance_gates_primitives() {
        let a = ViaPoint {
            id: 0,
            position: vec3(0.0, 0.0, 0.0),
            direction: Vec3::X,
        };
        let b = ViaPoint {
            id: 1,
            position: vec3(100.0, 0.0, 0.0),
            direction: Vec3::X,
        };
        let grid = VoxelGrid::empty(vec3(-1.0, -1.0, -1.0), 1.0, [1, 1, 1]);
        let mut params = shell_params();
        params.pair_distance = 25.0;
        let prims = sample_primitives(&[a, b], &grid, &params, &StraightLinePlanner);
        assert!(prims.is_empty());
    }

    #[test]
    fn clear_line_yields_one_primitive() {
        let a = ViaPoint {
            id: 0,
            position: vec3(0.0, 5.0, 0.0),
            direction: Vec3::X,
        };
        let b = ViaPoint {
            id: 1,
            position: vec3(10.0, 5.0, 0.0),
            direction: Vec3::Y,
        };
        let grid = VoxelGrid::empty(vec3(-1.0, -1.0, -1.0), 1.0, [1, 1, 1]);
        let mut params = shell_params();
        params.pair_distance = 25.0;
        params.pose_spacing = 2.0;
        let prims = sample_primitives(&[a, b], &grid, &params, &StraightLinePlanner);
        assert_eq!(prims.len(), 1);
        let p = &prims[0];
        assert!((p.length - 10.0).abs() < 1e-12);
        assert_eq!(p.sample_poses.len(), 6); // ceil(10/2)=5 segments
        assert_eq!(p.sample_poses[0].position, a.position);
        assert_eq!(p.sample_poses[0].direction, a.direction);
        assert_eq!(p.sample_poses.last().unwrap().direction, b.direction);
        for w in p.sample_poses.windows(2) {
            assert!((w[1].position - w[0].position).norm() <= 2.0 + 1e-9);
        }
    }

    #[test]
    fn blocked_line_is_rejected() {
        // One occupied voxel sits between the two via-points.
        let mut grid = VoxelGrid::empty(vec3(4.0, 4.0, -0.5), 1.0, [1, 1, 1]);
        grid.set(0, 0, 0, true);
        let a = ViaPoint {
            id: 0,
            position: vec3(0.0, 4.5, 0.0),
            direction: Vec3::X,
        };
        let b = ViaPoint {
            id: 1,
            position: vec3(10.0, 4.5, 0.0),
            direction: Vec3::X,
        };
        let mut params = shell_params();
        params.pair_distance = 25.0;
        let prims = sample_primitives(&[a, b], &grid, &params, &StraightLinePlanner);
        assert!(prims.is_empty());
    }

    #[test]
    fn antipodal_endpoint_directions_rejected() {
        let a = ViaPoint {
            id: 0,
            position: vec3(0.0, 0.0, 0.0),
            direction: Vec3::X,
        };
        let b = ViaPoint {
            id: 1,
            position: vec3(5.0, 0.0, 0.0),
            direction: -Vec3::X,
        };
        let grid = VoxelGrid::empty(vec3(-20.0, -20.0, -20.0), 1.0, [1, 1, 1]);
        let params = shell_params();
        let prims = sample_primitives(&[a, b], &grid, &params, &StraightLinePlanner);
        assert!(prims.is_empty());

        let err = interpolate_pose(&a.pose(), &b.pose(), vec3(2.5, 0.0, 0.0));
        assert!(matches!(err, Err(Error::AntipodalDirections)));
    }

    #[test]
    fn midpoint_interpolation_renormalizes() {
        let start = Pose {
            position: vec3(0.0, 0.0, 0.0),
            direction: Vec3::X,
        };
        let end = Pose {
            position: vec3(2.0, 0.0, 0.0),
            direction: Vec3::Y,
        };
        let mid = interpolate_pose(&start, &end, vec3(1.0, 0.0, 0.0)).unwrap();
        let expected = vec3(1.0, 1.0, 0.0).normalized().unwrap();
        assert!((mid.direction - expected).norm() < 1e-12);
        assert!(mid.direction.is_unit(1e-9));

        let s = interpolate_pose(&start, &end, start.position).unwrap();
        assert_eq!(s.direction, start.direction);
        let e = interpolate_pose(&start, &end, end.position).unwrap();
        assert_eq!(e.direction, end.direction);
    }
}
