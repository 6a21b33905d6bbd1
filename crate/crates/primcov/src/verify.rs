//! Independent coverage verification: fly a simulated depth camera along the
//! finished path, cast a ray grid per pose, back-project first hits into the
//! world frame, and report the measured coverage ratio.
//!
//! This is a distinct code path from the planner's visibility model: patches
//! are credited per-ray at the actual hit point (no centroid shortcut); only
//! the geometric ray/triangle primitive is shared.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::geometry::{Bvh, Ray, SurfacePatchSet, TriangleMesh, VoxelGrid};
use crate::math::{vec3, Vec3};
use crate::sampling::{sample_poses_on_segment, Pose};
use crate::visibility::{CameraFrame, SensorModel};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyParams {
    /// Ray grid width (columns).
    pub ray_width: usize,
    /// Ray grid height (rows).
    pub ray_height: usize,
    /// Pose spacing along the walk, meters.
    pub pose_spacing: f64,
    /// Resolution of the accumulated hit-point occupancy grid.
    pub grid_resolution: f64,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            ray_width: 160,
            ray_height: 120,
            pose_spacing: 1.0,
            grid_resolution: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScanHit {
    /// First-hit point in the world frame.
    pub point: Vec3,
    pub t: f64,
    pub triangle: u32,
    pub patch: u32,
}

/// One simulated depth frame: a `width x height` ray grid spanning the
/// frustum, with per-ray first hits.
#[derive(Debug, Clone)]
pub struct SimulatedScan {
    pub pose: Pose,
    pub width: usize,
    pub height: usize,
    pub hits: Vec<Option<ScanHit>>,
}

impl SimulatedScan {
    pub fn hit(&self, col: usize, row: usize) -> &Option<ScanHit> {
        &self.hits[row * self.width + col]
    }

    pub fn hit_count(&self) -> usize {
        self.hits.iter().filter(|h| h.is_some()).count()
    }
}

/// Unit ray direction for pixel (col, row) in camera coordinates
/// (right, up, forward): pixel centers uniformly spaced in tangent-angle
/// across `[-half_angle, half_angle]` per axis.
pub fn pixel_ray_camera(
    sensor: &SensorModel,
    width: usize,
    height: usize,
    col: usize,
    row: usize,
) -> Vec3 {
    let (half_h, half_v) = sensor.half_angles();
    let alpha = -half_h + (col as f64 + 0.5) * (2.0 * half_h / width as f64);
    let beta = -half_v + (row as f64 + 0.5) * (2.0 * half_v / height as f64);
    vec3(alpha.tan(), beta.tan(), 1.0)
        .normalized()
        .expect("pixel direction is finite")
}

/// Cast the full ray grid from one pose; hits are limited to the sensor's
/// viewing range and mapped to the surface patch containing the hit point.
pub fn simulate_scan(
    pose: &Pose,
    mesh: &TriangleMesh,
    bvh: &Bvh,
    patches: &SurfacePatchSet,
    sensor: &SensorModel,
    width: usize,
    height: usize,
) -> SimulatedScan {
    let frame = CameraFrame::from_pose(pose);
    let mut hits = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let cam_dir = pixel_ray_camera(sensor, width, height, col, row);
            let world_dir = (frame.right * cam_dir.x + frame.up * cam_dir.y + frame.forward * cam_dir.z)
                .normalized()
                .expect("frame is orthonormal");
            let ray = Ray::new(pose.position, world_dir, sensor.max_view_range);
            hits.push(bvh.ray_hit(&ray).map(|hit| {
                let patch = patches.locate(mesh, hit.triangle as usize, hit.point) as u32;
                ScanHit {
                    point: hit.point,
                    t: hit.t,
                    triangle: hit.triangle,
                    patch,
                }
            }));
        }
    }
    SimulatedScan {
        pose: *pose,
        width,
        height,
        hits,
    }
}

/// Measured-coverage report produced by [`verify_path`].
#[derive(Debug, Clone)]
pub struct CoverageReport {
    pub delta_meas: f64,
    pub delta_plan: f64,
    pub seen: Bitset,
    /// Accumulated first-hit points, voxelized for export.
    pub occupancy: VoxelGrid,
    pub pose_count: usize,
    pub hit_count: usize,
    pub ray_width: usize,
    pub ray_height: usize,
    pub pose_spacing: f64,
}

impl CoverageReport {
    pub fn to_json(&self) -> Result<String> {
        let doc = serde_json::json!({
            "format": "coverage/1",
            "delta_meas": self.delta_meas,
            "delta_plan": self.delta_plan,
            "m": self.seen.len(),
            "seen": self.seen.to_hex(),
            "pose_count": self.pose_count,
            "hit_count": self.hit_count,
            "ray_grid": [self.ray_width, self.ray_height],
            "pose_spacing": self.pose_spacing,
            "occupied_voxels": self.occupancy.occupied_count(),
        });
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Resample the walk's node poses into a stream at the given spacing,
/// interpolating viewing directions along each edge; consecutive edges share
/// their junction pose once.
pub fn walk_pose_stream(
    node_sequence: &[u32],
    node_pose: impl Fn(u32) -> Pose,
    spacing: f64,
) -> Result<Vec<Pose>> {
    if !(spacing > 0.0) {
        return Err(Error::InvalidParam("pose spacing must be > 0".into()));
    }
    match node_sequence {
        [] => Ok(vec![]),
        [only] => Ok(vec![node_pose(*only)]),
        _ => {
            let mut stream: Vec<Pose> = Vec::new();
            for pair in node_sequence.windows(2) {
                let start = node_pose(pair[0]);
                let end = node_pose(pair[1]);
                let poses = sample_poses_on_segment(&start, &end, spacing);
                let skip = usize::from(!stream.is_empty());
                stream.extend(poses.into_iter().skip(skip));
            }
            Ok(stream)
        }
    }
}

/// Simulate scans along a pose stream and accumulate per-patch coverage. A
/// patch counts as seen when some ray's first hit lands on it within range
/// and within the sensor's max viewing angle at the hit point.
pub fn verify_path(
    pose_stream: &[Pose],
    mesh: &TriangleMesh,
    bvh: &Bvh,
    patches: &SurfacePatchSet,
    sensor: &SensorModel,
    params: &VerifyParams,
    delta_plan: f64,
) -> CoverageReport {
    let m = patches.len();
    let cos_max_angle = sensor.max_view_angle_deg.to_radians().cos();

    let per_pose: Vec<(Bitset, Vec<Vec3>)> = pose_stream
        .par_iter()
        .map(|pose| {
            let scan = simulate_scan(pose, mesh, bvh, patches, sensor, params.ray_width, params.ray_height);
            let mut seen = Bitset::new(m);
            let mut points = Vec::new();
            for hit in scan.hits.iter().flatten() {
                let to_camera = pose.position - hit.point;
                let dist = to_camera.norm();
                if dist > sensor.max_view_range || dist < 1e-12 {
                    continue;
                }
                let normal = patches.patch(hit.patch as usize).normal;
                if normal.dot(to_camera / dist) < cos_max_angle {
                    continue;
                }
                seen.set(hit.patch as usize, true);
                points.push(hit.point);
            }
            (seen, points)
        })
        .collect();

    let mut seen = Bitset::new(m);
    let mut all_points = Vec::new();
    for (bits, points) in per_pose {
        seen.union_with(&bits);
        all_points.extend(points);
    }

    // Voxelize the accumulated hit cloud over the mesh bounds (one voxel of
    // margin so boundary hits stay inside).
    let (lo, hi) = mesh.bounding_box();
    let r = params.grid_resolution;
    let origin = lo - vec3(r, r, r);
    let extent = hi - origin + vec3(r, r, r);
    let dims = [
        ((extent.x / r).ceil() as usize).max(1),
        ((extent.y / r).ceil() as usize).max(1),
        ((extent.z / r).ceil() as usize).max(1),
    ];
    let mut occupancy = VoxelGrid::empty(origin, r, dims);
    let hit_count = all_points.len();
    for p in all_points {
        if let Some([i, j, k]) = occupancy.voxel_of(p) {
            occupancy.set(i, j, k, true);
        }
    }

    CoverageReport {
        delta_meas: if m == 0 { 0.0 } else { seen.count_ones() as f64 / m as f64 },
        delta_plan,
        seen,
        occupancy,
        pose_count: pose_stream.len(),
        hit_count,
        ray_width: params.ray_width,
        ray_height: params.ray_height,
        pose_spacing: params.pose_spacing,
    }
}

/// ASCII PLY point cloud of every voxelized hit center (compact preview of
/// the accumulated scan).
pub fn write_hit_cloud_ply(occupancy: &VoxelGrid, mut w: impl std::io::Write) -> std::io::Result<()> {
    let cells = occupancy.occupied_indices();
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", cells.len())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    writeln!(w, "end_header")?;
    for [i, j, k] in cells {
        let c = occupancy.center(i, j, k);
        writeln!(w, "{} {} {}", c.x as f32, c.y as f32, c.z as f32)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_patches, mesh::LoadOptions};
    use crate::structures::ninety_six_patch_box;

    fn wall_scene() -> (TriangleMesh, SurfacePatchSet, Bvh) {
        // A large wall in the y-z plane at x = 1, normal -x.
        let mesh = TriangleMesh::from_parts(
            vec![
                vec3(1.0, -20.0, -20.0),
                vec3(1.0, -20.0, 20.0),
                vec3(1.0, 20.0, 20.0),
                vec3(1.0, 20.0, -20.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            &LoadOptions::default(),
        )
        .unwrap()
        .0;
        let patches = make_patches(&mesh, 1e9).unwrap();
        let bvh = Bvh::build(&mesh);
        (mesh, patches, bvh)
    }

    #[test]
    fn open_sky_misses_everything() {
        let (mesh, patches, bvh) = wall_scene();
        let pose = Pose {
            position: Vec3::ZERO,
            direction: -Vec3::X, // facing away from the wall
        };
        let scan = simulate_scan(&pose, &mesh, &bvh, &patches, &SensorModel::default(), 16, 12);
        assert_eq!(scan.hit_count(), 0);
    }

    #[test]
    fn perpendicular_wall_center_ray_hits_at_one_meter() {
        let (mesh, patches, bvh) = wall_scene();
        let pose = Pose {
            position: Vec3::ZERO,
            direction: Vec3::X,
        };
        // Odd grid: the center pixel's tangent offsets cancel to the axis.
        let scan = simulate_scan(&pose, &mesh, &bvh, &patches, &SensorModel::default(), 15, 11);
        let center = scan.hit(7, 5).as_ref().expect("center ray hits the wall");
        assert!((center.t - 1.0).abs() < 1e-6);
        assert!((center.point - vec3(1.0, 0.0, 0.0)).norm() < 1e-6);
        assert!(scan.hit_count() > 0);
    }

    #[test]
    fn hit_points_round_trip_through_the_camera_frame() {
        let (mesh, patches, bvh) = wall_scene();
        let pose = Pose {
            position: vec3(-0.5, 0.3, -0.2),
            direction: vec3(1.0, 0.1, 0.05).normalized().unwrap(),
        };
        let sensor = SensorModel::default();
        let (w, h) = (9, 7);
        let scan = simulate_scan(&pose, &mesh, &bvh, &patches, &sensor, w, h);
        let frame = CameraFrame::from_pose(&pose);
        for row in 0..h {
            for col in 0..w {
                if let Some(hit) = scan.hit(col, row) {
                    // The camera-frame point from the pixel ray and range.
                    let cam = pixel_ray_camera(&sensor, w, h, col, row) * hit.t;
                    let world = frame.to_world(cam);
                    assert!((world - hit.point).norm() < 1e-9);
                    let back = frame.to_camera(hit.point);
                    assert!((back - cam).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn empty_pose_stream_measures_zero() {
        let (mesh, patches, bvh) = wall_scene();
        let report = verify_path(
            &[],
            &mesh,
            &bvh,
            &patches,
            &SensorModel::default(),
            &VerifyParams::default(),
            0.5,
        );
        assert_eq!(report.delta_meas, 0.0);
        assert_eq!(report.pose_count, 0);
    }

    #[test]
    fn doubling_ray_density_never_decreases_coverage() {
        let mesh = ninety_six_patch_box();
        let patches = make_patches(&mesh, 0.1).unwrap();
        let bvh = Bvh::build(&mesh);
        let sensor = SensorModel {
            max_view_range: 30.0,
            ..SensorModel::default()
        };
        let poses = vec![
            Pose {
                position: vec3(-3.0, 0.5, 2.0),
                direction: (vec3(0.5, 0.5, 0.3) - vec3(-3.0, 0.5, 2.0)).normalized().unwrap(),
            },
            Pose {
                position: vec3(4.0, 0.5, 1.5),
                direction: (vec3(0.5, 0.5, 0.3) - vec3(4.0, 0.5, 1.5)).normalized().unwrap(),
            },
        ];
        let low = VerifyParams {
            ray_width: 40,
            ray_height: 30,
            ..Default::default()
        };
        let high = VerifyParams {
            ray_width: 80,
            ray_height: 60,
            ..Default::default()
        };
        let r_low = verify_path(&poses, &mesh, &bvh, &patches, &sensor, &low, 1.0);
        let r_high = verify_path(&poses, &mesh, &bvh, &patches, &sensor, &high, 1.0);
        assert!(r_high.delta_meas >= r_low.delta_meas);
        assert!(r_low.delta_meas > 0.0);
    }

    #[test]
    fn walk_pose_stream_resamples_between_nodes() {
        let a = Pose {
            position: Vec3::ZERO,
            direction: Vec3::X,
        };
        let b = Pose {
            position: vec3(4.0, 0.0, 0.0),
            direction: Vec3::Y,
        };
        let c = Pose {
            position: vec3(4.0, 4.0, 0.0),
            direction: Vec3::Y,
        };
        let lookup = move |id: u32| [a, b, c][id as usize];
        let stream = walk_pose_stream(&[0, 1, 2], lookup, 1.0).unwrap();
        // Two 4 m edges at 1 m spacing: 5 + 5 poses, junction shared once.
        assert_eq!(stream.len(), 9);
        assert_eq!(stream[0].position, a.position);
        assert_eq!(stream[4].position, b.position);
        assert_eq!(stream[8].position, c.position);
        for w in stream.windows(2) {
            assert!((w[1].position - w[0].position).norm() <= 1.0 + 1e-9);
        }

        assert_eq!(walk_pose_stream(&[], lookup, 1.0).unwrap().len(), 0);
        assert_eq!(walk_pose_stream(&[1], lookup, 1.0).unwrap().len(), 1);
    }
}
